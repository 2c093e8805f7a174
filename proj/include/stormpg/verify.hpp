#pragma once

#include "stormpg/oracle.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stormpg {

/// Outcome of one verification suite. all_hold covers every applicable hard
/// check; soft checks (the Lemma-3 budget) downgrade to warnings instead.
struct VerifyReport {
    std::string suite;
    std::string scale;
    std::vector<BoundReport> checks;
    std::vector<std::string> warnings;
    bool all_hold = true;
};

/// suite: estimators | weights | gradients | bounds | constants | all.
/// scale: small (quick spot counts) or full (acceptance-level counts).
/// mdp_path, when given, is validated (a failure becomes a failing check, not
/// an error) and substituted into the gradient-oracle instances.
VerifyReport run_verify_suite(const std::string& suite, const std::string& scale,
                              const std::optional<std::string>& mdp_path);

std::string verify_report_json(const VerifyReport& report);

} // namespace stormpg
