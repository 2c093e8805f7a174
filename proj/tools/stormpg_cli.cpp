// Command-line front end. Deliberately built against the C API alone: this is
// the same surface an embedding application would use.

#include "stormpg.h"

#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;

int exit_code_of(spg_status status) {
    switch (status) {
        case SPG_OK: return kExitOk;
        case SPG_ERR_CHECK_FAILED: return kExitCheckFailed;
        default: return kExitConfig;
    }
}

int cmd_run(const std::string& config_path, const std::string& out_dir, int threads) {
    char err[1024] = {0};
    spg_experiment* experiment = nullptr;
    const spg_status status =
        spg_run_experiment(config_path.c_str(), out_dir.c_str(), threads, &experiment, err, sizeof(err));
    if (status != SPG_OK) {
        std::fprintf(stderr, "run failed: %s\n", err);
        return exit_code_of(status);
    }
    std::printf("%s\n", spg_experiment_summary_json(experiment));
    std::fprintf(stderr, "wrote artifacts for %d seed(s) to %s\n",
                 spg_experiment_num_seeds(experiment), out_dir.c_str());
    spg_experiment_free(experiment);
    return kExitOk;
}

int cmd_verify(const std::string& suite, const std::string& scale, const std::string& mdp_path) {
    char err[1024] = {0};
    spg_verify_report* report = nullptr;
    const spg_status status = spg_verify(suite.c_str(), scale.c_str(),
                                         mdp_path.empty() ? nullptr : mdp_path.c_str(), &report, err,
                                         sizeof(err));
    if (status != SPG_OK) {
        std::fprintf(stderr, "verify failed: %s\n", err);
        return exit_code_of(status);
    }
    std::printf("%s\n", spg_verify_report_json(report));
    const bool all_hold = spg_verify_all_hold(report) != 0;
    if (!all_hold) {
        // Repeat the failing instances on stderr so scripts see them without
        // parsing the full JSON.
        const auto j = nlohmann::json::parse(spg_verify_report_json(report));
        for (const auto& check : j.at("checks"))
            if (check.at("applicable").get<bool>() && !check.at("holds").get<bool>())
                std::fprintf(stderr, "FAILED %s [%s]: lhs=%.17g rhs=%.17g\n",
                             check.at("check_name").get<std::string>().c_str(),
                             check.at("instance_id").get<std::string>().c_str(),
                             check.at("lhs").get<double>(), check.at("rhs").get<double>());
    }
    spg_verify_report_free(report);
    return all_hold ? kExitOk : kExitCheckFailed;
}

int cmd_constants(double m_g, double m_h, double gamma, int horizon, double w, double lambda,
                  double k, bool as_json) {
    char err[1024] = {0};
    std::vector<char> buffer(1 << 16);
    const spg_status status = spg_derive_constants(m_g, m_h, gamma, horizon, w, lambda, k,
                                                   buffer.data(), buffer.size(), err, sizeof(err));
    if (status != SPG_OK) {
        std::fprintf(stderr, "constants failed: %s\n", err);
        return exit_code_of(status);
    }
    if (as_json) {
        std::printf("%s\n", buffer.data());
        return kExitOk;
    }
    const auto j = nlohmann::json::parse(buffer.data());
    for (const auto& entry : j)
        std::printf("%-10s = %-24.17g  [%s]\n", entry.at("name").get<std::string>().c_str(),
                    entry.at("value").get<double>(),
                    entry.at("formula").get<std::string>().c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Momentum-based stochastic policy gradient on tabular MDPs, with exact "
                 "verification oracles"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    std::string config_path;
    std::string out_dir = "out";
    int threads = 1;
    auto* run = app.add_subcommand("run", "Run the configured experiment across seeds");
    run->add_option("--config", config_path, "Experiment config JSON")->required();
    run->add_option("--out", out_dir, "Artifact directory");
    run->add_option("--threads", threads, "Seed worker slots");

    std::string suite = "all";
    std::string scale = "small";
    std::string mdp_path;
    auto* verify = app.add_subcommand("verify", "Run a verification suite");
    verify->add_option("--suite", suite, "estimators|weights|gradients|bounds|constants|all");
    verify->add_option("--scale", scale, "small|full");
    verify->add_option("--mdp", mdp_path, "Optional MDP JSON to validate and check against");

    double m_g = 2.0, m_h = 1.0, gamma = 0.9, w = 1.0, lambda = 0.0, k = 1.0;
    int horizon = 66;
    bool as_json = false;
    auto* constants = app.add_subcommand("constants", "Print the derived analysis constants");
    constants->add_option("--mg", m_g, "Score norm bound M_g");
    constants->add_option("--mh", m_h, "Score Hessian bound M_h");
    constants->add_option("--gamma", gamma, "Discount factor");
    constants->add_option("--horizon", horizon, "Trajectory horizon H");
    constants->add_option("--w", w, "Importance-weight variance bound W");
    constants->add_option("--lambda", lambda, "Log-barrier coefficient");
    constants->add_option("--k", k, "Step scale k");
    constants->add_flag("--json", as_json, "Emit JSON instead of the table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (run->parsed()) return cmd_run(config_path, out_dir, threads);
    if (verify->parsed()) return cmd_verify(suite, scale, mdp_path);
    return cmd_constants(m_g, m_h, gamma, horizon, w, lambda, k, as_json);
}
