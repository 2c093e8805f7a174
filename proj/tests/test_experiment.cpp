#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stormpg/experiment.hpp"
#include "stormpg/fixtures.hpp"
#include "stormpg/verify.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace stormpg;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const fs::path path = fs::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path.string();
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string minimal_config(const std::string& mdp_path, int t, const std::string& seeds) {
    return std::string(R"({
      "algorithm": "storm_s",
      "mdp_path": ")") +
           mdp_path + R"(",
      "T": )" + std::to_string(t) +
           R"(,
      "B": 3,
      "H": 6,
      "lambda": 0.05,
      "mode": "practical",
      "practical": {"k": 0.4, "c": 2.0, "m": 8.0},
      "seeds": )" +
           seeds + R"(,
      "out_csv": "trial"
    })";
}

} // namespace

TEST_CASE("config parsing: required fields, H auto, clip, seed fallbacks") {
    const std::string mdp = std::string(DATA_DIR) + "/mdp_2state.json";

    SUBCASE("missing mdp_path is named") {
        CHECK_THROWS_WITH_AS(parse_experiment_config(R"({"algorithm": "vanilla"})", ""),
                             doctest::Contains("mdp_path"), ConfigError);
    }
    SUBCASE("missing T and B are named") {
        CHECK_THROWS_WITH_AS(
            parse_experiment_config(R"({"algorithm": "vanilla", "mdp_path": "x", "B": 1, "seed": 1})",
                                    ""),
            doctest::Contains("'T'"), ConfigError);
    }
    SUBCASE("unknown algorithm is rejected") {
        CHECK_THROWS_AS(
            parse_experiment_config(
                R"({"algorithm": "sarsa", "mdp_path": "x", "T": 1, "B": 1, "seed": 1})", ""),
            ConfigError);
    }
    SUBCASE("H accepts 'auto' and positive integers only") {
        const std::string base =
            R"({"algorithm": "vanilla", "mdp_path": ")" + mdp +
            R"(", "T": 2, "B": 1, "seed": 1, "mode": "practical",
                "practical": {"k": 1, "c": 1, "m": 8}, "H": )";
        CHECK(parse_experiment_config(base + R"("auto"})", "").run.horizon == 0);
        CHECK(parse_experiment_config(base + R"(17})", "").run.horizon == 17);
        CHECK_THROWS_AS(parse_experiment_config(base + R"(0})", ""), ConfigError);
        CHECK_THROWS_AS(parse_experiment_config(base + R"("blah"})", ""), ConfigError);
    }
    SUBCASE("clip is null or a pair") {
        const std::string base =
            R"({"algorithm": "vanilla", "mdp_path": ")" + mdp +
            R"(", "T": 2, "B": 1, "seed": 1, "mode": "practical",
                "practical": {"k": 1, "c": 1, "m": 8}, "clip": )";
        CHECK_FALSE(parse_experiment_config(base + R"(null})", "").run.clip.has_value());
        const auto clip = parse_experiment_config(base + R"([0.5, 2.0]})", "").run.clip;
        REQUIRE(clip.has_value());
        CHECK(clip->lo == 0.5);
        CHECK(clip->hi == 2.0);
        CHECK_THROWS_AS(parse_experiment_config(base + R"([1.0]})", ""), ConfigError);
    }
    SUBCASE("seed scalar becomes a one-element list; empty seeds rejected") {
        const std::string base =
            R"({"algorithm": "vanilla", "mdp_path": ")" + mdp +
            R"(", "T": 2, "B": 1, "mode": "practical", "practical": {"k": 1, "c": 1, "m": 8})";
        CHECK(parse_experiment_config(base + R"(, "seed": 9})", "").seeds ==
              std::vector<std::uint64_t>{9});
        CHECK(parse_experiment_config(base + R"(, "seeds": [1, 2, 3]})", "").seeds.size() == 3);
        CHECK_THROWS_WITH_AS(parse_experiment_config(base + "}", ""), doctest::Contains("seed"),
                             ConfigError);
    }
    SUBCASE("practical mode requires the practical block") {
        CHECK_THROWS_WITH_AS(
            parse_experiment_config(R"({"algorithm": "vanilla", "mdp_path": ")" + mdp +
                                        R"(", "T": 2, "B": 1, "seed": 1, "mode": "practical"})",
                                    ""),
            doctest::Contains("practical"), ConfigError);
    }
    SUBCASE("relative mdp_path resolves against the config directory") {
        const ExperimentConfig config = parse_experiment_config(
            R"({"algorithm": "vanilla", "mdp_path": "mdp_2state.json", "T": 2, "B": 1,
                "seed": 1, "mode": "practical", "practical": {"k": 1, "c": 1, "m": 8}})",
            DATA_DIR);
        CHECK(config.mdp_path == std::string(DATA_DIR) + "/mdp_2state.json");
    }
}

TEST_CASE("format_double emits shortest round-trip decimals") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.0, -2.5e17, 0.0}) {
        const std::string s = format_double(v);
        double parsed = 0.0;
        std::from_chars(s.data(), s.data() + s.size(), parsed);
        CHECK(parsed == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("quantile interpolates order statistics") {
    std::vector<double> values{4.0, 1.0, 3.0, 2.0};
    CHECK(quantile(values, 0.5) == doctest::Approx(2.5));
    CHECK(quantile(values, 0.0) == doctest::Approx(1.0));
    CHECK(quantile(values, 1.0) == doctest::Approx(4.0));
    CHECK(quantile({5.0, 1.0, 9.0}, 0.5) == doctest::Approx(5.0));
    CHECK_THROWS_AS(quantile({}, 0.5), ValidationError);
}

TEST_CASE("run_experiment writes per-seed CSVs plus a matching aggregate") {
    const std::string mdp_path = std::string(DATA_DIR) + "/mdp_2state.json";
    const std::string config_path =
        write_temp("stormpg_cfg_basic.json", minimal_config(mdp_path, 4, "[3, 14, 15]"));
    const ExperimentConfig config = load_experiment_config(config_path);
    const std::string out_dir = (fs::temp_directory_path() / "stormpg_exp_basic").string();
    fs::remove_all(out_dir);

    const ExperimentResult result = run_experiment(config, out_dir, 2);
    CHECK(result.runs.size() == 3);
    CHECK(result.csv_paths.size() == 3);
    for (const std::string& path : result.csv_paths) CHECK(fs::exists(path));
    CHECK(fs::exists(result.aggregate_path));

    SUBCASE("CSV schema and row count") {
        const std::string csv = read_file(result.csv_paths[0]);
        CHECK(csv.rfind("t,eta,beta,J_exact,L_lambda_exact,grad_norm_exact,u_norm,"
                        "err_norm_exact,max_var_w,trajectories\n",
                        0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 5); // header + T rows
    }
    SUBCASE("aggregate is recomputable from the CSVs") {
        const auto aggregate = nlohmann::json::parse(read_file(result.aggregate_path));
        std::vector<std::vector<double>> j_by_seed;
        for (const std::string& path : result.csv_paths) {
            std::ifstream in(path);
            std::string line;
            std::getline(in, line); // header
            std::vector<double> col;
            while (std::getline(in, line)) {
                std::stringstream row(line);
                std::string cell;
                for (int c = 0; c <= 3; ++c) std::getline(row, cell, ',');
                col.push_back(std::stod(cell)); // J_exact
            }
            j_by_seed.push_back(col);
        }
        const auto& medians = aggregate.at("per_iteration").at("J_exact").at("median");
        REQUIRE(medians.size() == 4);
        for (int t = 0; t < 4; ++t) {
            std::vector<double> values;
            for (const auto& col : j_by_seed) values.push_back(col[t]);
            CHECK(medians[t].get<double>() == doctest::Approx(quantile(values, 0.5)).epsilon(1e-15));
        }
        CHECK(aggregate.at("n_seeds") == 3);
        CHECK(aggregate.at("total_trajectories") == 3 * 4 * 3); // seeds * T * B
        CHECK(aggregate.at("j_star").get<double>() > 0.0);
    }
    SUBCASE("thread counts do not change the bytes") {
        const std::string out_a = (fs::temp_directory_path() / "stormpg_exp_t1").string();
        const std::string out_b = (fs::temp_directory_path() / "stormpg_exp_t8").string();
        fs::remove_all(out_a);
        fs::remove_all(out_b);
        const ExperimentResult a = run_experiment(config, out_a, 1);
        const ExperimentResult b = run_experiment(config, out_b, 8);
        for (std::size_t i = 0; i < a.csv_paths.size(); ++i)
            CHECK(read_file(a.csv_paths[i]) == read_file(b.csv_paths[i]));
        CHECK(read_file(a.aggregate_path) == read_file(b.aggregate_path));
    }
}

TEST_CASE("storm_f aggregates additionally carry the Fisher diagnostics") {
    const std::string config_json = std::string(R"({
      "algorithm": "storm_f",
      "mdp_path": ")") + DATA_DIR +
                                    R"(/mdp_2state.json",
      "T": 3, "B": 2, "H": 5,
      "mode": "practical", "practical": {"k": 0.2, "c": 1.0, "m": 8.0},
      "seeds": [4, 5]
    })";
    const std::string config_path = write_temp("stormpg_cfg_fisher.json", config_json);
    const std::string out_dir = (fs::temp_directory_path() / "stormpg_exp_fisher").string();
    fs::remove_all(out_dir);
    const ExperimentResult result = run_experiment(load_experiment_config(config_path), out_dir, 1);

    const auto aggregate = nlohmann::json::parse(read_file(result.aggregate_path));
    for (const char* column : {"mu_f_restricted", "eps_bias", "lemma4_lhs", "lemma4_rhs"}) {
        REQUIRE(aggregate.at("per_iteration").contains(column));
        for (const auto& v : aggregate.at("per_iteration").at(column).at("median"))
            CHECK(std::isfinite(v.get<double>()));
    }
    // The CSV schema itself stays pinned to the ten standard columns.
    const std::string csv = read_file(result.csv_paths[0]);
    CHECK(csv.find("mu_f_restricted") == std::string::npos);
}

TEST_CASE("verify suites: constants pass, corrupted fixtures fail loudly") {
    SUBCASE("constants suite holds at small scale") {
        const VerifyReport report = run_verify_suite("constants", "small", std::nullopt);
        CHECK(report.all_hold);
        CHECK(report.checks.size() >= 2);
    }
    SUBCASE("unknown suite and scale are rejected") {
        CHECK_THROWS_AS(run_verify_suite("nonsense", "small", std::nullopt), ConfigError);
        CHECK_THROWS_AS(run_verify_suite("all", "medium", std::nullopt), ConfigError);
    }
    SUBCASE("a corrupted MDP fixture becomes a failing named check") {
        const std::string bad = write_temp("stormpg_bad_mdp.json", R"({
          "n_states": 1, "n_actions": 1,
          "transition": [[[0.9]]],
          "reward": [[0.5]],
          "gamma": 0.9, "rho": [1.0], "mu": [1.0]
        })");
        const VerifyReport report = run_verify_suite("gradients", "small", bad);
        CHECK_FALSE(report.all_hold);
        REQUIRE(!report.checks.empty());
        CHECK(report.checks.front().check_name == "fixture_validation");
        CHECK(report.checks.front().instance_id.find("row sum") != std::string::npos);
    }
    SUBCASE("verify json serialization carries every field") {
        const VerifyReport report = run_verify_suite("constants", "small", std::nullopt);
        const auto j = nlohmann::json::parse(verify_report_json(report));
        CHECK(j.at("all_hold").get<bool>());
        const auto& first = j.at("checks").at(0);
        for (const char* field : {"check_name", "instance_id", "lhs", "rhs", "holds", "slack",
                                  "applicable", "constituents"})
            CHECK(first.contains(field));
    }
}
