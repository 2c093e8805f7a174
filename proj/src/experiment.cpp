#include "stormpg/experiment.hpp"

#include "stormpg/mdp.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace stormpg {

namespace {

namespace fs = std::filesystem;

const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> columns = {
        "t",      "eta",           "beta",      "J_exact",   "L_lambda_exact",
        "grad_norm_exact", "u_norm", "err_norm_exact", "max_var_w", "trajectories"};
    return columns;
}

// Diagnostics logged only by storm_f; aggregated but never part of the CSV.
const std::vector<std::string>& fisher_columns() {
    static const std::vector<std::string> columns = {"mu_f_restricted", "eps_bias", "lemma4_lhs",
                                                     "lemma4_rhs"};
    return columns;
}

double column_value(const IterRow& row, const std::string& column) {
    if (column == "t") return row.t;
    if (column == "eta") return row.eta;
    if (column == "beta") return row.beta;
    if (column == "J_exact") return row.j_exact;
    if (column == "L_lambda_exact") return row.l_lambda_exact;
    if (column == "grad_norm_exact") return row.grad_norm_exact;
    if (column == "u_norm") return row.u_norm;
    if (column == "err_norm_exact") return row.err_norm_exact;
    if (column == "max_var_w") return row.max_var_w;
    if (column == "trajectories") return static_cast<double>(row.trajectories);
    if (column == "mu_f_restricted") return row.mu_f_restricted;
    if (column == "eps_bias") return row.eps_bias;
    if (column == "lemma4_lhs") return row.lemma4_lhs;
    if (column == "lemma4_rhs") return row.lemma4_rhs;
    throw ConfigError("unknown CSV column '" + column + "'");
}

} // namespace

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("quantile: empty sample");
    std::sort(values.begin(), values.end());
    const double rank = p * (static_cast<double>(values.size()) - 1.0);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
    const double frac = rank - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& base_dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: parse failure: ") + e.what());
    }

    ExperimentConfig config;
    if (!j.contains("mdp_path")) throw ConfigError("config: missing field 'mdp_path'");
    config.mdp_path = j.at("mdp_path").get<std::string>();
    if (!base_dir.empty() && fs::path(config.mdp_path).is_relative())
        config.mdp_path = (fs::path(base_dir) / config.mdp_path).string();

    if (!j.contains("algorithm")) throw ConfigError("config: missing field 'algorithm'");
    config.run.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());

    if (!j.contains("T")) throw ConfigError("config: missing field 'T'");
    config.run.iterations = j.at("T").get<int>();
    if (!j.contains("B")) throw ConfigError("config: missing field 'B'");
    config.run.batch_size = j.at("B").get<int>();

    if (j.contains("H")) {
        const auto& h = j.at("H");
        if (h.is_string()) {
            if (h.get<std::string>() != "auto")
                throw ConfigError("config: H must be 'auto' or a positive integer");
            config.run.horizon = 0;
        } else {
            config.run.horizon = h.get<int>();
            if (config.run.horizon < 1) throw ConfigError("config: H must be 'auto' or a positive integer");
        }
    }
    config.run.lambda = j.value("lambda", 0.0);
    config.run.k = j.value("k", 1.0);
    config.run.w_bound = j.value("W", 1.0);

    const std::string mode = j.value("mode", std::string("practical"));
    if (mode == "theory") {
        config.run.mode = HyperMode::theory;
    } else if (mode == "practical") {
        config.run.mode = HyperMode::practical;
        if (!j.contains("practical"))
            throw ConfigError("config: practical mode requires the 'practical' {k, c, m} block");
        const auto& p = j.at("practical");
        for (const char* field : {"k", "c", "m"})
            if (!p.contains(field))
                throw ConfigError(std::string("config: practical block missing field '") + field + "'");
        config.run.practical = StepParams{p.at("k").get<double>(), p.at("c").get<double>(),
                                          p.at("m").get<double>()};
    } else {
        throw ConfigError("config: mode must be theory|practical, got '" + mode + "'");
    }

    if (j.contains("clip") && !j.at("clip").is_null()) {
        const auto& c = j.at("clip");
        if (!c.is_array() || c.size() != 2)
            throw ConfigError("config: clip must be null or [lo, hi]");
        config.run.clip = WeightClip{c[0].get<double>(), c[1].get<double>()};
    }

    if (j.contains("seeds")) {
        for (const auto& s : j.at("seeds")) config.seeds.push_back(s.get<std::uint64_t>());
    } else if (j.contains("seed")) {
        config.seeds.push_back(j.at("seed").get<std::uint64_t>());
    }
    if (config.seeds.empty()) throw ConfigError("config: 'seeds' (or 'seed') must list at least one seed");

    config.aggregation = j.value("aggregation", std::string("median"));
    if (config.aggregation != "median" && config.aggregation != "mean")
        throw ConfigError("config: aggregation must be median|mean");
    config.out_csv = j.value("out_csv", std::string("run"));
    return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str(), fs::path(path).parent_path().string());
}

std::string run_record_csv(const RunRecord& record) {
    std::string out;
    const auto& columns = csv_columns();
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) out += ',';
        out += columns[i];
    }
    out += '\n';
    for (const IterRow& row : record.rows) {
        out += std::to_string(row.t);
        for (std::size_t i = 1; i < columns.size(); ++i) {
            out += ',';
            if (columns[i] == "trajectories")
                out += std::to_string(row.trajectories);
            else
                out += format_double(column_value(row, columns[i]));
        }
        out += '\n';
    }
    return out;
}

AggregateSummary aggregate_runs(const TabularMdp& mdp, std::span<const RunRecord> runs) {
    if (runs.empty()) throw ValidationError("aggregate_runs: no runs");
    AggregateSummary agg;
    agg.n_seeds = static_cast<int>(runs.size());
    std::size_t rows = runs.front().rows.size();
    for (const RunRecord& run : runs) rows = std::min(rows, run.rows.size());
    agg.rows = static_cast<int>(rows);
    agg.j_star = optimal_policy(mdp).second;

    std::vector<std::string> columns = csv_columns();
    if (runs.front().algorithm == Algorithm::storm_f)
        columns.insert(columns.end(), fisher_columns().begin(), fisher_columns().end());
    for (const std::string& column : columns) {
        ColumnStats stats;
        stats.median.reserve(rows);
        stats.mean.reserve(rows);
        stats.iqr.reserve(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            std::vector<double> values;
            values.reserve(runs.size());
            for (const RunRecord& run : runs) values.push_back(column_value(run.rows[r], column));
            double mean = 0.0;
            for (double v : values) mean += v;
            stats.mean.push_back(mean / static_cast<double>(values.size()));
            stats.median.push_back(quantile(values, 0.5));
            stats.iqr.push_back(quantile(values, 0.75) - quantile(values, 0.25));
        }
        agg.per_iteration.emplace(column, std::move(stats));
    }

    std::vector<double> final_gap;
    std::vector<double> initial_gap;
    for (const RunRecord& run : runs) {
        final_gap.push_back(agg.j_star - run.rows[rows - 1].j_exact);
        initial_gap.push_back(agg.j_star - run.rows.front().j_exact);
        agg.total_trajectories += run.rows[rows - 1].trajectories;
    }
    agg.final_suboptimality_median = quantile(final_gap, 0.5);
    double mean = 0.0;
    for (double v : final_gap) mean += v;
    agg.final_suboptimality_mean = mean / static_cast<double>(final_gap.size());
    agg.final_suboptimality_iqr = quantile(final_gap, 0.75) - quantile(final_gap, 0.25);
    agg.initial_suboptimality_median = quantile(initial_gap, 0.5);
    return agg;
}

std::string aggregate_json(const ExperimentConfig& config, const AggregateSummary& agg,
                           const RunRecord& reference_run) {
    nlohmann::json j;
    j["algorithm"] = algorithm_name(config.run.algorithm);
    j["T"] = config.run.iterations;
    j["B"] = config.run.batch_size;
    j["H_used"] = reference_run.horizon_used;
    j["H_theorem"] = std::isnan(reference_run.h_theorem) ? nlohmann::json()
                                                         : nlohmann::json(reference_run.h_theorem);
    j["lambda"] = config.run.lambda;
    j["mode"] = config.run.mode == HyperMode::theory ? "theory" : "practical";
    j["seeds"] = config.seeds;
    j["aggregation"] = config.aggregation;
    j["n_seeds"] = agg.n_seeds;
    j["rows"] = agg.rows;
    j["j_star"] = agg.j_star;
    j["total_trajectories"] = agg.total_trajectories;
    j["final_suboptimality"] = {{"median", agg.final_suboptimality_median},
                                {"mean", agg.final_suboptimality_mean},
                                {"iqr", agg.final_suboptimality_iqr}};
    j["initial_suboptimality_median"] = agg.initial_suboptimality_median;
    j["params_in_force"] = {{"k", reference_run.params_in_force.k},
                            {"c", reference_run.params_in_force.c},
                            {"m", reference_run.params_in_force.m}};
    const ConstantsBundle& b = reference_run.theory_bundle;
    j["theory_bundle"] = {{"m_g", b.m_g},     {"m_h", b.m_h},         {"gamma", b.gamma},
                          {"H", b.horizon},   {"W", b.w_bound},       {"lambda", b.lambda},
                          {"k", b.k},         {"l_g", b.l_g},         {"g_bound", b.g_bound},
                          {"sigma", b.sigma}, {"l_smooth", b.l_smooth}, {"l_lambda", b.l_lambda},
                          {"c_w", b.c_w},     {"b_sq", b.b_sq},       {"c", b.c},
                          {"m", b.m},         {"eta0", b.eta0}};
    for (const auto& [column, stats] : agg.per_iteration) {
        j["per_iteration"][column] = {{"median", stats.median},
                                      {"mean", stats.mean},
                                      {"iqr", stats.iqr}};
    }
    return j.dump(2);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                                int n_threads) {
    if (n_threads < 1) throw ConfigError("n_threads must be >= 1");
    const bool positive_mu = config.run.algorithm == Algorithm::storm_s;
    const TabularMdp mdp = load_mdp_json(config.mdp_path, positive_mu);
    validate_run_config(mdp, config.run); // fail as a config error before any worker starts
    if (mdp.conditioning_warning())
        std::fprintf(stderr,
                     "warning: gamma = %.6f > 0.999; the (I - gamma P) solves are "
                     "ill-conditioned, proceeding anyway\n",
                     mdp.discount());

    fs::create_directories(out_dir);

    ExperimentResult result;
    result.runs.resize(config.seeds.size());
    result.csv_paths.resize(config.seeds.size());

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= config.seeds.size() || failed.load()) break;
            try {
                RunConfig run_config = config.run;
                run_config.seed = config.seeds[idx];
                RunRecord record = run_algorithm(mdp, run_config);
                const std::string path =
                    (fs::path(out_dir) /
                     (config.out_csv + "_seed" + std::to_string(config.seeds[idx]) + ".csv"))
                        .string();
                std::ofstream out(path, std::ios::binary);
                if (!out) throw ConfigError("cannot write CSV '" + path + "'");
                out << run_record_csv(record);
                result.runs[idx] = std::move(record);
                result.csv_paths[idx] = path;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!failed.exchange(true)) first_error = e.what();
            }
        }
    };

    const int workers = std::min<int>(n_threads, static_cast<int>(config.seeds.size()));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (failed.load()) throw NumericError("experiment failed: " + first_error);

    result.aggregate = aggregate_runs(mdp, result.runs);
    result.aggregate_path = (fs::path(out_dir) / (config.out_csv + "_aggregate.json")).string();
    std::ofstream out(result.aggregate_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write aggregate '" + result.aggregate_path + "'");
    out << aggregate_json(config, result.aggregate, result.runs.front());
    return result;
}

} // namespace stormpg
