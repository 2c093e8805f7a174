#pragma once

#include "stormpg/optimizer.hpp"

#include <map>
#include <span>
#include <string>
#include <vector>

namespace stormpg {

/// Multi-seed experiment description loaded from JSON. mdp_path is resolved
/// relative to the config file's directory.
struct ExperimentConfig {
    std::string mdp_path;
    RunConfig run; // per-seed template; run.seed is replaced by each entry of seeds
    std::vector<std::uint64_t> seeds;
    std::string aggregation = "median"; // headline statistic: median | mean
    std::string out_csv = "run";        // artifact base name
};

ExperimentConfig parse_experiment_config(const std::string& json_text, const std::string& base_dir);
ExperimentConfig load_experiment_config(const std::string& path);

/// Per-iteration statistics of one CSV column across seeds.
struct ColumnStats {
    std::vector<double> median;
    std::vector<double> mean;
    std::vector<double> iqr;
};

struct AggregateSummary {
    int n_seeds = 0;
    int rows = 0; // min run length across seeds
    double j_star = 0.0;
    std::map<std::string, ColumnStats> per_iteration;
    // Across seeds, of J* - J_exact at the final logged iterate.
    double final_suboptimality_median = 0.0;
    double final_suboptimality_mean = 0.0;
    double final_suboptimality_iqr = 0.0;
    double initial_suboptimality_median = 0.0;
    long total_trajectories = 0;
};

struct ExperimentResult {
    std::vector<RunRecord> runs; // seed order
    AggregateSummary aggregate;
    std::vector<std::string> csv_paths;
    std::string aggregate_path;
};

/// Runs every seed (workers pull seeds from a shared queue; n_threads worker
/// slots), writes one CSV per seed plus an aggregate JSON into out_dir.
/// Artifacts are byte-identical for identical (config, seeds) regardless of
/// the worker count.
ExperimentResult run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                                int n_threads);

/// CSV serialization of a run: pinned column order, shortest round-trip floats.
std::string run_record_csv(const RunRecord& record);

AggregateSummary aggregate_runs(const TabularMdp& mdp, std::span<const RunRecord> runs);

std::string aggregate_json(const ExperimentConfig& config, const AggregateSummary& aggregate,
                           const RunRecord& reference_run);

/// Order-statistic quantile with linear interpolation between ranks.
double quantile(std::vector<double> values, double p);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

} // namespace stormpg
