#include "stormpg.h"

#include "stormpg/experiment.hpp"
#include "stormpg/verify.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <memory>
#include <string>

struct spg_mdp {
    stormpg::TabularMdp mdp;
};

struct spg_experiment {
    stormpg::ExperimentResult result;
    std::string summary_json;
};

struct spg_verify_report {
    stormpg::VerifyReport report;
    std::string json;
};

namespace {

void copy_error(const char* what, char* err, size_t err_len) {
    if (!err || err_len == 0) return;
    std::strncpy(err, what, err_len - 1);
    err[err_len - 1] = '\0';
}

spg_status status_of(const std::exception& e) {
    if (dynamic_cast<const stormpg::ConfigError*>(&e)) return SPG_ERR_CONFIG;
    if (dynamic_cast<const stormpg::ValidationError*>(&e)) return SPG_ERR_VALIDATION;
    if (dynamic_cast<const stormpg::NumericError*>(&e)) return SPG_ERR_NUMERIC;
    return SPG_ERR_INTERNAL;
}

template <typename Fn>
spg_status guarded(Fn&& fn, char* err, size_t err_len) {
    try {
        return fn();
    } catch (const std::exception& e) {
        copy_error(e.what(), err, err_len);
        return status_of(e);
    } catch (...) {
        copy_error("unknown error", err, err_len);
        return SPG_ERR_INTERNAL;
    }
}

} // namespace

extern "C" {

const char* spg_version(void) { return "stormpg 1.0.0"; }

spg_status spg_mdp_load(const char* path, int require_positive_mu, spg_mdp** out, char* err,
                        size_t err_len) {
    if (!path || !out) {
        copy_error("path and out must be non-null", err, err_len);
        return SPG_ERR_CONFIG;
    }
    return guarded(
        [&]() -> spg_status {
            auto handle = std::make_unique<spg_mdp>(
                spg_mdp{stormpg::load_mdp_json(path, require_positive_mu != 0)});
            *out = handle.release();
            return SPG_OK;
        },
        err, err_len);
}

void spg_mdp_free(spg_mdp* mdp) { delete mdp; }

int spg_mdp_n_states(const spg_mdp* mdp) { return mdp ? mdp->mdp.n_states() : 0; }

int spg_mdp_n_actions(const spg_mdp* mdp) { return mdp ? mdp->mdp.n_actions() : 0; }

double spg_mdp_discount(const spg_mdp* mdp) { return mdp ? mdp->mdp.discount() : 0.0; }

spg_status spg_run_experiment(const char* config_path, const char* out_dir, int n_threads,
                              spg_experiment** out, char* err, size_t err_len) {
    if (!config_path || !out_dir || !out) {
        copy_error("config_path, out_dir and out must be non-null", err, err_len);
        return SPG_ERR_CONFIG;
    }
    return guarded(
        [&]() -> spg_status {
            const stormpg::ExperimentConfig config = stormpg::load_experiment_config(config_path);
            auto handle = std::make_unique<spg_experiment>();
            handle->result = stormpg::run_experiment(config, out_dir, n_threads);
            handle->summary_json = stormpg::aggregate_json(config, handle->result.aggregate,
                                                           handle->result.runs.front());
            *out = handle.release();
            return SPG_OK;
        },
        err, err_len);
}

void spg_experiment_free(spg_experiment* experiment) { delete experiment; }

int spg_experiment_num_seeds(const spg_experiment* experiment) {
    return experiment ? static_cast<int>(experiment->result.runs.size()) : 0;
}

const char* spg_experiment_summary_json(const spg_experiment* experiment) {
    return experiment ? experiment->summary_json.c_str() : "";
}

spg_status spg_verify(const char* suite, const char* scale, const char* mdp_path,
                      spg_verify_report** out, char* err, size_t err_len) {
    if (!suite || !scale || !out) {
        copy_error("suite, scale and out must be non-null", err, err_len);
        return SPG_ERR_CONFIG;
    }
    return guarded(
        [&]() -> spg_status {
            auto handle = std::make_unique<spg_verify_report>();
            std::optional<std::string> path;
            if (mdp_path) path = mdp_path;
            handle->report = stormpg::run_verify_suite(suite, scale, path);
            handle->json = stormpg::verify_report_json(handle->report);
            *out = handle.release();
            return SPG_OK;
        },
        err, err_len);
}

void spg_verify_report_free(spg_verify_report* report) { delete report; }

int spg_verify_all_hold(const spg_verify_report* report) {
    return report && report->report.all_hold ? 1 : 0;
}

const char* spg_verify_report_json(const spg_verify_report* report) {
    return report ? report->json.c_str() : "";
}

spg_status spg_derive_constants(double m_g, double m_h, double gamma, int horizon, double w,
                                double lambda, double k, char* json_out, size_t json_out_len,
                                char* err, size_t err_len) {
    if (!json_out || json_out_len == 0) {
        copy_error("json_out must be non-null", err, err_len);
        return SPG_ERR_CONFIG;
    }
    return guarded(
        [&]() -> spg_status {
            const stormpg::ConstantsBundle b =
                stormpg::derive_constants(m_g, m_h, gamma, horizon, w, lambda, k);
            nlohmann::json j = nlohmann::json::array();
            auto add = [&](const char* name, const char* formula, double value) {
                j.push_back({{"name", name}, {"formula", formula}, {"value", value}});
            };
            add("M_g", "score norm bound (input)", b.m_g);
            add("M_h", "score Hessian bound (input)", b.m_h);
            add("gamma", "discount (input)", b.gamma);
            add("H", "horizon (input)", static_cast<double>(b.horizon));
            add("W", "weight variance bound (input)", b.w_bound);
            add("lambda", "barrier coefficient (input)", b.lambda);
            add("k", "step scale (input)", b.k);
            add("L_g", "M_h/(1-gamma)^2", b.l_g);
            add("G", "M_g/(1-gamma)^2", b.g_bound);
            add("sigma", "G", b.sigma);
            add("L", "2 M_g^2/(1-gamma)^3 + M_h/(1-gamma)^2", b.l_smooth);
            add("L_lambda", "L + lambda", b.l_lambda);
            add("C_w", "sqrt(H (2 H M_g^2 + M_h) (W+1))", b.c_w);
            add("b^2", "L_g^2 + G^2 C_w^2", b.b_sq);
            add("c", "1/(3 k^3 L_lambda) + 96 b^2", b.c);
            add("m", "max{2, (2 L_lambda k)^3, (c k/(2 L_lambda))^3}", b.m);
            add("eta_0", "k/m^(1/3)", b.eta0);
            const std::string text = j.dump(2);
            if (text.size() + 1 > json_out_len) {
                copy_error("json_out buffer too small", err, err_len);
                return SPG_ERR_CONFIG;
            }
            std::memcpy(json_out, text.c_str(), text.size() + 1);
            return SPG_OK;
        },
        err, err_len);
}

} // extern "C"
