/*
 * stormpg C API: momentum-based stochastic policy gradient on tabular MDPs
 * with exact dynamic-programming verification oracles.
 *
 * Every entry point returns a spg_status; on failure a human-readable message
 * is copied into the caller's error buffer (always NUL-terminated, possibly
 * truncated). Objects are returned as opaque handles that must be released
 * with the matching *_free function. Strings returned through const char*
 * remain owned by their handle and are valid until it is freed.
 */
#ifndef STORMPG_H
#define STORMPG_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spg_status {
    SPG_OK = 0,
    SPG_ERR_CHECK_FAILED = 1, /* a verification suite reported a failing check */
    SPG_ERR_CONFIG = 2,       /* malformed config / bad parameter / missing file */
    SPG_ERR_VALIDATION = 3,   /* an input object violates an invariant */
    SPG_ERR_NUMERIC = 4,      /* divergence guard or singular system */
    SPG_ERR_INTERNAL = 5
} spg_status;

typedef struct spg_mdp spg_mdp;
typedef struct spg_experiment spg_experiment;
typedef struct spg_verify_report spg_verify_report;

const char* spg_version(void);

/* --- MDP loading --------------------------------------------------------- */

/* Loads and validates the JSON MDP format. require_positive_mu enforces the
 * strictly positive exploration measure soft-max runs need. */
spg_status spg_mdp_load(const char* path, int require_positive_mu, spg_mdp** out, char* err,
                        size_t err_len);
void spg_mdp_free(spg_mdp* mdp);
int spg_mdp_n_states(const spg_mdp* mdp);
int spg_mdp_n_actions(const spg_mdp* mdp);
double spg_mdp_discount(const spg_mdp* mdp);

/* --- Experiments --------------------------------------------------------- */

/* Runs the configured algorithm for every seed, writing per-seed CSVs and an
 * aggregate JSON into out_dir. n_threads sets the number of seed worker
 * slots; artifacts are byte-identical for any thread count. */
spg_status spg_run_experiment(const char* config_path, const char* out_dir, int n_threads,
                              spg_experiment** out, char* err, size_t err_len);
void spg_experiment_free(spg_experiment* experiment);
int spg_experiment_num_seeds(const spg_experiment* experiment);
/* Aggregate summary (same content as the aggregate JSON artifact). */
const char* spg_experiment_summary_json(const spg_experiment* experiment);

/* --- Verification suites -------------------------------------------------- */

/* suite: estimators|weights|gradients|bounds|constants|all.
 * scale: small|full. mdp_path may be NULL.
 * Returns SPG_OK when the suite ran, even if checks failed; query
 * spg_verify_all_hold for the outcome. A malformed custom MDP becomes a
 * failing check rather than an error. */
spg_status spg_verify(const char* suite, const char* scale, const char* mdp_path,
                      spg_verify_report** out, char* err, size_t err_len);
void spg_verify_report_free(spg_verify_report* report);
int spg_verify_all_hold(const spg_verify_report* report);
const char* spg_verify_report_json(const spg_verify_report* report);

/* --- Constants ------------------------------------------------------------ */

/* Derives the full analysis-constants bundle and writes it as JSON (an array
 * of {name, formula, value}) into the caller's buffer. */
spg_status spg_derive_constants(double m_g, double m_h, double gamma, int horizon, double w,
                                double lambda, double k, char* json_out, size_t json_out_len,
                                char* err, size_t err_len);

#ifdef __cplusplus
}
#endif

#endif /* STORMPG_H */
