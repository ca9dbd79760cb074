/* C interface for the micro-expert compression library.
 *
 * Conventions:
 *   - Every function that can fail returns an int status code (MCAM_OK on
 *     success). On failure, mcam_last_error() returns a thread-local message
 *     describing what went wrong; it stays valid until the next failing call
 *     on the same thread.
 *   - Structured results come back as JSON in a heap-allocated UTF-8 string
 *     written to a char** out-parameter; release it with mcam_string_free().
 *   - Models and calibration batches are opaque handles, released with their
 *     matching _free function. Handles are immutable after creation, so one
 *     handle may be shared across threads; the library parallelizes
 *     internally (see mcam_set_threads).
 */
#ifndef MCAM_H
#define MCAM_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
    MCAM_OK = 0,
    MCAM_E_INVALID = 1, /* bad argument, parse error, or failed validation */
    MCAM_E_RUNTIME = 2  /* I/O failure or internal error */
};

typedef struct mcam_model mcam_model;
typedef struct mcam_calib mcam_calib;

const char *mcam_version(void);

/* thread-local message for the last failure on this thread; never NULL */
const char *mcam_last_error(void);

/* releases any string returned through a char** out-parameter; NULL is a no-op */
void mcam_string_free(char *s);

/* worker threads for internal parallelism (>= 1); results never depend on it */
int mcam_set_threads(int n);

/* ---- model lifecycle ------------------------------------------------- */

/* config_json keys: n_layers, n_experts, n_shared, d_model, d_ff, top_k
 * (missing keys take the library defaults, then the config is validated) */
int mcam_model_generate(const char *config_json, uint64_t seed, double scale, mcam_model **out);

/* MCAM container round-trip */
int mcam_model_load(const char *path, mcam_model **out);
int mcam_model_save(const mcam_model *model, const char *path);

/* config plus per-layer expert widths, as JSON */
int mcam_model_info(const mcam_model *model, char **out_json);

void mcam_model_free(mcam_model *model);

/* ---- calibration batches --------------------------------------------- */

int mcam_calib_generate(int32_t n_tokens, int32_t d_model, uint64_t seed, double scale,
                        mcam_calib **out);
int mcam_calib_load(const char *path, mcam_calib **out);
int mcam_calib_save(const mcam_calib *calib, const char *path);
int mcam_calib_info(const mcam_calib *calib, char **out_json);
void mcam_calib_free(mcam_calib *calib);

/* ---- pipeline --------------------------------------------------------- */

/* energy ranking of one layer's micro-experts; JSON records carry
 * {flat_index, expert, neuron, energy, rank} in rank order */
int mcam_rank(const mcam_model *model, const mcam_calib *calib, int32_t layer, double alpha,
              char **out_json);

/* structured pruning at overall ratio lambda; *out_model is a new handle and
 * *out_report_json (optional, may be NULL) carries per-layer statistics */
int mcam_prune(const mcam_model *model, const mcam_calib *calib, double lambda, double alpha,
               int protect_shared, mcam_model **out_model, char **out_report_json);

/* mixed-precision quantization; variant is "q" (micro-expert slicing) or
 * "q-dagger" (columnwise up/gate slicing); ratios[3] are the high/mid/low
 * level fractions (sum 1) and bits[3] their descending bit-widths */
int mcam_quantize(const mcam_model *model, const mcam_calib *calib, const char *variant,
                  const double ratios[3], const int32_t bits[3], int32_t group_size, double alpha,
                  mcam_model **out_model, char **out_report_json);

/* ---- exact oracles ----------------------------------------------------- */

/* probability that a token's routed expert set survives pruning a fraction
 * prune_frac of experts; exact reduced fraction plus decimal value */
int mcam_oracle_plossless(int32_t n_experts, int32_t n_activated, double prune_frac,
                          char **out_json);

/* seeded dense random instance: greedy top-energy selection vs exhaustive
 * column-subset search vs the optimal rank-keep error (n_micro <= 20) */
int mcam_oracle_cssp(int32_t n_tokens, int32_t n_micro, int32_t d_model, int32_t keep,
                     uint64_t seed, char **out_json);

/* the error-bound property sweeps (bound, selection, sandwich, telemetry);
 * *out_all_pass is set to 1 when every asserted sweep held */
int mcam_oracle_bounds(uint64_t seed, int32_t trials, int *out_all_pass, char **out_json);

/* ---- reports ----------------------------------------------------------- */

/* sorted energy distribution of one layer with the top drop_top removed */
int mcam_report_energy(const mcam_model *model, const mcam_calib *calib, int32_t layer,
                       double alpha, int32_t drop_top, char **out_json);

/* per-expert global-rank quartiles (box-plot data, raw and normalized) */
int mcam_report_ranks(const mcam_model *model, const mcam_calib *calib, int32_t layer, double alpha,
                      char **out_json);

/* per-expert pruning ratios for the retain set selected at lambda */
int mcam_report_prune_ratio(const mcam_model *model, const mcam_calib *calib, int32_t layer,
                            double lambda, double alpha, int protect_shared, char **out_json);

/* per-layer output error of model_b vs model_a on the batch (L2 + cosine);
 * layers may be NULL with n_layers 0 to compare every layer */
int mcam_report_approx(const mcam_model *model_a, const mcam_model *model_b,
                       const mcam_calib *calib, const int32_t *layers, int32_t n_layers,
                       char **out_json);

/* renders a {"columns", "rows"} table (as produced by the report calls)
 * to CSV with the same column order */
int mcam_table_to_csv(const char *table_json, char **out_csv);

/* ---- property suite ----------------------------------------------------- */

/* the full verification suite (decomposition, bound sweeps, exhaustive
 * sandwich, published probability table, bit accounting); *out_all_pass is
 * set to 1 only if every check passed. Returns MCAM_OK when the suite ran,
 * regardless of the verdict. */
int mcam_verify(uint64_t seed, int32_t trials, int *out_all_pass, char **out_json);

#ifdef __cplusplus
}
#endif

#endif /* MCAM_H */
