/*
 * mbdrop — macro-block dropout for recurrent networks.
 *
 * C interface to the shared library. Every function that can fail
 * returns an mbd_status; on failure a human-readable message is
 * available from mbd_last_error() (thread-local) and output
 * parameters are left untouched. Objects returned through `**out`
 * parameters are owned by the caller and must be released with the
 * matching *_destroy function.
 */

#ifndef MBDROP_H
#define MBDROP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mbd_status {
  MBD_OK = 0,
  MBD_ERR_INVALID_ARGUMENT = 1, /* bad shape, rate, or parameter */
  MBD_ERR_RUNTIME = 2,          /* internal failure (e.g. divergence) */
  MBD_ERR_IO = 3                /* file could not be read or written */
} mbd_status;

/* Message for the most recent failure on this thread; never NULL. */
const char* mbd_last_error(void);

/* Library version, e.g. "0.1.0". */
const char* mbd_version(void);

/* ------------------------------------------------------------------ */
/* Random number generator (deterministic, seedable, stream-splittable) */

typedef struct mbd_rng mbd_rng;

mbd_status mbd_rng_create(uint64_t seed, mbd_rng** out);
/* Decorrelated substream `stream_id` of `seed`. */
mbd_status mbd_rng_create_stream(uint64_t seed, uint64_t stream_id,
                                 mbd_rng** out);
void mbd_rng_destroy(mbd_rng* rng);
/* Uniform double in [0, 1). */
mbd_status mbd_rng_next_double(mbd_rng* rng, double* out);

/* ------------------------------------------------------------------ */
/* Tensors: dense row-major arrays of doubles, rank 1 to 3 */

typedef struct mbd_tensor mbd_tensor;

/* `data` may be NULL for a zero-filled tensor; otherwise it must hold
 * the product of the extents. */
mbd_status mbd_tensor_create(const size_t* shape, size_t rank,
                             const double* data, mbd_tensor** out);
void mbd_tensor_destroy(mbd_tensor* tensor);
size_t mbd_tensor_rank(const mbd_tensor* tensor);
/* Writes `rank` extents into shape_out. */
mbd_status mbd_tensor_shape(const mbd_tensor* tensor, size_t* shape_out);
size_t mbd_tensor_size(const mbd_tensor* tensor);
/* Borrowed pointer, valid until the tensor is destroyed. */
const double* mbd_tensor_data(const mbd_tensor* tensor);

/* ------------------------------------------------------------------ */
/* Kept-ratio statistics: with N blocks each dropped independently with
 * probability q, the kept ratio is Binomial(N, 1-q) / N. */

/* Writes P(k blocks kept) for k = 0..n_blocks (n_blocks+1 entries). */
mbd_status mbd_kept_ratio_pmf(size_t n_blocks, double q, double* probs_out);
mbd_status mbd_kept_ratio_moments(size_t n_blocks, double q, double* mean_out,
                                  double* stddev_out);
/* Simulates `trials` mask draws; writes how often k of n_blocks were
 * kept for k = 0..n_blocks (n_blocks+1 entries). */
mbd_status mbd_monte_carlo_kept_ratio(mbd_rng* rng, size_t n_blocks, double q,
                                      size_t trials, uint64_t* counts_out);

/* ------------------------------------------------------------------ */
/* Dropout */

typedef struct mbd_dropout_trace mbd_dropout_trace;

typedef struct mbd_dropout_config {
  double q;              /* drop probability, in [0, 1) */
  size_t p_time;         /* blocks along the time axis (1 = row mode) */
  size_t p_feature;      /* blocks along the feature axis */
  int inference;         /* nonzero: identity pass-through, no draws */
  int fixed_inverse;     /* nonzero: scale by 1/(1-q) instead of the
                            dynamic sum-preserving factor */
} mbd_dropout_config;

/* Classic inverted dropout: per-unit Bernoulli(1-q) mask, kept units
 * scaled by 1/(1-q). trace_out may be NULL. */
mbd_status mbd_baseline_dropout(const mbd_tensor* x, double q, int inference,
                                mbd_rng* rng, mbd_tensor** out,
                                mbd_dropout_trace** trace_out);

/* Macro-block dropout: draws a p_time x p_feature block mask, resizes
 * it to the input with nearest-neighbor indexing, and rescales so the
 * masked sum matches the input sum (per batch element for rank-3
 * input). trace_out may be NULL. */
mbd_status mbd_macro_block_dropout(const mbd_tensor* x,
                                   const mbd_dropout_config* config,
                                   mbd_rng* rng, mbd_tensor** out,
                                   mbd_dropout_trace** trace_out);

/* Gradient of the dropout output w.r.t. its input: the recorded mask
 * and scale applied to the upstream gradient (the scale is treated as
 * a constant). */
mbd_status mbd_dropout_backward(const mbd_tensor* upstream,
                                const mbd_dropout_trace* trace,
                                mbd_tensor** out);

/* Copy of the resized 0/1 mask the forward pass applied. */
mbd_status mbd_dropout_trace_mask(const mbd_dropout_trace* trace,
                                  mbd_tensor** mask_out);
/* Borrowed view of the scale factors: one entry for rank-1/2 input,
 * one per batch element for rank-3 input. */
mbd_status mbd_dropout_trace_scales(const mbd_dropout_trace* trace,
                                    const double** scales_out,
                                    size_t* count_out);
void mbd_dropout_trace_destroy(mbd_dropout_trace* trace);

/* ------------------------------------------------------------------ */
/* Gradient checks (finite-difference verification of the backward
 * passes). `report` is called once per check; nonzero `corrupt`
 * injects an error so the stack check must fail (negative control). */

typedef void (*mbd_check_report_fn)(const char* name, double max_rel_err,
                                    double tolerance, int passed, void* user);

mbd_status mbd_run_gradient_checks(uint64_t seed, int corrupt,
                                   mbd_check_report_fn report, void* user,
                                   int* all_passed_out);

/* ------------------------------------------------------------------ */
/* Training runs. The config file (flat `key = value` text or a flat
 * JSON object) selects the task, model, optimizer, and dropout
 * variant; results are written into out_dir. seed_override >= 0
 * replaces the config seed. Progress callbacks may be NULL. */

typedef void (*mbd_progress_fn)(size_t epoch, double train_loss,
                                double val_loss, void* user);
typedef void (*mbd_compare_progress_fn)(const char* label, size_t repeat,
                                        size_t epoch, double train_loss,
                                        double val_loss, void* user);

/* Single training run; writes metrics.csv, config.json, and
 * checkpoint.json. */
mbd_status mbd_train_run(const char* config_path, const char* out_dir,
                         int64_t seed_override, mbd_progress_fn progress,
                         void* user);

/* Multi-seed variant comparison; writes comparison.csv and
 * config.json. */
mbd_status mbd_compare_run(const char* config_path, const char* out_dir,
                           int64_t seed_override,
                           mbd_compare_progress_fn progress, void* user);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* MBDROP_H */
