// C ABI over the core library: opaque handles, status codes, and a
// thread-local error message. Exceptions never cross the boundary.

#include "mbdrop.h"

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mbdrop/dropout.hpp"
#include "mbdrop/errors.hpp"
#include "mbdrop/gradcheck.hpp"
#include "mbdrop/harness.hpp"
#include "mbdrop/stats.hpp"
#include "mbdrop/tensor.hpp"

struct mbd_rng {
  mbd::Rng impl;
};

struct mbd_tensor {
  mbd::Tensor impl;
};

struct mbd_dropout_trace {
  mbd::DropoutTrace impl;
};

namespace {

thread_local std::string g_last_error = "no error";

mbd_status fail(mbd_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

mbd_status null_arg(const char* function, const char* arg) {
  return fail(MBD_ERR_INVALID_ARGUMENT,
              std::string(function) + ": " + arg + " is NULL");
}

// runs fn inside a catch-all; maps exception types onto status codes
template <typename Fn>
mbd_status guarded(Fn&& fn) {
  try {
    fn();
    return MBD_OK;
  } catch (const std::invalid_argument& e) {
    return fail(MBD_ERR_INVALID_ARGUMENT, e.what());
  } catch (const mbd::IoError& e) {
    return fail(MBD_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(MBD_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(MBD_ERR_RUNTIME, "unknown error");
  }
}

mbd::DropoutConfig to_cpp_config(const mbd_dropout_config& config) {
  mbd::DropoutConfig cfg;
  cfg.q = config.q;
  cfg.partition.p_time = config.p_time;
  cfg.partition.p_feature = config.p_feature;
  cfg.mode = config.inference ? mbd::Mode::kInference : mbd::Mode::kTrain;
  cfg.scaling = config.fixed_inverse ? mbd::Scaling::kFixedInverse
                                     : mbd::Scaling::kDynamicSum;
  return cfg;
}

mbd::RunSpec load_run_spec(const char* config_path, int64_t seed_override,
                           bool for_compare) {
  mbd::Config cfg = mbd::Config::parse_file(config_path);
  mbd::RunSpec spec = mbd::RunSpec::from_config(cfg, for_compare);
  if (seed_override >= 0) {
    spec.train.seed = static_cast<std::uint64_t>(seed_override);
  }
  return spec;
}

}  // namespace

extern "C" {

const char* mbd_last_error(void) { return g_last_error.c_str(); }

const char* mbd_version(void) {
#ifdef MBDROP_VERSION
  return MBDROP_VERSION;
#else
  return "0.0.0";
#endif
}

/* ------------------------------------------------------------------ */

mbd_status mbd_rng_create(uint64_t seed, mbd_rng** out) {
  if (!out) return null_arg("mbd_rng_create", "out");
  return guarded([&] { *out = new mbd_rng{mbd::Rng(seed)}; });
}

mbd_status mbd_rng_create_stream(uint64_t seed, uint64_t stream_id,
                                 mbd_rng** out) {
  if (!out) return null_arg("mbd_rng_create_stream", "out");
  return guarded([&] { *out = new mbd_rng{mbd::Rng::stream(seed, stream_id)}; });
}

void mbd_rng_destroy(mbd_rng* rng) { delete rng; }

mbd_status mbd_rng_next_double(mbd_rng* rng, double* out) {
  if (!rng) return null_arg("mbd_rng_next_double", "rng");
  if (!out) return null_arg("mbd_rng_next_double", "out");
  return guarded([&] { *out = rng->impl.next_double(); });
}

/* ------------------------------------------------------------------ */

mbd_status mbd_tensor_create(const size_t* shape, size_t rank,
                             const double* data, mbd_tensor** out) {
  if (!shape) return null_arg("mbd_tensor_create", "shape");
  if (!out) return null_arg("mbd_tensor_create", "out");
  return guarded([&] {
    std::vector<std::size_t> dims(shape, shape + rank);
    mbd::Tensor tensor = mbd::Tensor::zeros(dims);
    if (data) std::copy(data, data + tensor.size(), tensor.data());
    *out = new mbd_tensor{std::move(tensor)};
  });
}

void mbd_tensor_destroy(mbd_tensor* tensor) { delete tensor; }

size_t mbd_tensor_rank(const mbd_tensor* tensor) {
  return tensor ? tensor->impl.rank() : 0;
}

mbd_status mbd_tensor_shape(const mbd_tensor* tensor, size_t* shape_out) {
  if (!tensor) return null_arg("mbd_tensor_shape", "tensor");
  if (!shape_out) return null_arg("mbd_tensor_shape", "shape_out");
  const auto& shape = tensor->impl.shape();
  std::copy(shape.begin(), shape.end(), shape_out);
  return MBD_OK;
}

size_t mbd_tensor_size(const mbd_tensor* tensor) {
  return tensor ? tensor->impl.size() : 0;
}

const double* mbd_tensor_data(const mbd_tensor* tensor) {
  return tensor ? tensor->impl.data() : nullptr;
}

/* ------------------------------------------------------------------ */

mbd_status mbd_kept_ratio_pmf(size_t n_blocks, double q, double* probs_out) {
  if (!probs_out) return null_arg("mbd_kept_ratio_pmf", "probs_out");
  return guarded([&] {
    mbd::KeptRatioPmf pmf = mbd::kept_ratio_pmf(n_blocks, q);
    std::copy(pmf.prob.begin(), pmf.prob.end(), probs_out);
  });
}

mbd_status mbd_kept_ratio_moments(size_t n_blocks, double q, double* mean_out,
                                  double* stddev_out) {
  if (!mean_out) return null_arg("mbd_kept_ratio_moments", "mean_out");
  if (!stddev_out) return null_arg("mbd_kept_ratio_moments", "stddev_out");
  return guarded([&] {
    mbd::KeptRatioMoments moments = mbd::kept_ratio_moments(n_blocks, q);
    *mean_out = moments.mean;
    *stddev_out = moments.stddev;
  });
}

mbd_status mbd_monte_carlo_kept_ratio(mbd_rng* rng, size_t n_blocks, double q,
                                      size_t trials, uint64_t* counts_out) {
  if (!rng) return null_arg("mbd_monte_carlo_kept_ratio", "rng");
  if (!counts_out) return null_arg("mbd_monte_carlo_kept_ratio", "counts_out");
  return guarded([&] {
    mbd::KeptRatioHistogram hist =
        mbd::monte_carlo_kept_ratio(rng->impl, n_blocks, q, trials);
    std::copy(hist.counts.begin(), hist.counts.end(), counts_out);
  });
}

/* ------------------------------------------------------------------ */

mbd_status mbd_baseline_dropout(const mbd_tensor* x, double q, int inference,
                                mbd_rng* rng, mbd_tensor** out,
                                mbd_dropout_trace** trace_out) {
  if (!x) return null_arg("mbd_baseline_dropout", "x");
  if (!rng) return null_arg("mbd_baseline_dropout", "rng");
  if (!out) return null_arg("mbd_baseline_dropout", "out");
  return guarded([&] {
    auto [y, trace] = mbd::baseline_dropout_forward(
        x->impl, q, rng->impl,
        inference ? mbd::Mode::kInference : mbd::Mode::kTrain);
    *out = new mbd_tensor{std::move(y)};
    if (trace_out) *trace_out = new mbd_dropout_trace{std::move(trace)};
  });
}

mbd_status mbd_macro_block_dropout(const mbd_tensor* x,
                                   const mbd_dropout_config* config,
                                   mbd_rng* rng, mbd_tensor** out,
                                   mbd_dropout_trace** trace_out) {
  if (!x) return null_arg("mbd_macro_block_dropout", "x");
  if (!config) return null_arg("mbd_macro_block_dropout", "config");
  if (!rng) return null_arg("mbd_macro_block_dropout", "rng");
  if (!out) return null_arg("mbd_macro_block_dropout", "out");
  return guarded([&] {
    auto [y, trace] =
        mbd::macro_block_dropout_forward(x->impl, to_cpp_config(*config),
                                         rng->impl);
    *out = new mbd_tensor{std::move(y)};
    if (trace_out) *trace_out = new mbd_dropout_trace{std::move(trace)};
  });
}

mbd_status mbd_dropout_backward(const mbd_tensor* upstream,
                                const mbd_dropout_trace* trace,
                                mbd_tensor** out) {
  if (!upstream) return null_arg("mbd_dropout_backward", "upstream");
  if (!trace) return null_arg("mbd_dropout_backward", "trace");
  if (!out) return null_arg("mbd_dropout_backward", "out");
  return guarded([&] {
    *out = new mbd_tensor{mbd::dropout_backward(upstream->impl, trace->impl)};
  });
}

mbd_status mbd_dropout_trace_mask(const mbd_dropout_trace* trace,
                                  mbd_tensor** mask_out) {
  if (!trace) return null_arg("mbd_dropout_trace_mask", "trace");
  if (!mask_out) return null_arg("mbd_dropout_trace_mask", "mask_out");
  return guarded([&] { *mask_out = new mbd_tensor{trace->impl.mask}; });
}

mbd_status mbd_dropout_trace_scales(const mbd_dropout_trace* trace,
                                    const double** scales_out,
                                    size_t* count_out) {
  if (!trace) return null_arg("mbd_dropout_trace_scales", "trace");
  if (!scales_out) return null_arg("mbd_dropout_trace_scales", "scales_out");
  if (!count_out) return null_arg("mbd_dropout_trace_scales", "count_out");
  *scales_out = trace->impl.scales.data();
  *count_out = trace->impl.scales.size();
  return MBD_OK;
}

void mbd_dropout_trace_destroy(mbd_dropout_trace* trace) { delete trace; }

/* ------------------------------------------------------------------ */

mbd_status mbd_run_gradient_checks(uint64_t seed, int corrupt,
                                   mbd_check_report_fn report, void* user,
                                   int* all_passed_out) {
  return guarded([&] {
    std::vector<mbd::CheckResult> results =
        mbd::run_gradient_checks(seed, corrupt != 0);
    bool all_passed = true;
    for (const mbd::CheckResult& r : results) {
      all_passed = all_passed && r.passed;
      if (report) {
        report(r.name.c_str(), r.max_rel_err, r.tolerance, r.passed ? 1 : 0,
               user);
      }
    }
    if (all_passed_out) *all_passed_out = all_passed ? 1 : 0;
  });
}

/* ------------------------------------------------------------------ */

mbd_status mbd_train_run(const char* config_path, const char* out_dir,
                         int64_t seed_override, mbd_progress_fn progress,
                         void* user) {
  if (!config_path) return null_arg("mbd_train_run", "config_path");
  if (!out_dir) return null_arg("mbd_train_run", "out_dir");
  return guarded([&] {
    mbd::RunSpec spec = load_run_spec(config_path, seed_override, false);
    mbd::ProgressFn hook;
    if (progress) {
      hook = [progress, user](const mbd::EpochRecord& r) {
        progress(r.epoch, r.train_loss, r.val_loss, user);
      };
    }
    mbd::run_training(spec, out_dir, hook);
  });
}

mbd_status mbd_compare_run(const char* config_path, const char* out_dir,
                           int64_t seed_override,
                           mbd_compare_progress_fn progress, void* user) {
  if (!config_path) return null_arg("mbd_compare_run", "config_path");
  if (!out_dir) return null_arg("mbd_compare_run", "out_dir");
  return guarded([&] {
    mbd::RunSpec spec = load_run_spec(config_path, seed_override, true);
    mbd::CompareProgressFn hook;
    if (progress) {
      hook = [progress, user](const std::string& label, std::size_t repeat,
                              const mbd::EpochRecord& r) {
        progress(label.c_str(), repeat, r.epoch, r.train_loss, r.val_loss,
                 user);
      };
    }
    mbd::run_comparison(spec, out_dir, hook);
  });
}

} /* extern "C" */
