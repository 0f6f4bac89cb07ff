#include "mbdrop/dropout.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mbd {

namespace {

void check_rate(const char* op, double q) {
  if (!(q >= 0.0 && q < 1.0)) {
    throw std::invalid_argument(std::string(op) + ": dropout rate " +
                                std::to_string(q) + " outside [0, 1)");
  }
}

// Shared masking kernel. Both dropout variants produce
// out[i] = x[i] * mask[i] * scale, so with identical rng streams the
// degenerate per-unit macro-block configuration reproduces the baseline
// bit for bit.
Tensor apply_mask(const Tensor& x, const Tensor& mask, double scale) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i] * scale;
  return out;
}

DropoutTrace identity_trace(const Tensor& x, const PartitionDims& partition) {
  DropoutTrace trace;
  trace.mask = Tensor::ones(x.shape());
  trace.block_draws = Tensor::ones({partition.p_time, partition.p_feature});
  trace.scales = {1.0};
  return trace;
}

}  // namespace

double DropoutTrace::scale() const {
  if (scales.size() != 1) {
    throw std::logic_error("DropoutTrace::scale: trace holds " +
                           std::to_string(scales.size()) +
                           " per-batch scales, not a single one");
  }
  return scales[0];
}

std::pair<Tensor, DropoutTrace> baseline_dropout_forward(const Tensor& x,
                                                         double q, Rng& rng,
                                                         Mode mode) {
  check_rate("baseline_dropout_forward", q);
  if (mode == Mode::kInference) {
    DropoutTrace trace;
    trace.mask = Tensor::ones(x.shape());
    trace.block_draws = trace.mask;
    trace.scales = {1.0};
    return {x, std::move(trace)};
  }
  DropoutTrace trace;
  trace.mask = bernoulli(rng, x.shape(), 1.0 - q);
  trace.block_draws = trace.mask;  // per-unit: the mask is the draw
  trace.scales = {1.0 / (1.0 - q)};
  Tensor out = apply_mask(x, trace.mask, trace.scales[0]);
  return {std::move(out), std::move(trace)};
}

DropoutTrace make_block_mask(Rng& rng, const PartitionDims& partition,
                             double q, std::size_t t_extent,
                             std::size_t d_extent) {
  if (partition.p_time == 0 || partition.p_feature == 0) {
    throw std::invalid_argument("make_block_mask: partition dims must be >= 1");
  }
  if (t_extent < partition.p_time || d_extent < partition.p_feature) {
    throw std::invalid_argument(
        "make_block_mask: target " + shape_to_string({t_extent, d_extent}) +
        " smaller than partition " +
        shape_to_string({partition.p_time, partition.p_feature}));
  }
  DropoutTrace trace;
  trace.block_draws =
      bernoulli(rng, {partition.p_time, partition.p_feature}, 1.0 - q);
  trace.mask = Tensor({t_extent, d_extent});
  for (std::size_t t = 0; t < t_extent; ++t) {
    const std::size_t bt = t * partition.p_time / t_extent;
    for (std::size_t d = 0; d < d_extent; ++d) {
      const std::size_t bd = d * partition.p_feature / d_extent;
      trace.mask.at(t, d) = trace.block_draws.at(bt, bd);
    }
  }
  trace.scales = {1.0};
  return trace;
}

double dynamic_scale(const Tensor& x, const Tensor& mask) {
  if (!x.same_shape(mask)) {
    throw std::invalid_argument("dynamic_scale: shape mismatch " +
                                shape_to_string(x.shape()) + " vs " +
                                shape_to_string(mask.shape()));
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += x[i];
    den += x[i] * mask[i];
  }
  if (den == 0.0) return 0.0;  // safe division
  return std::fabs(num / den);
}

std::pair<Tensor, DropoutTrace> macro_block_dropout_forward(
    const Tensor& x, const DropoutConfig& cfg, Rng& rng) {
  check_rate("macro_block_dropout_forward", cfg.q);
  if (x.rank() != 2 && x.rank() != 3) {
    throw std::invalid_argument(
        "macro_block_dropout_forward: expects rank 2 or 3, got shape " +
        shape_to_string(x.shape()));
  }
  if (cfg.mode == Mode::kInference) {
    return {x, identity_trace(x, cfg.partition)};
  }

  const double fixed = 1.0 / (1.0 - cfg.q);

  if (x.rank() == 2) {
    const std::size_t t_extent = x.extent(0), d_extent = x.extent(1);
    DropoutTrace trace =
        make_block_mask(rng, cfg.partition, cfg.q, t_extent, d_extent);
    const double s = cfg.scaling == Scaling::kDynamicSum
                         ? dynamic_scale(x, trace.mask)
                         : fixed;
    trace.scales = {s};
    Tensor out = apply_mask(x, trace.mask, s);
    return {std::move(out), std::move(trace)};
  }

  // rank 3: independent mask and scale per batch element
  const std::size_t batch = x.extent(0);
  const std::size_t t_extent = x.extent(1), d_extent = x.extent(2);
  DropoutTrace trace;
  trace.mask = Tensor({batch, t_extent, d_extent});
  trace.block_draws =
      Tensor({batch, cfg.partition.p_time, cfg.partition.p_feature});
  trace.scales.resize(batch);
  Tensor out = x;
  for (std::size_t b = 0; b < batch; ++b) {
    DropoutTrace one =
        make_block_mask(rng, cfg.partition, cfg.q, t_extent, d_extent);
    double num = 0.0, den = 0.0;
    const std::size_t slab = t_extent * d_extent;
    const double* px = x.data() + b * slab;
    const double* pm = one.mask.data();
    for (std::size_t i = 0; i < slab; ++i) {
      num += px[i];
      den += px[i] * pm[i];
    }
    double s;
    if (cfg.scaling == Scaling::kDynamicSum) {
      s = den == 0.0 ? 0.0 : std::fabs(num / den);
    } else {
      s = fixed;
    }
    trace.scales[b] = s;
    double* po = out.data() + b * slab;
    for (std::size_t i = 0; i < slab; ++i) po[i] = px[i] * pm[i] * s;
    std::copy(one.mask.data(), one.mask.data() + slab,
              trace.mask.data() + b * slab);
    std::copy(one.block_draws.data(),
              one.block_draws.data() + one.block_draws.size(),
              trace.block_draws.data() + b * one.block_draws.size());
  }
  return {std::move(out), std::move(trace)};
}

Tensor apply_dropout_trace(const Tensor& x, const DropoutTrace& trace) {
  if (!x.same_shape(trace.mask)) {
    throw std::invalid_argument("apply_dropout_trace: shape mismatch " +
                                shape_to_string(x.shape()) + " vs mask " +
                                shape_to_string(trace.mask.shape()));
  }
  Tensor out = x;
  if (trace.scales.size() == 1) {
    const double s = trace.scales[0];
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] *= trace.mask[i] * s;
    }
    return out;
  }
  if (out.rank() != 3 || trace.scales.size() != out.extent(0)) {
    throw std::invalid_argument(
        "apply_dropout_trace: trace holds " +
        std::to_string(trace.scales.size()) +
        " scales, incompatible with input shape " +
        shape_to_string(out.shape()));
  }
  const std::size_t slab = out.extent(1) * out.extent(2);
  for (std::size_t b = 0; b < trace.scales.size(); ++b) {
    const double s = trace.scales[b];
    double* po = out.data() + b * slab;
    const double* pm = trace.mask.data() + b * slab;
    for (std::size_t i = 0; i < slab; ++i) po[i] *= pm[i] * s;
  }
  return out;
}

Tensor dropout_backward(const Tensor& upstream_grad,
                        const DropoutTrace& trace) {
  // The dropout map is linear in x once mask and scale are fixed, so the
  // backward pass is the same masked scaling applied to the upstream
  // gradient.
  return apply_dropout_trace(upstream_grad, trace);
}

}  // namespace mbd
