// Inverted dropout and macro-block dropout.
//
// Macro-block dropout partitions a (time, feature) input into a small
// grid of blocks, draws one Bernoulli keep/drop decision per block,
// resizes the block decisions to the input with nearest-neighbor
// indexing, and rescales the masked input so its absolute sum matches
// the unmasked input. Because only a handful of blocks exist, the kept
// fraction varies widely between draws, which is the point: each
// realization behaves like a different effective dropout rate.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mbdrop/tensor.hpp"

namespace mbd {

enum class Mode { kTrain, kInference };

enum class Scaling {
  kDynamicSum,    // |sum(x) / sum(x .* m)|, safe division
  kFixedInverse,  // 1 / (1 - q), the classic inverted-dropout factor
};

// Number of blocks along the time and feature axes. p_time == 1 is the
// one-dimensional mode: the mask is constant along time.
struct PartitionDims {
  std::size_t p_time = 1;
  std::size_t p_feature = 4;

  bool one_dimensional() const { return p_time == 1; }
};

struct DropoutConfig {
  double q = 0.2;
  PartitionDims partition{};
  Mode mode = Mode::kTrain;
  Scaling scaling = Scaling::kDynamicSum;
  std::uint64_t seed = 0;
};

// What a forward pass actually applied: the resized 0/1 mask, the raw
// per-block draws, and the scale factor(s). `scales` holds one entry
// for rank-1/2 inputs and one per batch element for rank-3 inputs.
struct DropoutTrace {
  Tensor mask;
  Tensor block_draws;
  std::vector<double> scales;

  double scale() const;  // single-scale accessor, throws if per-batch
};

// Classic inverted dropout: per-unit Bernoulli(1-q) mask, kept units
// scaled by 1/(1-q). Inference mode returns x unchanged (mask of ones,
// scale 1). Accepts any rank.
std::pair<Tensor, DropoutTrace> baseline_dropout_forward(const Tensor& x,
                                                         double q, Rng& rng,
                                                         Mode mode);

// Draws a (p_time, p_feature) Bernoulli(1-q) block tensor and resizes
// it to (t_extent, d_extent) with nearest-neighbor indexing:
// mask[t,d] = draws[floor(t*p_time/T), floor(d*p_feature/D)].
DropoutTrace make_block_mask(Rng& rng, const PartitionDims& partition,
                             double q, std::size_t t_extent,
                             std::size_t d_extent);

// |sum(x) / sum(x .* mask)|; 0 when the denominator is exactly 0.
// The absolute value absorbs sign disagreements between the two sums,
// which occur when x is a recurrent layer's output and can be negative.
double dynamic_scale(const Tensor& x, const Tensor& mask);

// Macro-block dropout forward. x must be rank 2 (T, D) or rank 3
// (B, T, D); rank-3 inputs get an independent mask and scale per batch
// element. Inference mode returns x bitwise unchanged.
std::pair<Tensor, DropoutTrace> macro_block_dropout_forward(
    const Tensor& x, const DropoutConfig& cfg, Rng& rng);

// Re-applies a recorded mask and scale to a fresh input: out = scale *
// (x .* mask). Used to replay a forward pass with frozen randomness.
Tensor apply_dropout_trace(const Tensor& x, const DropoutTrace& trace);

// Backward for either dropout variant: scale * (upstream .* mask).
// The scale is treated as a constant (no gradient flows through the
// dynamic normalizer).
Tensor dropout_backward(const Tensor& upstream_grad,
                        const DropoutTrace& trace);

}  // namespace mbd
