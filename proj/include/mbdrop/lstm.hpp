// Uni-directional LSTM cell and multi-layer stack with dropout hooks on
// layer inputs. Dropout is applied once per sequence to the full
// (time, feature) input of every layer at or above
// `apply_dropout_from_layer`; the first layer's input is exempt by
// default. Forward passes cache everything the exact BPTT backward
// needs.

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mbdrop/dropout.hpp"
#include "mbdrop/tensor.hpp"

namespace mbd {

// One LSTM layer. Gate blocks are fused along the column axis in the
// order [input, forget, cell-candidate, output]:
//   w_in  : (input_dim, 4*hidden_dim)
//   w_rec : (hidden_dim, 4*hidden_dim)
//   bias  : (4*hidden_dim)
struct LstmParams {
  Tensor w_in;
  Tensor w_rec;
  Tensor bias;

  std::size_t input_dim() const { return w_in.extent(0); }
  std::size_t hidden_dim() const { return w_rec.extent(0); }

  // Uniform init in +-1/sqrt(hidden_dim), forget-gate bias +1.
  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim,
                         Rng& rng);
  static LstmParams zeros_like(const LstmParams& p);
};

// Post-activation gate values and cell state kept for the backward pass.
struct LstmCellCache {
  Tensor x;       // (B, D_in)
  Tensor h_prev;  // (B, H)
  Tensor c_prev;  // (B, H)
  Tensor gates;   // (B, 4H), activated, fused [i f g o]
  Tensor c;       // (B, H)
  Tensor tanh_c;  // (B, H)
};

struct LstmStepResult {
  Tensor h;
  Tensor c;
  LstmCellCache cache;
};

LstmStepResult lstm_cell_forward(const Tensor& x_t, const Tensor& h_prev,
                                 const Tensor& c_prev,
                                 const LstmParams& params);

struct LstmCellGrads {
  Tensor grad_x;
  Tensor grad_h_prev;
  Tensor grad_c_prev;
};

// Exact gradients of the cell equations. Parameter gradients are
// accumulated into `param_grads`.
LstmCellGrads lstm_cell_backward(const Tensor& grad_h, const Tensor& grad_c,
                                 const LstmCellCache& cache,
                                 const LstmParams& params,
                                 LstmParams& param_grads);

enum class DropoutVariant { kNone, kBaseline, kMacroBlock };

struct StackConfig {
  std::vector<std::size_t> layer_sizes;  // hidden dim per layer
  DropoutVariant variant = DropoutVariant::kNone;
  DropoutConfig dropout{};
  std::size_t apply_dropout_from_layer = 1;  // first layer input exempt
};

struct StackCache {
  struct Layer {
    Tensor input_seq;  // layer input after dropout, (B, T, D_in)
    bool dropout_applied = false;
    DropoutTrace trace;
    std::vector<LstmCellCache> steps;  // T entries
    Tensor h_seq;                      // (B, T, H)
  };
  std::vector<Layer> layers;
};

// Runs the stack on x (B, T, D). Returns the top layer's hidden
// sequence (B, T, H_top). `mode` overrides cfg.dropout.mode; no rng is
// consumed in inference mode or by layers below the dropout threshold.
Tensor stack_forward(const Tensor& x, const std::vector<LstmParams>& params,
                     const StackConfig& cfg, Rng& rng, Mode mode,
                     StackCache* cache = nullptr);

// Same forward but applying the given per-layer traces instead of
// drawing fresh masks; traces[l] feeds layer l and entries below
// apply_dropout_from_layer are ignored. Used for gradient checks where
// masks and scales must stay frozen across evaluations.
Tensor stack_forward_frozen(const Tensor& x,
                            const std::vector<LstmParams>& params,
                            const StackConfig& cfg,
                            const std::vector<DropoutTrace>& traces,
                            StackCache* cache = nullptr);

struct StackGrads {
  Tensor grad_input;                    // (B, T, D)
  std::vector<LstmParams> param_grads;  // per layer
};

// Full BPTT given the gradient of a loss w.r.t. the top hidden
// sequence. Frozen masks and scales from the cache are reused; the
// dynamic scale is a constant to the gradient.
StackGrads stack_backward(const Tensor& grad_outputs,
                          const std::vector<LstmParams>& params,
                          const StackConfig& cfg, const StackCache& cache);

}  // namespace mbd
