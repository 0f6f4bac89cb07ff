#include "mbdrop/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mbdrop/dropout.hpp"
#include "mbdrop/lstm.hpp"

namespace mbd {

namespace {

// Relative error with a unit floor: finite differences resolve a
// derivative to roughly 1e-10 in absolute terms, so entries far below
// 1 are compared absolutely instead of blowing up the ratio.
double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

Tensor random_tensor(const std::vector<std::size_t>& shape, Rng& rng) {
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

double dot_all(const Tensor& a, const Tensor& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

// max relative error between an analytic gradient and central
// differences of `loss` over every entry of `arg`
template <typename LossFn>
double fd_max_err(Tensor& arg, const Tensor& analytic, double step,
                  const LossFn& loss) {
  double worst = 0.0;
  for (std::size_t i = 0; i < arg.size(); ++i) {
    const double saved = arg[i];
    arg[i] = saved + step;
    const double up = loss();
    arg[i] = saved - step;
    const double down = loss();
    arg[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    worst = std::max(worst, rel_err(analytic[i], numeric));
  }
  return worst;
}

// The dropout map with a frozen mask and scale is linear, so its
// gradient is the same masked scaling applied to the upstream tensor.
CheckResult check_dropout_map(std::uint64_t seed) {
  Rng rng(seed);
  Tensor x = random_tensor({5, 8}, rng);
  DropoutConfig cfg;
  cfg.q = 0.4;
  cfg.partition = {1, 4};
  cfg.mode = Mode::kTrain;
  auto [out, trace] = macro_block_dropout_forward(x, cfg, rng);
  Tensor upstream = random_tensor({5, 8}, rng);

  Tensor analytic = dropout_backward(upstream, trace);
  const auto loss = [&]() {
    return dot_all(upstream, apply_dropout_trace(x, trace));
  };
  CheckResult result;
  result.name = "dropout_map";
  result.tolerance = 1e-6;
  result.max_rel_err = fd_max_err(x, analytic, 1e-6, loss);
  result.passed = result.max_rel_err < result.tolerance;
  return result;
}

CheckResult check_lstm_cell(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t batch = 2, in_dim = 3, hidden = 4;
  Tensor x = random_tensor({batch, in_dim}, rng);
  Tensor h_prev = random_tensor({batch, hidden}, rng);
  Tensor c_prev = random_tensor({batch, hidden}, rng);
  LstmParams params = LstmParams::init(in_dim, hidden, rng);
  Tensor u_h = random_tensor({batch, hidden}, rng);
  Tensor u_c = random_tensor({batch, hidden}, rng);

  const auto loss = [&]() {
    LstmStepResult step = lstm_cell_forward(x, h_prev, c_prev, params);
    return dot_all(u_h, step.h) + dot_all(u_c, step.c);
  };

  LstmStepResult step = lstm_cell_forward(x, h_prev, c_prev, params);
  LstmParams grads = LstmParams::zeros_like(params);
  LstmCellGrads in_grads =
      lstm_cell_backward(u_h, u_c, step.cache, params, grads);

  CheckResult result;
  result.name = "lstm_cell";
  result.tolerance = 1e-6;
  double worst = 0.0;
  worst = std::max(worst, fd_max_err(x, in_grads.grad_x, 1e-5, loss));
  worst = std::max(worst,
                   fd_max_err(h_prev, in_grads.grad_h_prev, 1e-5, loss));
  worst = std::max(worst,
                   fd_max_err(c_prev, in_grads.grad_c_prev, 1e-5, loss));
  worst = std::max(worst, fd_max_err(params.w_in, grads.w_in, 1e-5, loss));
  worst = std::max(worst, fd_max_err(params.w_rec, grads.w_rec, 1e-5, loss));
  worst = std::max(worst, fd_max_err(params.bias, grads.bias, 1e-5, loss));
  result.max_rel_err = worst;
  result.passed = result.max_rel_err < result.tolerance;
  return result;
}

// Full backpropagation through time for a two-layer stack with
// macro-block dropout between the layers. The mask realized on the
// live forward pass is frozen and replayed for every finite-difference
// evaluation, matching the stop-gradient treatment of the scale.
CheckResult check_stack(std::uint64_t seed, bool corrupt) {
  Rng rng(seed);
  const std::size_t batch = 2, t_len = 5, in_dim = 3;
  StackConfig cfg;
  cfg.layer_sizes = {4, 3};
  cfg.variant = DropoutVariant::kMacroBlock;
  cfg.dropout.q = 0.3;
  cfg.dropout.partition = {1, 2};

  Tensor x = random_tensor({batch, t_len, in_dim}, rng);
  std::vector<LstmParams> params;
  std::size_t prev = in_dim;
  for (std::size_t hidden : cfg.layer_sizes) {
    params.push_back(LstmParams::init(prev, hidden, rng));
    prev = hidden;
  }

  Rng mask_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  StackCache cache;
  stack_forward(x, params, cfg, mask_rng, Mode::kTrain, &cache);
  std::vector<DropoutTrace> traces;
  for (const auto& layer : cache.layers) traces.push_back(layer.trace);

  Tensor upstream =
      random_tensor({batch, t_len, cfg.layer_sizes.back()}, rng);
  const auto loss = [&]() {
    return dot_all(upstream,
                   stack_forward_frozen(x, params, cfg, traces));
  };

  StackCache frozen_cache;
  stack_forward_frozen(x, params, cfg, traces, &frozen_cache);
  StackGrads grads = stack_backward(upstream, params, cfg, frozen_cache);
  if (corrupt) grads.grad_input[0] += 1e-3;

  CheckResult result;
  result.name = "stack_bptt";
  result.tolerance = 1e-5;
  double worst = fd_max_err(x, grads.grad_input, 1e-5, loss);
  for (std::size_t l = 0; l < params.size(); ++l) {
    worst = std::max(worst,
                     fd_max_err(params[l].w_in, grads.param_grads[l].w_in,
                                1e-5, loss));
    worst = std::max(worst,
                     fd_max_err(params[l].w_rec, grads.param_grads[l].w_rec,
                                1e-5, loss));
    worst = std::max(worst,
                     fd_max_err(params[l].bias, grads.param_grads[l].bias,
                                1e-5, loss));
  }
  result.max_rel_err = worst;
  result.passed = result.max_rel_err < result.tolerance;
  return result;
}

}  // namespace

std::vector<CheckResult> run_gradient_checks(std::uint64_t seed,
                                             bool corrupt) {
  std::vector<CheckResult> results;
  results.push_back(check_dropout_map(seed));
  results.push_back(check_lstm_cell(seed + 1));
  results.push_back(check_stack(seed + 2, corrupt));
  return results;
}

}  // namespace mbd
