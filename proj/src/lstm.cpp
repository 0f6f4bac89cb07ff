#include "mbdrop/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mbd {

namespace {

Tensor time_slice(const Tensor& seq, std::size_t t) {
  const std::size_t batch = seq.extent(0), dim = seq.extent(2);
  Tensor out({batch, dim});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* src = seq.data() + (b * seq.extent(1) + t) * dim;
    double* dst = out.data() + b * dim;
    std::copy(src, src + dim, dst);
  }
  return out;
}

void set_time_slice(Tensor& seq, std::size_t t, const Tensor& slice) {
  const std::size_t batch = seq.extent(0), dim = seq.extent(2);
  for (std::size_t b = 0; b < batch; ++b) {
    const double* src = slice.data() + b * dim;
    double* dst = seq.data() + (b * seq.extent(1) + t) * dim;
    std::copy(src, src + dim, dst);
  }
}

void accumulate(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void check_cell_shapes(const Tensor& x_t, const Tensor& h_prev,
                       const Tensor& c_prev, const LstmParams& params) {
  if (x_t.rank() != 2 || h_prev.rank() != 2 || c_prev.rank() != 2) {
    throw std::invalid_argument("lstm_cell: expects rank-2 (batch, dim) inputs");
  }
  const std::size_t batch = x_t.extent(0);
  const std::size_t hidden = params.hidden_dim();
  if (x_t.extent(1) != params.input_dim()) {
    throw std::invalid_argument("lstm_cell: input shape " +
                                shape_to_string(x_t.shape()) +
                                " does not match input_dim " +
                                std::to_string(params.input_dim()));
  }
  if (h_prev.extent(0) != batch || h_prev.extent(1) != hidden ||
      c_prev.extent(0) != batch || c_prev.extent(1) != hidden) {
    throw std::invalid_argument("lstm_cell: state shapes " +
                                shape_to_string(h_prev.shape()) + ", " +
                                shape_to_string(c_prev.shape()) +
                                " inconsistent with batch " +
                                std::to_string(batch) + ", hidden " +
                                std::to_string(hidden));
  }
}

}  // namespace

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim,
                            Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  LstmParams p;
  p.w_in = Tensor({input_dim, 4 * hidden_dim});
  p.w_rec = Tensor({hidden_dim, 4 * hidden_dim});
  p.bias = Tensor({4 * hidden_dim});
  for (std::size_t i = 0; i < p.w_in.size(); ++i)
    p.w_in[i] = rng.uniform(-bound, bound);
  for (std::size_t i = 0; i < p.w_rec.size(); ++i)
    p.w_rec[i] = rng.uniform(-bound, bound);
  // biases zero except forget gate at +1
  for (std::size_t j = hidden_dim; j < 2 * hidden_dim; ++j) p.bias[j] = 1.0;
  return p;
}

LstmParams LstmParams::zeros_like(const LstmParams& p) {
  LstmParams z;
  z.w_in = Tensor::zeros(p.w_in.shape());
  z.w_rec = Tensor::zeros(p.w_rec.shape());
  z.bias = Tensor::zeros(p.bias.shape());
  return z;
}

LstmStepResult lstm_cell_forward(const Tensor& x_t, const Tensor& h_prev,
                                 const Tensor& c_prev,
                                 const LstmParams& params) {
  check_cell_shapes(x_t, h_prev, c_prev, params);
  const std::size_t batch = x_t.extent(0);
  const std::size_t hidden = params.hidden_dim();

  Tensor gates = matmul(x_t, params.w_in);
  accumulate(gates, matmul(h_prev, params.w_rec));
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = gates.data() + b * 4 * hidden;
    const double* bias = params.bias.data();
    for (std::size_t j = 0; j < 4 * hidden; ++j) row[j] += bias[j];
  }

  // activate in place: [i f g o] with sigmoid on i, f, o and tanh on g
  for (std::size_t b = 0; b < batch; ++b) {
    double* row = gates.data() + b * 4 * hidden;
    for (std::size_t j = 0; j < hidden; ++j) row[j] = sigmoid(row[j]);
    for (std::size_t j = hidden; j < 2 * hidden; ++j) row[j] = sigmoid(row[j]);
    for (std::size_t j = 2 * hidden; j < 3 * hidden; ++j)
      row[j] = std::tanh(row[j]);
    for (std::size_t j = 3 * hidden; j < 4 * hidden; ++j)
      row[j] = sigmoid(row[j]);
  }

  LstmStepResult out;
  out.c = Tensor({batch, hidden});
  out.h = Tensor({batch, hidden});
  Tensor tanh_c({batch, hidden});
  for (std::size_t b = 0; b < batch; ++b) {
    const double* g = gates.data() + b * 4 * hidden;
    const double* cp = c_prev.data() + b * hidden;
    double* c = out.c.data() + b * hidden;
    double* tc = tanh_c.data() + b * hidden;
    double* h = out.h.data() + b * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double gi = g[j];
      const double gf = g[hidden + j];
      const double gg = g[2 * hidden + j];
      const double go = g[3 * hidden + j];
      c[j] = gf * cp[j] + gi * gg;
      tc[j] = std::tanh(c[j]);
      h[j] = go * tc[j];
    }
  }

  out.cache.x = x_t;
  out.cache.h_prev = h_prev;
  out.cache.c_prev = c_prev;
  out.cache.gates = std::move(gates);
  out.cache.c = out.c;
  out.cache.tanh_c = std::move(tanh_c);
  return out;
}

LstmCellGrads lstm_cell_backward(const Tensor& grad_h, const Tensor& grad_c,
                                 const LstmCellCache& cache,
                                 const LstmParams& params,
                                 LstmParams& param_grads) {
  const std::size_t batch = cache.x.extent(0);
  const std::size_t hidden = params.hidden_dim();
  if (grad_h.shape() != cache.c.shape() || grad_c.shape() != cache.c.shape()) {
    throw std::invalid_argument("lstm_cell_backward: gradient shapes " +
                                shape_to_string(grad_h.shape()) + ", " +
                                shape_to_string(grad_c.shape()) +
                                " do not match state " +
                                shape_to_string(cache.c.shape()));
  }

  Tensor d_gates({batch, 4 * hidden});  // pre-activation gradients
  LstmCellGrads out;
  out.grad_c_prev = Tensor({batch, hidden});

  for (std::size_t b = 0; b < batch; ++b) {
    const double* g = cache.gates.data() + b * 4 * hidden;
    const double* tc = cache.tanh_c.data() + b * hidden;
    const double* cp = cache.c_prev.data() + b * hidden;
    const double* dh = grad_h.data() + b * hidden;
    const double* dc_in = grad_c.data() + b * hidden;
    double* da = d_gates.data() + b * 4 * hidden;
    double* dcp = out.grad_c_prev.data() + b * hidden;
    for (std::size_t j = 0; j < hidden; ++j) {
      const double gi = g[j];
      const double gf = g[hidden + j];
      const double gg = g[2 * hidden + j];
      const double go = g[3 * hidden + j];
      const double d_o = dh[j] * tc[j];
      const double dc = dc_in[j] + dh[j] * go * (1.0 - tc[j] * tc[j]);
      const double d_i = dc * gg;
      const double d_g = dc * gi;
      const double d_f = dc * cp[j];
      dcp[j] = dc * gf;
      da[j] = d_i * gi * (1.0 - gi);
      da[hidden + j] = d_f * gf * (1.0 - gf);
      da[2 * hidden + j] = d_g * (1.0 - gg * gg);
      da[3 * hidden + j] = d_o * go * (1.0 - go);
    }
  }

  out.grad_x = matmul_nt(d_gates, params.w_in);
  out.grad_h_prev = matmul_nt(d_gates, params.w_rec);
  accumulate(param_grads.w_in, matmul_tn(cache.x, d_gates));
  accumulate(param_grads.w_rec, matmul_tn(cache.h_prev, d_gates));
  for (std::size_t b = 0; b < batch; ++b) {
    const double* da = d_gates.data() + b * 4 * hidden;
    double* db = param_grads.bias.data();
    for (std::size_t j = 0; j < 4 * hidden; ++j) db[j] += da[j];
  }
  return out;
}

namespace {

void check_stack_args(const Tensor& x, const std::vector<LstmParams>& params,
                      const StackConfig& cfg) {
  if (x.rank() != 3) {
    throw std::invalid_argument("stack_forward: expects rank-3 (B, T, D), got " +
                                shape_to_string(x.shape()));
  }
  if (params.empty() || params.size() != cfg.layer_sizes.size()) {
    throw std::invalid_argument(
        "stack_forward: " + std::to_string(params.size()) +
        " parameter sets for " + std::to_string(cfg.layer_sizes.size()) +
        " configured layers");
  }
  std::size_t expect_in = x.extent(2);
  for (std::size_t l = 0; l < params.size(); ++l) {
    if (params[l].input_dim() != expect_in ||
        params[l].hidden_dim() != cfg.layer_sizes[l]) {
      throw std::invalid_argument(
          "stack_forward: layer " + std::to_string(l) + " parameters are (" +
          std::to_string(params[l].input_dim()) + " -> " +
          std::to_string(params[l].hidden_dim()) + "), expected (" +
          std::to_string(expect_in) + " -> " +
          std::to_string(cfg.layer_sizes[l]) + ")");
    }
    expect_in = cfg.layer_sizes[l];
  }
}

Tensor stack_forward_impl(const Tensor& x,
                          const std::vector<LstmParams>& params,
                          const StackConfig& cfg, Rng* rng,
                          const std::vector<DropoutTrace>* frozen, Mode mode,
                          StackCache* cache) {
  check_stack_args(x, params, cfg);
  const std::size_t batch = x.extent(0), steps = x.extent(1);

  if (cache) cache->layers.resize(params.size());

  Tensor seq = x;
  for (std::size_t l = 0; l < params.size(); ++l) {
    const bool want_dropout = mode == Mode::kTrain &&
                              cfg.variant != DropoutVariant::kNone &&
                              l >= cfg.apply_dropout_from_layer;
    DropoutTrace trace;
    bool applied = false;
    if (want_dropout) {
      if (frozen) {
        if (l >= frozen->size()) {
          throw std::invalid_argument(
              "stack_forward_frozen: missing trace for layer " +
              std::to_string(l));
        }
        trace = (*frozen)[l];
        seq = apply_dropout_trace(seq, trace);
      } else {
        DropoutConfig dcfg = cfg.dropout;
        dcfg.mode = Mode::kTrain;
        if (cfg.variant == DropoutVariant::kBaseline) {
          auto [dropped, t] =
              baseline_dropout_forward(seq, dcfg.q, *rng, Mode::kTrain);
          seq = std::move(dropped);
          trace = std::move(t);
        } else {
          auto [dropped, t] = macro_block_dropout_forward(seq, dcfg, *rng);
          seq = std::move(dropped);
          trace = std::move(t);
        }
      }
      applied = true;
    }

    const std::size_t hidden = cfg.layer_sizes[l];
    Tensor h_seq({batch, steps, hidden});
    Tensor h = Tensor::zeros({batch, hidden});
    Tensor c = Tensor::zeros({batch, hidden});
    StackCache::Layer* layer_cache = cache ? &cache->layers[l] : nullptr;
    if (layer_cache) {
      layer_cache->input_seq = seq;
      layer_cache->dropout_applied = applied;
      layer_cache->trace = std::move(trace);
      layer_cache->steps.clear();
      layer_cache->steps.reserve(steps);
    }
    for (std::size_t t = 0; t < steps; ++t) {
      LstmStepResult step =
          lstm_cell_forward(time_slice(seq, t), h, c, params[l]);
      h = std::move(step.h);
      c = std::move(step.c);
      set_time_slice(h_seq, t, h);
      if (layer_cache) layer_cache->steps.push_back(std::move(step.cache));
    }
    if (layer_cache) layer_cache->h_seq = h_seq;
    seq = std::move(h_seq);
  }
  return seq;
}

}  // namespace

Tensor stack_forward(const Tensor& x, const std::vector<LstmParams>& params,
                     const StackConfig& cfg, Rng& rng, Mode mode,
                     StackCache* cache) {
  return stack_forward_impl(x, params, cfg, &rng, nullptr, mode, cache);
}

Tensor stack_forward_frozen(const Tensor& x,
                            const std::vector<LstmParams>& params,
                            const StackConfig& cfg,
                            const std::vector<DropoutTrace>& traces,
                            StackCache* cache) {
  return stack_forward_impl(x, params, cfg, nullptr, &traces, Mode::kTrain,
                            cache);
}

StackGrads stack_backward(const Tensor& grad_outputs,
                          const std::vector<LstmParams>& params,
                          const StackConfig& cfg, const StackCache& cache) {
  if (cache.layers.size() != params.size()) {
    throw std::invalid_argument("stack_backward: cache holds " +
                                std::to_string(cache.layers.size()) +
                                " layers for " + std::to_string(params.size()) +
                                " parameter sets");
  }
  const std::size_t layers = params.size();
  StackGrads out;
  out.param_grads.reserve(layers);
  for (const auto& p : params)
    out.param_grads.push_back(LstmParams::zeros_like(p));

  Tensor d_seq = grad_outputs;  // gradient w.r.t. layer l's hidden sequence
  for (std::size_t l = layers; l-- > 0;) {
    const auto& layer = cache.layers[l];
    if (d_seq.shape() != layer.h_seq.shape()) {
      throw std::invalid_argument("stack_backward: upstream gradient shape " +
                                  shape_to_string(d_seq.shape()) +
                                  " does not match hidden sequence " +
                                  shape_to_string(layer.h_seq.shape()));
    }
    const std::size_t batch = layer.input_seq.extent(0);
    const std::size_t steps = layer.input_seq.extent(1);
    const std::size_t hidden = cfg.layer_sizes[l];

    Tensor d_input(layer.input_seq.shape());
    Tensor dh_next = Tensor::zeros({batch, hidden});
    Tensor dc_next = Tensor::zeros({batch, hidden});
    for (std::size_t t = steps; t-- > 0;) {
      Tensor dh = time_slice(d_seq, t);
      accumulate(dh, dh_next);
      LstmCellGrads grads = lstm_cell_backward(dh, dc_next, layer.steps[t],
                                               params[l], out.param_grads[l]);
      set_time_slice(d_input, t, grads.grad_x);
      dh_next = std::move(grads.grad_h_prev);
      dc_next = std::move(grads.grad_c_prev);
    }
    if (layer.dropout_applied) {
      d_input = dropout_backward(d_input, layer.trace);
    }
    d_seq = std::move(d_input);
  }
  out.grad_input = std::move(d_seq);
  return out;
}

}  // namespace mbd
