#include "mbdrop/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "mbdrop/errors.hpp"

namespace mbd {

namespace {

// substream ids of the run seed; keeping masks on their own stream
// makes q=0 training bitwise-identical to dropout-disabled training
enum Stream : std::uint64_t {
  kInitStream = 0,
  kDataStream = 1,
  kShuffleStream = 2,
  kMaskStream = 3,
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

Tensor colsum(const Tensor& a) {
  const std::size_t rows = a.extent(0), cols = a.extent(1);
  Tensor out({cols});
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = a.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += row[j];
  }
  return out;
}

// batch = rows `order[begin .. begin+count)` of a dataset
std::pair<Tensor, Tensor> gather_batch(const Dataset& data,
                                       const std::vector<std::size_t>& order,
                                       std::size_t begin, std::size_t count) {
  const std::size_t t_len = data.inputs.extent(1);
  const std::size_t in_dim = data.inputs.extent(2);
  Tensor bx({count, t_len, in_dim});
  const std::size_t in_slab = t_len * in_dim;
  Tensor by = data.targets.rank() == 2
                  ? Tensor({count, data.targets.extent(1)})
                  : Tensor({count, data.targets.extent(1),
                            data.targets.extent(2)});
  const std::size_t out_slab = by.size() / count;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = order[begin + i];
    std::copy(data.inputs.data() + src * in_slab,
              data.inputs.data() + (src + 1) * in_slab,
              bx.data() + i * in_slab);
    std::copy(data.targets.data() + src * out_slab,
              data.targets.data() + (src + 1) * out_slab,
              by.data() + i * out_slab);
  }
  return {std::move(bx), std::move(by)};
}

// loss of the readout on top of the hidden sequence; gradients w.r.t.
// the hidden sequence and the head are filled in when requested
double readout_loss(const Model& model, const Tensor& h_seq,
                    const Tensor& targets, bool want_grads, Tensor* d_hseq,
                    Tensor* d_head_w, Tensor* d_head_b) {
  const std::size_t batch = h_seq.extent(0);
  const std::size_t t_len = h_seq.extent(1);
  const std::size_t hidden = h_seq.extent(2);

  if (model.task == TaskKind::kAddingProblem) {
    Tensor h_last({batch, hidden});
    for (std::size_t b = 0; b < batch; ++b) {
      const double* src = h_seq.data() + (b * t_len + t_len - 1) * hidden;
      std::copy(src, src + hidden, h_last.data() + b * hidden);
    }
    Tensor pred = matmul(h_last, model.head_w);  // (B, 1)
    for (std::size_t b = 0; b < batch; ++b) pred[b] += model.head_b[0];

    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const double r = pred[b] - targets[b];
      loss += r * r;
    }
    loss /= static_cast<double>(batch);
    if (!want_grads) return loss;

    Tensor d_pred({batch, 1});
    for (std::size_t b = 0; b < batch; ++b) {
      d_pred[b] = 2.0 * (pred[b] - targets[b]) / static_cast<double>(batch);
    }
    *d_head_w = matmul_tn(h_last, d_pred);
    *d_head_b = colsum(d_pred);
    Tensor d_last = matmul_nt(d_pred, model.head_w);  // (B, H)
    *d_hseq = Tensor::zeros(h_seq.shape());
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy(d_last.data() + b * hidden, d_last.data() + (b + 1) * hidden,
                d_hseq->data() + (b * t_len + t_len - 1) * hidden);
    }
    return loss;
  }

  // per-step softmax cross-entropy against one-hot targets
  const std::size_t rows = batch * t_len;
  const std::size_t classes = model.head_w.extent(1);
  Tensor flat_h({rows, hidden}, h_seq.values());
  Tensor logits = matmul(flat_h, model.head_w);  // (rows, classes)
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = logits.data() + r * classes;
    for (std::size_t c = 0; c < classes; ++c) row[c] += model.head_b[c];
  }

  double loss = 0.0;
  Tensor d_logits({rows, classes});
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = logits.data() + r * classes;
    const double* tgt = targets.data() + r * classes;
    double zmax = row[0];
    for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, row[c]);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - zmax);
    const double lse = zmax + std::log(denom);
    for (std::size_t c = 0; c < classes; ++c) {
      const double logp = row[c] - lse;
      loss -= tgt[c] * logp;
      if (want_grads) {
        d_logits.at(r, c) =
            (std::exp(logp) - tgt[c]) / static_cast<double>(rows);
      }
    }
  }
  loss /= static_cast<double>(rows);
  if (!want_grads) return loss;

  *d_head_w = matmul_tn(flat_h, d_logits);
  *d_head_b = colsum(d_logits);
  Tensor d_flat = matmul_nt(d_logits, model.head_w);  // (rows, hidden)
  *d_hseq = Tensor({batch, t_len, hidden}, d_flat.values());
  return loss;
}

std::vector<Tensor*> trainable_tensors(Model& model) {
  std::vector<Tensor*> out;
  for (auto& layer : model.layers) {
    out.push_back(&layer.w_in);
    out.push_back(&layer.w_rec);
    out.push_back(&layer.bias);
  }
  out.push_back(&model.head_w);
  out.push_back(&model.head_b);
  return out;
}


void check_train_config(const TrainConfig& cfg) {
  if (cfg.epochs < 1) {
    throw std::invalid_argument("train: epochs must be >= 1");
  }
  if (cfg.batch_size < 1) {
    throw std::invalid_argument("train: batch_size must be >= 1");
  }
  if (cfg.learning_rate < 0.0 || !std::isfinite(cfg.learning_rate)) {
    throw std::invalid_argument("train: learning_rate must be >= 0, got " +
                                std::to_string(cfg.learning_rate));
  }
  if (cfg.grad_clip_norm < 0.0) {
    throw std::invalid_argument("train: grad_clip_norm must be >= 0");
  }
}

}  // namespace

double clip_gradients(const std::vector<Tensor*>& grads, double threshold) {
  double sq = 0.0;
  for (const Tensor* g : grads) {
    for (std::size_t i = 0; i < g->size(); ++i) sq += (*g)[i] * (*g)[i];
  }
  const double norm = std::sqrt(sq);
  if (norm > threshold) {
    const double factor = threshold / norm;
    for (Tensor* g : grads) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] *= factor;
    }
  }
  return norm;
}

Model build_model(const TaskSpec& task,
                  const std::vector<std::size_t>& layer_sizes,
                  DropoutVariant variant, const DropoutConfig& dropout,
                  Rng& init_rng) {
  if (layer_sizes.empty()) {
    throw std::invalid_argument("build_model: at least one layer required");
  }
  Model model;
  model.task = task.kind;
  model.stack.layer_sizes = layer_sizes;
  model.stack.variant = variant;
  model.stack.dropout = dropout;
  std::size_t in_dim = task.input_dim();
  for (std::size_t hidden : layer_sizes) {
    model.layers.push_back(LstmParams::init(in_dim, hidden, init_rng));
    in_dim = hidden;
  }
  const std::size_t top = layer_sizes.back();
  const std::size_t out_dim = task.target_dim();
  const double bound = 1.0 / std::sqrt(static_cast<double>(top));
  model.head_w = Tensor({top, out_dim});
  for (std::size_t i = 0; i < model.head_w.size(); ++i) {
    model.head_w[i] = init_rng.uniform(-bound, bound);
  }
  model.head_b = Tensor::zeros({out_dim});
  return model;
}

NamedTensors model_tensors(const Model& model) {
  NamedTensors out;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    out.emplace_back(prefix + "w_in", model.layers[l].w_in);
    out.emplace_back(prefix + "w_rec", model.layers[l].w_rec);
    out.emplace_back(prefix + "bias", model.layers[l].bias);
  }
  out.emplace_back("head.w", model.head_w);
  out.emplace_back("head.b", model.head_b);
  return out;
}

double evaluate(const Model& model, const Dataset& data,
                std::size_t batch_size) {
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng unused(0);
  double loss_sum = 0.0;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t count = std::min(batch_size, n - begin);
    auto [bx, by] = gather_batch(data, order, begin, count);
    Tensor h_seq = stack_forward(bx, model.layers, model.stack, unused,
                                 Mode::kInference);
    loss_sum += readout_loss(model, h_seq, by, false, nullptr, nullptr,
                             nullptr) *
                static_cast<double>(count);
  }
  return loss_sum / static_cast<double>(n);
}

RunMetrics train(Model& model, const TaskData& data, const TrainConfig& cfg,
                 const ProgressFn& progress) {
  check_train_config(cfg);
  model.stack.variant = cfg.variant;
  model.stack.dropout = cfg.dropout;

  Rng shuffle_rng = Rng::stream(cfg.seed, kShuffleStream);
  Rng mask_rng = Rng::stream(cfg.seed, kMaskStream);

  std::vector<Tensor*> params = trainable_tensors(model);
  std::vector<Tensor> m_state, v_state;
  if (cfg.optimizer == Optimizer::kAdam) {
    for (const Tensor* p : params) {
      m_state.push_back(Tensor::zeros(p->shape()));
      v_state.push_back(Tensor::zeros(p->shape()));
    }
  }
  std::size_t adam_step = 0;

  const std::size_t n = data.train.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  RunMetrics metrics;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Fisher-Yates with the dedicated shuffle stream
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j =
          static_cast<std::size_t>(shuffle_rng.next_u64() % (i + 1));
      std::swap(order[i], order[j]);
    }
    const double lr =
        cfg.learning_rate *
        std::pow(cfg.lr_decay, static_cast<double>(epoch - 1));

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - begin);
      auto [bx, by] = gather_batch(data.train, order, begin, count);

      StackCache cache;
      Tensor h_seq = stack_forward(bx, model.layers, model.stack, mask_rng,
                                   Mode::kTrain, &cache);
      Tensor d_hseq, d_head_w, d_head_b;
      const double loss = readout_loss(model, h_seq, by, true, &d_hseq,
                                       &d_head_w, &d_head_b);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("training diverged at epoch " +
                                 std::to_string(epoch) +
                                 ": batch loss is not finite");
      }
      loss_sum += loss * static_cast<double>(count);

      StackGrads sg = stack_backward(d_hseq, model.layers, model.stack, cache);
      std::vector<Tensor*> grads;
      for (auto& pg : sg.param_grads) {
        grads.push_back(&pg.w_in);
        grads.push_back(&pg.w_rec);
        grads.push_back(&pg.bias);
      }
      grads.push_back(&d_head_w);
      grads.push_back(&d_head_b);

      if (cfg.grad_clip_norm > 0.0) {
        clip_gradients(grads, cfg.grad_clip_norm);
      }

      if (cfg.optimizer == Optimizer::kAdam) {
        ++adam_step;
        const double bc1 =
            1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam_step));
        const double bc2 =
            1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam_step));
        for (std::size_t p = 0; p < params.size(); ++p) {
          Tensor& param = *params[p];
          const Tensor& grad = *grads[p];
          Tensor& m = m_state[p];
          Tensor& v = v_state[p];
          for (std::size_t i = 0; i < param.size(); ++i) {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * grad[i];
            v[i] = cfg.adam_beta2 * v[i] +
                   (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
            param[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) +
                                             cfg.adam_eps);
          }
        }
      } else {
        for (std::size_t p = 0; p < params.size(); ++p) {
          Tensor& param = *params[p];
          const Tensor& grad = *grads[p];
          for (std::size_t i = 0; i < param.size(); ++i) {
            param[i] -= lr * grad[i];
          }
        }
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(n);
    record.val_loss = evaluate(model, data.val, cfg.batch_size);
    if (!std::isfinite(record.val_loss)) {
      throw std::runtime_error("training diverged at epoch " +
                               std::to_string(epoch) +
                               ": validation loss is not finite");
    }
    const auto t1 = std::chrono::steady_clock::now();
    record.wall_time_s =
        std::chrono::duration<double>(t1 - t0).count();
    metrics.epochs.push_back(record);
    if (progress) progress(record);
  }
  return metrics;
}

std::vector<ComparisonRow> compare_variants(
    const TaskSpec& task, const TrainConfig& base,
    const std::vector<std::size_t>& layer_sizes,
    const std::vector<VariantSpec>& variants, std::size_t repeats,
    const CompareProgressFn& progress) {
  if (repeats < 3) {
    throw std::invalid_argument("compare: repeats must be >= 3, got " +
                                std::to_string(repeats));
  }
  if (variants.empty()) {
    throw std::invalid_argument("compare: at least one variant required");
  }
  for (std::size_t i = 0; i < variants.size(); ++i) {
    for (std::size_t j = i + 1; j < variants.size(); ++j) {
      if (variants[i].label == variants[j].label) {
        throw std::invalid_argument("compare: duplicate variant label '" +
                                    variants[i].label + "'");
      }
    }
  }

  std::vector<ComparisonRow> rows(variants.size());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    rows[v].label = variants[v].label;
  }

  for (std::size_t r = 0; r < repeats; ++r) {
    const std::uint64_t seed = base.seed + r;
    Rng data_rng = Rng::stream(seed, kDataStream);
    TaskData data = generate_task(task, data_rng);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      // one init stream per seed: every variant starts from identical
      // parameters, so columns differ only by the regularizer
      Rng init_rng = Rng::stream(seed, kInitStream);
      Model model = build_model(task, layer_sizes, variants[v].variant,
                                variants[v].dropout, init_rng);
      TrainConfig cfg = base;
      cfg.variant = variants[v].variant;
      cfg.dropout = variants[v].dropout;
      cfg.seed = seed;
      ProgressFn hook;
      if (progress) {
        const std::string& label = variants[v].label;
        hook = [&progress, &label, r](const EpochRecord& record) {
          progress(label, r, record);
        };
      }
      RunMetrics metrics = train(model, data, cfg, hook);
      rows[v].final_val_losses.push_back(metrics.final_val_loss());
    }
  }

  for (ComparisonRow& row : rows) {
    const double n = static_cast<double>(row.final_val_losses.size());
    double mean = 0.0;
    for (double x : row.final_val_losses) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : row.final_val_losses) var += (x - mean) * (x - mean);
    row.mean = mean;
    row.stddev = std::sqrt(var / (n - 1.0));
  }
  return rows;
}

namespace {

DropoutVariant variant_from_string(const std::string& name) {
  if (name == "none") return DropoutVariant::kNone;
  if (name == "baseline") return DropoutVariant::kBaseline;
  if (name == "macro_block") return DropoutVariant::kMacroBlock;
  throw std::invalid_argument(
      "config: unknown dropout variant '" + name +
      "' (expected 'none', 'baseline', or 'macro_block')");
}

std::string variant_to_string(DropoutVariant v) {
  switch (v) {
    case DropoutVariant::kNone: return "none";
    case DropoutVariant::kBaseline: return "baseline";
    default: return "macro_block";
  }
}

Scaling scaling_from_string(const std::string& name) {
  if (name == "dynamic_sum") return Scaling::kDynamicSum;
  if (name == "fixed_inverse") return Scaling::kFixedInverse;
  throw std::invalid_argument(
      "config: unknown scaling '" + name +
      "' (expected 'dynamic_sum' or 'fixed_inverse')");
}

std::string scaling_to_string(Scaling s) {
  return s == Scaling::kDynamicSum ? "dynamic_sum" : "fixed_inverse";
}

// strict positive-integer parse: whole string, no sign, no suffix
std::size_t parse_extent(const std::string& item) {
  if (item.empty() || item.find('-') != std::string::npos) {
    throw std::invalid_argument(item);
  }
  std::size_t used = 0;
  const unsigned long long v = std::stoull(item, &used);
  if (used != item.size() || v < 1) throw std::invalid_argument(item);
  return static_cast<std::size_t>(v);
}

PartitionDims parse_partition(const std::string& text) {
  const auto x = text.find('x');
  if (x == std::string::npos || x == 0 || x + 1 == text.size()) {
    throw std::invalid_argument("config: partition '" + text +
                                "' is not of the form TxF");
  }
  try {
    PartitionDims dims;
    dims.p_time = parse_extent(text.substr(0, x));
    dims.p_feature = parse_extent(text.substr(x + 1));
    return dims;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: partition '" + text +
                                "' is not of the form TxF");
  }
}

std::string partition_to_string(const PartitionDims& dims) {
  return std::to_string(dims.p_time) + "x" + std::to_string(dims.p_feature);
}

std::vector<std::size_t> parse_layer_list(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item =
        text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      sizes.push_back(parse_extent(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("config: layers '" + text +
                                  "' is not a comma-separated size list");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return sizes;
}

std::string trim_ws(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

std::string format_q(double q) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", q);
  return buf;
}

std::string variant_label(const VariantSpec& v) {
  if (v.variant == DropoutVariant::kNone) return "none";
  std::string label = variant_to_string(v.variant);
  if (v.variant == DropoutVariant::kMacroBlock) {
    label += "_" + partition_to_string(v.dropout.partition);
  }
  label += "_q" + format_q(v.dropout.q);
  if (v.dropout.scaling == Scaling::kFixedInverse) label += "_fixed";
  return label;
}

// variant descriptors: 'kind key=value ...' separated by '|', e.g.
//   variants = baseline q=0.2 | macro_block partition=1x4 q=0.2
std::vector<VariantSpec> parse_variants(const std::string& text,
                                        const DropoutConfig& defaults) {
  std::vector<VariantSpec> variants;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto bar = text.find('|', pos);
    const std::string chunk = trim_ws(
        text.substr(pos, bar == std::string::npos ? bar : bar - pos));
    if (chunk.empty()) {
      throw std::invalid_argument("config: variants has an empty entry");
    }
    VariantSpec v;
    v.dropout = defaults;
    std::size_t tok_pos = 0;
    bool first = true;
    while (tok_pos < chunk.size()) {
      auto space = chunk.find(' ', tok_pos);
      if (space == std::string::npos) space = chunk.size();
      const std::string token = trim_ws(chunk.substr(tok_pos, space - tok_pos));
      tok_pos = space + 1;
      if (token.empty()) continue;
      if (first) {
        v.variant = variant_from_string(token);
        first = false;
        continue;
      }
      const auto eq = token.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("config: variant option '" + token +
                                    "' is not key=value");
      }
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "q") {
        try {
          v.dropout.q = std::stod(value);
        } catch (const std::exception&) {
          throw std::invalid_argument("config: variant q '" + value +
                                      "' is not a number");
        }
      } else if (key == "partition") {
        v.dropout.partition = parse_partition(value);
      } else if (key == "scaling") {
        v.dropout.scaling = scaling_from_string(value);
      } else {
        throw std::invalid_argument("config: unknown variant option '" + key +
                                    "'");
      }
    }
    if (first) {
      throw std::invalid_argument("config: variants has an empty entry");
    }
    v.label = variant_label(v);
    variants.push_back(std::move(v));
    if (bar == std::string::npos) break;
    pos = bar + 1;
  }
  return variants;
}

}  // namespace

RunSpec RunSpec::from_config(const Config& cfg, bool for_compare) {
  RunSpec spec;
  spec.task.kind = task_kind_from_string(cfg.get_string("task", "adding"));
  spec.task.seq_len = cfg.get_size("seq_len", 50);
  spec.task.train_size = cfg.get_size("train_size", 2000);
  spec.task.val_size = cfg.get_size("val_size", 500);
  spec.task.n_symbols = cfg.get_size("n_symbols", 4);
  spec.task.copy_delay = cfg.get_size("copy_delay", 0);

  spec.layer_sizes = parse_layer_list(cfg.get_string("layers", "32,32"));

  spec.train.epochs = cfg.get_size("epochs", 50);
  spec.train.batch_size = cfg.get_size("batch_size", 32);
  spec.train.learning_rate = cfg.get_double("learning_rate");
  spec.train.lr_decay = cfg.get_double("lr_decay", 1.0);
  const std::string opt = cfg.get_string("optimizer", "adam");
  if (opt == "adam") {
    spec.train.optimizer = Optimizer::kAdam;
  } else if (opt == "sgd") {
    spec.train.optimizer = Optimizer::kSgd;
  } else {
    throw std::invalid_argument("config: unknown optimizer '" + opt +
                                "' (expected 'adam' or 'sgd')");
  }
  spec.train.adam_beta1 = cfg.get_double("adam_beta1", 0.9);
  spec.train.adam_beta2 = cfg.get_double("adam_beta2", 0.999);
  spec.train.adam_eps = cfg.get_double("adam_eps", 1e-8);
  spec.train.grad_clip_norm = cfg.get_double("grad_clip_norm", 0.0);
  spec.train.variant = variant_from_string(cfg.get_string("dropout", "none"));
  spec.train.dropout.q = cfg.get_double("q", 0.2);
  spec.train.dropout.partition =
      parse_partition(cfg.get_string("partition", "1x4"));
  spec.train.dropout.scaling =
      scaling_from_string(cfg.get_string("scaling", "dynamic_sum"));
  spec.train.seed = cfg.get_u64("seed", 1);

  if (for_compare) {
    spec.repeats = cfg.get_size("repeats", 3);
    if (cfg.has("variants")) {
      spec.variants =
          parse_variants(cfg.get_string("variants"), spec.train.dropout);
    } else {
      VariantSpec baseline;
      baseline.variant = DropoutVariant::kBaseline;
      baseline.dropout = spec.train.dropout;
      baseline.label = variant_label(baseline);
      VariantSpec macro;
      macro.variant = DropoutVariant::kMacroBlock;
      macro.dropout = spec.train.dropout;
      macro.label = variant_label(macro);
      spec.variants = {baseline, macro};
    }
  }

  cfg.reject_unknown_keys();
  return spec;
}

std::string RunSpec::to_json() const {
  nlohmann::ordered_json root;
  root["task"] = to_string(task.kind);
  root["seq_len"] = task.seq_len;
  root["train_size"] = task.train_size;
  root["val_size"] = task.val_size;
  if (task.kind == TaskKind::kSequenceCopy) {
    root["n_symbols"] = task.n_symbols;
    root["copy_delay"] = task.copy_delay;
  }
  root["layers"] = layer_sizes;
  root["epochs"] = train.epochs;
  root["batch_size"] = train.batch_size;
  root["learning_rate"] = train.learning_rate;
  root["lr_decay"] = train.lr_decay;
  root["optimizer"] =
      train.optimizer == Optimizer::kAdam ? "adam" : "sgd";
  root["adam_beta1"] = train.adam_beta1;
  root["adam_beta2"] = train.adam_beta2;
  root["adam_eps"] = train.adam_eps;
  root["grad_clip_norm"] = train.grad_clip_norm;
  root["dropout"] = variant_to_string(train.variant);
  root["q"] = train.dropout.q;
  root["partition"] = partition_to_string(train.dropout.partition);
  root["scaling"] = scaling_to_string(train.dropout.scaling);
  root["seed"] = train.seed;
  if (!variants.empty()) {
    root["repeats"] = repeats;
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const VariantSpec& v : variants) {
      nlohmann::ordered_json entry;
      entry["label"] = v.label;
      entry["variant"] = variant_to_string(v.variant);
      entry["q"] = v.dropout.q;
      entry["partition"] = partition_to_string(v.dropout.partition);
      entry["scaling"] = scaling_to_string(v.dropout.scaling);
      list.push_back(std::move(entry));
    }
    root["variants"] = std::move(list);
  }
  return root.dump(1) + "\n";
}

void write_metrics_csv(const std::string& path, const RunMetrics& metrics) {
  std::ofstream file(path);
  if (!file) {
    throw IoError("write_metrics_csv: cannot open " + path + " for writing");
  }
  file << "epoch,train_loss,val_loss,wall_time_s\n";
  for (const EpochRecord& r : metrics.epochs) {
    file << r.epoch << "," << format_double(r.train_loss) << ","
         << format_double(r.val_loss) << "," << format_double(r.wall_time_s)
         << "\n";
  }
  if (!file) {
    throw IoError("write_metrics_csv: write to " + path + " failed");
  }
}

void write_comparison_csv(const std::string& path,
                          const std::vector<ComparisonRow>& rows) {
  std::ofstream file(path);
  if (!file) {
    throw IoError("write_comparison_csv: cannot open " + path +
                  " for writing");
  }
  file << "label,mean_val_loss,std_val_loss";
  const std::size_t repeats =
      rows.empty() ? 0 : rows.front().final_val_losses.size();
  for (std::size_t r = 0; r < repeats; ++r) file << ",seed_" << r;
  file << "\n";
  for (const ComparisonRow& row : rows) {
    file << row.label << "," << format_double(row.mean) << ","
         << format_double(row.stddev);
    for (double x : row.final_val_losses) file << "," << format_double(x);
    file << "\n";
  }
  if (!file) {
    throw IoError("write_comparison_csv: write to " + path + " failed");
  }
}

namespace {

std::filesystem::path prepare_out_dir(const std::string& out_dir) {
  std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory " + out_dir + ": " +
                  ec.message());
  }
  return dir;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream file(path);
  if (!file) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  file << text;
  if (!file) {
    throw IoError("write to " + path.string() + " failed");
  }
}

}  // namespace

RunMetrics run_training(const RunSpec& spec, const std::string& out_dir,
                        const ProgressFn& progress) {
  const std::filesystem::path dir = prepare_out_dir(out_dir);
  Rng data_rng = Rng::stream(spec.train.seed, kDataStream);
  TaskData data = generate_task(spec.task, data_rng);
  Rng init_rng = Rng::stream(spec.train.seed, kInitStream);
  Model model = build_model(spec.task, spec.layer_sizes, spec.train.variant,
                            spec.train.dropout, init_rng);
  RunMetrics metrics = train(model, data, spec.train, progress);
  write_metrics_csv((dir / "metrics.csv").string(), metrics);
  write_text(dir / "config.json", spec.to_json());
  save_checkpoint((dir / "checkpoint.json").string(), model_tensors(model));
  return metrics;
}

std::vector<ComparisonRow> run_comparison(const RunSpec& spec,
                                          const std::string& out_dir,
                                          const CompareProgressFn& progress) {
  const std::filesystem::path dir = prepare_out_dir(out_dir);
  std::vector<ComparisonRow> rows =
      compare_variants(spec.task, spec.train, spec.layer_sizes, spec.variants,
                       spec.repeats, progress);
  write_comparison_csv((dir / "comparison.csv").string(), rows);
  write_text(dir / "config.json", spec.to_json());
  return rows;
}

}  // namespace mbd
