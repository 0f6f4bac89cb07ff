// Trains the LSTM stack on the synthetic tasks under a chosen dropout
// variant and records per-epoch losses; also runs multi-seed
// comparisons between variants. All randomness flows through four
// named substreams of the run seed (init, data, shuffle, masks), so a
// run is reproducible end to end and q=0 matches dropout-disabled
// training bit for bit.

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mbdrop/checkpoint.hpp"
#include "mbdrop/config.hpp"
#include "mbdrop/lstm.hpp"
#include "mbdrop/tasks.hpp"

namespace mbd {

enum class Optimizer { kSgd, kAdam };

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double lr_decay = 1.0;  // per-epoch multiplier on the learning rate
  Optimizer optimizer = Optimizer::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip_norm = 0.0;  // global-norm threshold; 0 disables
  DropoutVariant variant = DropoutVariant::kNone;
  DropoutConfig dropout{};
  std::uint64_t seed = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_time_s = 0.0;
};

struct RunMetrics {
  std::vector<EpochRecord> epochs;
  double final_train_loss() const {
    return epochs.empty() ? 0.0 : epochs.back().train_loss;
  }
  double final_val_loss() const {
    return epochs.empty() ? 0.0 : epochs.back().val_loss;
  }
};

// LSTM stack plus a linear readout: last-step scalar regression for
// the adding task, per-step class logits for the copy task.
struct Model {
  TaskKind task = TaskKind::kAddingProblem;
  StackConfig stack;
  std::vector<LstmParams> layers;
  Tensor head_w;  // (H_top, out_dim)
  Tensor head_b;  // (out_dim)
};

Model build_model(const TaskSpec& task,
                  const std::vector<std::size_t>& layer_sizes,
                  DropoutVariant variant, const DropoutConfig& dropout,
                  Rng& init_rng);

NamedTensors model_tensors(const Model& model);

// Mean loss over a dataset with dropout off (inference mode).
double evaluate(const Model& model, const Dataset& data,
                std::size_t batch_size);

// Scales the gradients in place so their global L2 norm does not
// exceed `threshold`; returns the pre-clip norm. Leaves them untouched
// when the norm is already within the threshold.
double clip_gradients(const std::vector<Tensor*>& grads, double threshold);

using ProgressFn = std::function<void(const EpochRecord&)>;

// Minibatch training. Throws std::runtime_error naming the epoch if
// the loss stops being finite.
RunMetrics train(Model& model, const TaskData& data, const TrainConfig& cfg,
                 const ProgressFn& progress = nullptr);

struct VariantSpec {
  std::string label;
  DropoutVariant variant = DropoutVariant::kNone;
  DropoutConfig dropout{};
};

struct ComparisonRow {
  std::string label;
  std::vector<double> final_val_losses;  // one per repeat seed
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation across seeds
};

using CompareProgressFn = std::function<void(
    const std::string& label, std::size_t repeat, const EpochRecord&)>;

// Trains every variant for `repeats` seeds; a given seed shares its
// dataset and initial parameters across variants, so columns differ
// only by the regularizer. Requires repeats >= 3.
std::vector<ComparisonRow> compare_variants(
    const TaskSpec& task, const TrainConfig& base,
    const std::vector<std::size_t>& layer_sizes,
    const std::vector<VariantSpec>& variants, std::size_t repeats,
    const CompareProgressFn& progress = nullptr);

// A full experiment parsed from a flat config; `for_compare` admits
// the comparison-only keys (repeats, variants).
struct RunSpec {
  TaskSpec task;
  std::vector<std::size_t> layer_sizes = {32, 32};
  TrainConfig train;
  std::vector<VariantSpec> variants;
  std::size_t repeats = 3;

  static RunSpec from_config(const Config& cfg, bool for_compare);
  std::string to_json() const;  // resolved-config echo
};

void write_metrics_csv(const std::string& path, const RunMetrics& metrics);
void write_comparison_csv(const std::string& path,
                          const std::vector<ComparisonRow>& rows);

// Orchestration shared by the C API and the CLI: runs the experiment
// and writes metrics.csv / comparison.csv, config.json, and (for
// training) checkpoint.json into out_dir.
RunMetrics run_training(const RunSpec& spec, const std::string& out_dir,
                        const ProgressFn& progress = nullptr);
std::vector<ComparisonRow> run_comparison(
    const RunSpec& spec, const std::string& out_dir,
    const CompareProgressFn& progress = nullptr);

}  // namespace mbd
