// Synthetic sequence tasks that overfit readily at small data sizes,
// which is what makes regularization effects visible on one CPU core.
//
// AddingProblem: inputs are (value, marker) pairs over T steps; the
// marker row contains exactly two 1s and the target is the sum of the
// two marked values. Scored by mean squared error on a final-step
// readout.
//
// SequenceCopy: one-hot symbols plus a blank channel; the target is
// the input sequence shifted right by `copy_delay` steps with blanks
// in front. Scored by per-step softmax cross-entropy.

#pragma once

#include <cstddef>
#include <string>

#include "mbdrop/tensor.hpp"

namespace mbd {

enum class TaskKind { kAddingProblem, kSequenceCopy };

struct TaskSpec {
  TaskKind kind = TaskKind::kAddingProblem;
  std::size_t seq_len = 50;
  std::size_t train_size = 2000;
  std::size_t val_size = 500;
  std::size_t n_symbols = 4;   // SequenceCopy alphabet size
  std::size_t copy_delay = 0;  // SequenceCopy shift; 0 copies in place

  // AddingProblem: 2 (value + marker); SequenceCopy: symbols + blank.
  std::size_t input_dim() const;
  // AddingProblem: 1 scalar; SequenceCopy: symbols + blank classes.
  std::size_t target_dim() const;
};

struct Dataset {
  Tensor inputs;   // (n, T, input_dim)
  Tensor targets;  // AddingProblem: (n, 1); SequenceCopy: (n, T, classes)
  std::size_t size() const { return inputs.empty() ? 0 : inputs.extent(0); }
};

struct TaskData {
  Dataset train;
  Dataset val;
};

Dataset generate_examples(const TaskSpec& spec, std::size_t count, Rng& rng);

// Train and validation splits drawn back to back from one stream, so a
// fixed seed pins the whole dataset.
TaskData generate_task(const TaskSpec& spec, Rng& rng);

TaskKind task_kind_from_string(const std::string& name);
std::string to_string(TaskKind kind);

}  // namespace mbd
