#include "mbdrop/tasks.hpp"

#include <stdexcept>
#include <string>

namespace mbd {

std::size_t TaskSpec::input_dim() const {
  return kind == TaskKind::kAddingProblem ? 2 : n_symbols + 1;
}

std::size_t TaskSpec::target_dim() const {
  return kind == TaskKind::kAddingProblem ? 1 : n_symbols + 1;
}

namespace {

void check_spec(const TaskSpec& spec) {
  if (spec.seq_len < 2) {
    throw std::invalid_argument("task: seq_len must be >= 2, got " +
                                std::to_string(spec.seq_len));
  }
  if (spec.kind == TaskKind::kSequenceCopy) {
    if (spec.n_symbols < 2) {
      throw std::invalid_argument("task: n_symbols must be >= 2, got " +
                                  std::to_string(spec.n_symbols));
    }
    if (spec.copy_delay >= spec.seq_len) {
      throw std::invalid_argument(
          "task: copy_delay " + std::to_string(spec.copy_delay) +
          " must be shorter than seq_len " + std::to_string(spec.seq_len));
    }
  }
}

Dataset generate_adding(const TaskSpec& spec, std::size_t count, Rng& rng) {
  const std::size_t t_len = spec.seq_len;
  Dataset data;
  data.inputs = Tensor::zeros({count, t_len, 2});
  data.targets = Tensor::zeros({count, 1});
  for (std::size_t n = 0; n < count; ++n) {
    for (std::size_t t = 0; t < t_len; ++t) {
      data.inputs.at(n, t, 0) = rng.next_double();
    }
    // two distinct marker positions
    const std::size_t first = rng.next_u64() % t_len;
    std::size_t second = rng.next_u64() % (t_len - 1);
    if (second >= first) ++second;
    data.inputs.at(n, first, 1) = 1.0;
    data.inputs.at(n, second, 1) = 1.0;
    data.targets.at(n, 0) =
        data.inputs.at(n, first, 0) + data.inputs.at(n, second, 0);
  }
  return data;
}

Dataset generate_copy(const TaskSpec& spec, std::size_t count, Rng& rng) {
  const std::size_t t_len = spec.seq_len;
  const std::size_t blank = spec.n_symbols;  // last channel
  const std::size_t dim = spec.n_symbols + 1;
  Dataset data;
  data.inputs = Tensor::zeros({count, t_len, dim});
  data.targets = Tensor::zeros({count, t_len, dim});
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t content = t_len - spec.copy_delay;
    for (std::size_t t = 0; t < t_len; ++t) {
      const std::size_t sym =
          t < content ? rng.next_u64() % spec.n_symbols : blank;
      data.inputs.at(n, t, sym) = 1.0;
    }
    // target is the input delayed, with blanks filling the gap
    for (std::size_t t = 0; t < t_len; ++t) {
      if (t < spec.copy_delay) {
        data.targets.at(n, t, blank) = 1.0;
      } else {
        for (std::size_t d = 0; d < dim; ++d) {
          data.targets.at(n, t, d) = data.inputs.at(n, t - spec.copy_delay, d);
        }
      }
    }
  }
  return data;
}

}  // namespace

Dataset generate_examples(const TaskSpec& spec, std::size_t count, Rng& rng) {
  check_spec(spec);
  if (count == 0) {
    throw std::invalid_argument("task: example count must be >= 1");
  }
  return spec.kind == TaskKind::kAddingProblem
             ? generate_adding(spec, count, rng)
             : generate_copy(spec, count, rng);
}

TaskData generate_task(const TaskSpec& spec, Rng& rng) {
  TaskData data;
  data.train = generate_examples(spec, spec.train_size, rng);
  data.val = generate_examples(spec, spec.val_size, rng);
  return data;
}

TaskKind task_kind_from_string(const std::string& name) {
  if (name == "adding") return TaskKind::kAddingProblem;
  if (name == "copy") return TaskKind::kSequenceCopy;
  throw std::invalid_argument("task: unknown kind '" + name +
                              "' (expected 'adding' or 'copy')");
}

std::string to_string(TaskKind kind) {
  return kind == TaskKind::kAddingProblem ? "adding" : "copy";
}

}  // namespace mbd
