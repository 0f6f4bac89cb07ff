#include <cstddef>
#include <vector>

#include "doctest.h"
#include "mbdrop/tasks.hpp"
#include "test_util.hpp"

using mbd::Dataset;
using mbd::generate_examples;
using mbd::generate_task;
using mbd::Rng;
using mbd::TaskData;
using mbd::TaskKind;
using mbd::TaskSpec;
using mbd::Tensor;

namespace {

TaskSpec adding_spec(std::size_t seq_len) {
  TaskSpec spec;
  spec.kind = TaskKind::kAddingProblem;
  spec.seq_len = seq_len;
  return spec;
}

TaskSpec copy_spec(std::size_t seq_len, std::size_t n_symbols,
                   std::size_t delay) {
  TaskSpec spec;
  spec.kind = TaskKind::kSequenceCopy;
  spec.seq_len = seq_len;
  spec.n_symbols = n_symbols;
  spec.copy_delay = delay;
  return spec;
}

}  // namespace

TEST_CASE("adding task dimensions") {
  CHECK(adding_spec(50).input_dim() == 2);
  CHECK(adding_spec(50).target_dim() == 1);
  Rng rng(11);
  Dataset data = generate_examples(adding_spec(20), 10, rng);
  CHECK(data.inputs.shape() == std::vector<std::size_t>{10, 20, 2});
  CHECK(data.targets.shape() == std::vector<std::size_t>{10, 1});
  CHECK(data.size() == 10);
}

TEST_CASE("adding task: two marked values, target is their sum") {
  Rng rng(42);
  const std::size_t t_len = 30;
  Dataset data = generate_examples(adding_spec(t_len), 50, rng);
  for (std::size_t i = 0; i < 50; ++i) {
    double marker_total = 0.0;
    double marked_sum = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) {
      const double value = data.inputs.at(i, t, 0);
      const double marker = data.inputs.at(i, t, 1);
      CHECK(value >= 0.0);
      CHECK(value < 1.0);
      // marker channel is exactly 0 or 1
      CHECK((marker == 0.0 || marker == 1.0));
      marker_total += marker;
      if (marker == 1.0) marked_sum += value;
    }
    CHECK(marker_total == 2.0);
    // addition of two doubles is order-independent, so the recomputed
    // sum matches the stored target bit for bit
    CHECK(data.targets.at(i, 0) == marked_sum);
  }
}

TEST_CASE("adding task targets span (0, 2)") {
  Rng rng(7);
  Dataset data = generate_examples(adding_spec(25), 200, rng);
  double lo = 2.0, hi = 0.0;
  for (std::size_t i = 0; i < 200; ++i) {
    const double t = data.targets.at(i, 0);
    CHECK(t >= 0.0);
    CHECK(t < 2.0);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
  // with 200 draws the sums must spread out; both halves are hit
  CHECK(lo < 0.8);
  CHECK(hi > 1.0);
}

TEST_CASE("copy task dimensions include the blank channel") {
  CHECK(copy_spec(12, 4, 0).input_dim() == 5);
  CHECK(copy_spec(12, 4, 0).target_dim() == 5);
  Rng rng(3);
  Dataset data = generate_examples(copy_spec(12, 4, 3), 6, rng);
  CHECK(data.inputs.shape() == std::vector<std::size_t>{6, 12, 5});
  CHECK(data.targets.shape() == std::vector<std::size_t>{6, 12, 5});
}

TEST_CASE("copy task with zero delay: target equals input") {
  Rng rng(5);
  Dataset data = generate_examples(copy_spec(10, 4, 0), 8, rng);
  CHECK(testutil::bitwise_equal(data.targets, data.inputs));
}

TEST_CASE("copy task rows are one-hot and the delay shifts content") {
  Rng rng(9);
  const std::size_t t_len = 10, symbols = 3, delay = 4;
  Dataset data = generate_examples(copy_spec(t_len, symbols, delay), 12, rng);
  const std::size_t classes = symbols + 1;
  const std::size_t blank = symbols;
  for (std::size_t i = 0; i < 12; ++i) {
    for (std::size_t t = 0; t < t_len; ++t) {
      double in_sum = 0.0, tgt_sum = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        in_sum += data.inputs.at(i, t, c);
        tgt_sum += data.targets.at(i, t, c);
        CHECK((data.inputs.at(i, t, c) == 0.0 ||
               data.inputs.at(i, t, c) == 1.0));
      }
      CHECK(in_sum == 1.0);    // one-hot input
      CHECK(tgt_sum == 1.0);   // one-hot target
      if (t < delay) {
        // before the content arrives the target is the blank symbol
        CHECK(data.targets.at(i, t, blank) == 1.0);
      } else {
        for (std::size_t c = 0; c < classes; ++c) {
          CHECK(data.targets.at(i, t, c) == data.inputs.at(i, t - delay, c));
        }
      }
    }
    // the content region uses real symbols, the tail is blank
    for (std::size_t t = 0; t < t_len - delay; ++t) {
      CHECK(data.inputs.at(i, t, blank) == 0.0);
    }
    for (std::size_t t = t_len - delay; t < t_len; ++t) {
      CHECK(data.inputs.at(i, t, blank) == 1.0);
    }
  }
}

TEST_CASE("dataset generation is deterministic in the seed") {
  for (TaskSpec spec : {adding_spec(15), copy_spec(15, 4, 2)}) {
    Rng a(123), b(123), c(124);
    Dataset da = generate_examples(spec, 20, a);
    Dataset db = generate_examples(spec, 20, b);
    Dataset dc = generate_examples(spec, 20, c);
    CHECK(testutil::bitwise_equal(da.inputs, db.inputs));
    CHECK(testutil::bitwise_equal(da.targets, db.targets));
    CHECK_FALSE(testutil::bitwise_equal(da.inputs, dc.inputs));
  }
}

TEST_CASE("generate_task splits train and validation from one stream") {
  TaskSpec spec = adding_spec(12);
  spec.train_size = 30;
  spec.val_size = 10;
  Rng rng(77);
  TaskData data = generate_task(spec, rng);
  CHECK(data.train.size() == 30);
  CHECK(data.val.size() == 10);

  // identical to generating 40 examples back to back
  Rng replay(77);
  Dataset all = generate_examples(spec, 40, replay);
  for (std::size_t t = 0; t < 12; ++t) {
    CHECK(data.train.inputs.at(0, t, 0) == all.inputs.at(0, t, 0));
    CHECK(data.val.inputs.at(0, t, 0) == all.inputs.at(30, t, 0));
  }
}

TEST_CASE("task validation errors name the offending field") {
  Rng rng(1);
  TaskSpec short_seq = adding_spec(1);
  testutil::expect_throw_containing(
      [&] { generate_examples(short_seq, 5, rng); }, "seq_len");

  TaskSpec tiny_alphabet = copy_spec(10, 1, 0);
  testutil::expect_throw_containing(
      [&] { generate_examples(tiny_alphabet, 5, rng); }, "n_symbols");

  TaskSpec long_delay = copy_spec(10, 4, 10);
  testutil::expect_throw_containing(
      [&] { generate_examples(long_delay, 5, rng); }, "copy_delay");

  testutil::expect_throw_containing(
      [&] { generate_examples(adding_spec(10), 0, rng); }, "count");
}

TEST_CASE("task kind names round trip") {
  CHECK(mbd::task_kind_from_string("adding") == TaskKind::kAddingProblem);
  CHECK(mbd::task_kind_from_string("copy") == TaskKind::kSequenceCopy);
  CHECK(mbd::to_string(TaskKind::kAddingProblem) == "adding");
  CHECK(mbd::to_string(TaskKind::kSequenceCopy) == "copy");
  testutil::expect_throw_containing(
      [&] { mbd::task_kind_from_string("speech"); }, "speech");
}
