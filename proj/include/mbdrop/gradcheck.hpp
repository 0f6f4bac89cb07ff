// Self-contained finite-difference verification of the analytic
// gradients: the frozen dropout map, a single LSTM cell, and
// backpropagation through a two-layer stack with macro-block dropout.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mbd {

struct CheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

// Runs every check with randomness derived from `seed`. When `corrupt`
// is set, a small error is injected into one analytic gradient so the
// stack check must fail — a negative control proving the comparison
// has teeth.
std::vector<CheckResult> run_gradient_checks(std::uint64_t seed,
                                             bool corrupt = false);

}  // namespace mbd
