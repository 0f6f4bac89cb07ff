#include <vector>

#include "doctest.h"
#include "mbdrop/gradcheck.hpp"

using mbd::CheckResult;
using mbd::run_gradient_checks;

TEST_CASE("gradient checks pass and report sane tolerances") {
  const std::vector<CheckResult> results = run_gradient_checks(1);
  REQUIRE(results.size() == 3);
  CHECK(results[0].name == "dropout_map");
  CHECK(results[1].name == "lstm_cell");
  CHECK(results[2].name == "stack_bptt");
  for (const CheckResult& r : results) {
    CHECK(r.passed);
    CHECK(r.max_rel_err < r.tolerance);
    CHECK(r.max_rel_err >= 0.0);
    CHECK(r.tolerance <= 1e-5);
  }
}

TEST_CASE("gradient checks pass across many seeds") {
  for (std::uint64_t seed = 2; seed <= 8; ++seed) {
    for (const CheckResult& r : run_gradient_checks(seed)) {
      CHECK_MESSAGE(r.passed, r.name << " failed at seed " << seed
                                     << " with " << r.max_rel_err);
    }
  }
}

TEST_CASE("the corrupt hook makes the stack check fail") {
  const std::vector<CheckResult> results =
      run_gradient_checks(1, /*corrupt=*/true);
  REQUIRE(results.size() == 3);
  CHECK(results[0].passed);
  CHECK(results[1].passed);
  CHECK_FALSE(results[2].passed);  // negative control: must trip
  CHECK(results[2].max_rel_err >= results[2].tolerance);
}

TEST_CASE("gradient check reports are deterministic in the seed") {
  const auto a = run_gradient_checks(5);
  const auto b = run_gradient_checks(5);
  const auto c = run_gradient_checks(6);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].max_rel_err == b[i].max_rel_err);
  }
  bool any_difference = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    any_difference = any_difference || (a[i].max_rel_err != c[i].max_rel_err);
  }
  CHECK(any_difference);
}
