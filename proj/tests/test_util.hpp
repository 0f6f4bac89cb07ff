#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "mbdrop/tensor.hpp"

namespace testutil {

inline mbd::Tensor random_tensor(std::vector<std::size_t> shape, mbd::Rng& rng,
                                 double lo = -1.0, double hi = 1.0) {
  mbd::Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Relative error with a unit floor on the denominator: strict where
// values are O(1) or larger, absolute below that so finite-difference
// roundoff on near-zero entries does not register as disagreement.
inline double rel_err(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1.0});
  return std::fabs(a - b) / denom;
}

inline bool bitwise_equal(const mbd::Tensor& a, const mbd::Tensor& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

template <typename Fn>
void expect_throw_containing(Fn&& fn, const std::string& needle) {
  try {
    fn();
    FAIL_CHECK("expected an exception mentioning '" << needle << "'");
  } catch (const std::exception& e) {
    const std::string what = e.what();
    CHECK_MESSAGE(what.find(needle) != std::string::npos,
                  "exception text '" << what << "' lacks '" << needle << "'");
  }
}

// Same check, but also requires the exception's concrete type.
template <typename Exception, typename Fn>
void expect_throw_typed(Fn&& fn, const std::string& needle) {
  try {
    fn();
    FAIL_CHECK("expected an exception mentioning '" << needle << "'");
  } catch (const Exception& e) {
    const std::string what = e.what();
    CHECK_MESSAGE(what.find(needle) != std::string::npos,
                  "exception text '" << what << "' lacks '" << needle << "'");
  } catch (const std::exception& e) {
    FAIL_CHECK("exception '" << e.what() << "' has the wrong type");
  }
}

}  // namespace testutil
