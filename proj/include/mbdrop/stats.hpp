// Exact and Monte-Carlo analysis of the kept-unit ratio under block
// dropout. With N blocks and drop rate q the number of kept blocks is
// Binomial(N, 1-q); the kept ratio k/N has mean 1-q and standard
// deviation sqrt(q(1-q)/N). Small N makes that deviation large, which
// distinguishes macro-block dropout from per-unit dropout where N is
// huge and the ratio is effectively constant.

#pragma once

#include <cstddef>
#include <vector>

#include "mbdrop/tensor.hpp"

namespace mbd {

struct KeptRatioPmf {
  std::size_t n_blocks = 0;
  double q = 0.0;
  std::vector<double> prob;  // prob[k] = P(exactly k of n_blocks kept)

  double ratio(std::size_t k) const {
    return static_cast<double>(k) / static_cast<double>(n_blocks);
  }
};

struct KeptRatioMoments {
  double mean = 0.0;
  double stddev = 0.0;
};

struct KeptRatioHistogram {
  std::size_t n_blocks = 0;
  double q = 0.0;
  std::size_t trials = 0;
  std::vector<std::size_t> counts;  // counts[k], sums to trials

  double empirical_prob(std::size_t k) const {
    return static_cast<double>(counts[k]) / static_cast<double>(trials);
  }
};

// P(k kept of N) = C(N,k) (1-q)^k q^(N-k) for k = 0..N.
KeptRatioPmf kept_ratio_pmf(std::size_t n_blocks, double q);

// mean = 1-q, stddev = sqrt(q(1-q)/N).
KeptRatioMoments kept_ratio_moments(std::size_t n_blocks, double q);

// `trials` independent draws of N Bernoulli(1-q) blocks, bucketed by
// the exact support points k/N.
KeptRatioHistogram monte_carlo_kept_ratio(Rng& rng, std::size_t n_blocks,
                                          double q, std::size_t trials);

// Normal density with the kept-ratio moments, evaluated on the caller's
// grid. Degenerate when stddev is 0 (q = 0 or 1): infinite at the mean,
// zero elsewhere.
std::vector<double> gaussian_approximation(std::size_t n_blocks, double q,
                                           const std::vector<double>& grid);

}  // namespace mbd
