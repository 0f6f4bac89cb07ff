#include "mbdrop/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mbd {

namespace {

void check_params(const char* op, std::size_t n_blocks, double q) {
  if (n_blocks < 1) {
    throw std::invalid_argument(std::string(op) + ": n_blocks must be >= 1");
  }
  if (!(q >= 0.0 && q <= 1.0)) {
    throw std::invalid_argument(std::string(op) + ": q " + std::to_string(q) +
                                " outside [0, 1]");
  }
}

// C(n,k) p^k (1-p)^(n-k). Exact multiplicative form for small n,
// log-space via lgamma above n = 30 to avoid overflow.
double binomial_pmf(std::size_t n, std::size_t k, double p) {
  if (p == 0.0) return k == 0 ? 1.0 : 0.0;
  if (p == 1.0) return k == n ? 1.0 : 0.0;
  if (n <= 30) {
    double coeff = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
      coeff *= static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return coeff * std::pow(p, static_cast<double>(k)) *
           std::pow(1.0 - p, static_cast<double>(n - k));
  }
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  const double log_coeff =
      std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0);
  return std::exp(log_coeff + kd * std::log(p) +
                  (nd - kd) * std::log1p(-p));
}

}  // namespace

KeptRatioPmf kept_ratio_pmf(std::size_t n_blocks, double q) {
  check_params("kept_ratio_pmf", n_blocks, q);
  KeptRatioPmf pmf;
  pmf.n_blocks = n_blocks;
  pmf.q = q;
  pmf.prob.resize(n_blocks + 1);
  for (std::size_t k = 0; k <= n_blocks; ++k) {
    pmf.prob[k] = binomial_pmf(n_blocks, k, 1.0 - q);
  }
  return pmf;
}

KeptRatioMoments kept_ratio_moments(std::size_t n_blocks, double q) {
  check_params("kept_ratio_moments", n_blocks, q);
  KeptRatioMoments m;
  m.mean = 1.0 - q;
  m.stddev = std::sqrt(q * (1.0 - q) / static_cast<double>(n_blocks));
  return m;
}

KeptRatioHistogram monte_carlo_kept_ratio(Rng& rng, std::size_t n_blocks,
                                          double q, std::size_t trials) {
  check_params("monte_carlo_kept_ratio", n_blocks, q);
  if (trials < 1) {
    throw std::invalid_argument("monte_carlo_kept_ratio: trials must be >= 1");
  }
  KeptRatioHistogram hist;
  hist.n_blocks = n_blocks;
  hist.q = q;
  hist.trials = trials;
  hist.counts.assign(n_blocks + 1, 0);
  const double keep_prob = 1.0 - q;
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t kept = 0;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      if (rng.next_double() < keep_prob) ++kept;
    }
    ++hist.counts[kept];
  }
  return hist;
}

std::vector<double> gaussian_approximation(std::size_t n_blocks, double q,
                                           const std::vector<double>& grid) {
  check_params("gaussian_approximation", n_blocks, q);
  const KeptRatioMoments m = kept_ratio_moments(n_blocks, q);
  std::vector<double> density(grid.size(), 0.0);
  if (m.stddev == 0.0) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      density[i] = grid[i] == m.mean
                       ? std::numeric_limits<double>::infinity()
                       : 0.0;
    }
    return density;
  }
  const double inv_norm = 1.0 / (m.stddev * std::sqrt(2.0 * M_PI));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double z = (grid[i] - m.mean) / m.stddev;
    density[i] = inv_norm * std::exp(-0.5 * z * z);
  }
  return density;
}

}  // namespace mbd
