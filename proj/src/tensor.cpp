#include "mbdrop/tensor.hpp"

#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mbd {

namespace {

std::size_t checked_numel(const std::vector<std::size_t>& shape) {
  if (shape.empty() || shape.size() > 3) {
    throw std::invalid_argument("tensor rank must be 1..3, got shape " +
                                shape_to_string(shape));
  }
  std::size_t n = 1;
  for (std::size_t e : shape) {
    if (e == 0) {
      throw std::invalid_argument("tensor extents must be positive, got " +
                                  shape_to_string(shape));
    }
    n *= e;
  }
  return n;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(checked_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_numel(shape_) != data_.size()) {
    throw std::invalid_argument("tensor data length " +
                                std::to_string(data_.size()) +
                                " does not match shape " +
                                shape_to_string(shape_));
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  return Tensor(std::move(shape));
}

Tensor Tensor::ones(std::vector<std::size_t> shape) {
  return full(std::move(shape), 1.0);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  Tensor t(std::move(shape));
  for (auto& v : t.data_) v = value;
  return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw std::invalid_argument("axis " + std::to_string(axis) +
                                " out of range for shape " +
                                shape_to_string(shape_));
  }
  return shape_[axis];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  assert(rank() == 2);
  return data_[i * shape_[1] + j];
}

double& Tensor::at(std::size_t i, std::size_t j) {
  assert(rank() == 2);
  return data_[i * shape_[1] + j];
}

double Tensor::at(std::size_t b, std::size_t i, std::size_t j) const {
  assert(rank() == 3);
  return data_[(b * shape_[1] + i) * shape_[2] + j];
}

double& Tensor::at(std::size_t b, std::size_t i, std::size_t j) {
  assert(rank() == 3);
  return data_[(b * shape_[1] + i) * shape_[2] + j];
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
  check_same_shape("elementwise_mul", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor scale(const Tensor& a, double factor) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
  return out;
}

Tensor tanh_map(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return out;
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

Tensor sigmoid_map(const Tensor& a) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid(out[i]);
  return out;
}

double sum_all(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
  return s;
}

namespace {

void check_matmul_ranks(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument(std::string(op) + ": expects rank-2 tensors, got " +
                                shape_to_string(a.shape()) + " and " +
                                shape_to_string(b.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matmul_ranks("matmul", a, b);
  const std::size_t m = a.extent(0), k = a.extent(1);
  const std::size_t k2 = b.extent(0), n = b.extent(1);
  if (k != k2) {
    throw std::invalid_argument("matmul: inner dimensions differ, " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
  Tensor out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    double* orow = po + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      const double* brow = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check_matmul_ranks("matmul_nt", a, b);
  const std::size_t m = a.extent(0), k = a.extent(1);
  const std::size_t n = b.extent(0), k2 = b.extent(1);
  if (k != k2) {
    throw std::invalid_argument("matmul_nt: inner dimensions differ, " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
  Tensor out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    double* orow = po + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
      orow[j] = acc;
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  check_matmul_ranks("matmul_tn", a, b);
  const std::size_t k = a.extent(0), m = a.extent(1);
  const std::size_t k2 = b.extent(0), n = b.extent(1);
  if (k != k2) {
    throw std::invalid_argument("matmul_tn: inner dimensions differ, " +
                                shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
  Tensor out({m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t kk = 0; kk < k; ++kk) {
    const double* arow = pa + kk * m;
    const double* brow = pb + kk * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aki = arow[i];
      double* orow = po + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aki * brow[j];
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw std::invalid_argument("transpose: expects a rank-2 tensor, got " +
                                shape_to_string(a.shape()));
  }
  const std::size_t m = a.extent(0), n = a.extent(1);
  Tensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  return out;
}

namespace {

inline std::uint64_t rotl64(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t s = seed;
  for (auto& word : state_) word = splitmix64(s);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t s = stream_id;
  return Rng(seed ^ splitmix64(s));
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl64(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl64(state_[3], 45);
  return result;
}

double Rng::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * next_double();
}

Tensor bernoulli(Rng& rng, const std::vector<std::size_t>& shape,
                 double keep_prob) {
  if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) {
    throw std::invalid_argument("bernoulli: keep_prob " +
                                std::to_string(keep_prob) +
                                " outside [0, 1]");
  }
  Tensor out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = rng.next_double() < keep_prob ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace mbd
