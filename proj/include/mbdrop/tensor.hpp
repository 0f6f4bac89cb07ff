// Dense row-major double tensors (rank 1..3) and the seeded PRNG that
// every stochastic routine in the library draws from.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mbd {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor ones(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t extent(std::size_t axis) const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  // rank-2 access
  double at(std::size_t i, std::size_t j) const;
  double& at(std::size_t i, std::size_t j);
  // rank-3 access
  double at(std::size_t b, std::size_t i, std::size_t j) const;
  double& at(std::size_t b, std::size_t i, std::size_t j);

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

// Elementwise ops; shape mismatches throw std::invalid_argument naming
// both shapes.
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor tanh_map(const Tensor& a);
Tensor sigmoid_map(const Tensor& a);

double sum_all(const Tensor& a);

double sigmoid(double z);

// Rank-2 matrix products. matmul_nt(a, b) = a * b^T and
// matmul_tn(a, b) = a^T * b avoid materializing transposes in the
// training hot path.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor matmul_tn(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// xoshiro256++ seeded through splitmix64. Identical seeds produce
// identical draw sequences on any platform; one generator per thread
// of execution, never shared.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Decorrelated substream for a given purpose (init, data, masks, ...).
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_u64();
  double next_double();  // uniform [0, 1), 53-bit resolution
  double uniform(double lo, double hi);
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t state_[4];
  std::uint64_t seed_;
};

// 0/1 tensor; each element is 1 with probability keep_prob.
Tensor bernoulli(Rng& rng, const std::vector<std::size_t>& shape,
                 double keep_prob);

}  // namespace mbd
