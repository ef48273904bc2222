#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace slu {

class RealVector {
 public:
  RealVector() = default;
  explicit RealVector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  RealVector(std::initializer_list<double> values) : data_(values) {}
  explicit RealVector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t dim() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  operator std::span<double>() { return data_; }
  operator std::span<const double>() const { return data_; }

  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const RealVector&, const RealVector&) = default;

 private:
  std::vector<double> data_;
};

// Row-major dense matrix.
class RealMatrix {
 public:
  RealMatrix() = default;
  RealMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> span() { return data_; }
  std::span<const double> span() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  void fill(double value) { std::fill(data_.begin(), data_.end(), value); }

  friend bool operator==(const RealMatrix&, const RealMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// A named view onto trainable storage. Parameter sets and their gradient
// buffers produce these in identical order, which is what lets the optimizer,
// the checkpoint writer and the gradient checker treat every model uniformly.
struct NamedTensor {
  std::string name;
  std::span<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
};
using TensorList = std::vector<NamedTensor>;

void append_tensor(TensorList& out, const std::string& name, RealMatrix& m);
void append_tensor(TensorList& out, const std::string& name, RealVector& v);

// y += M x
void mat_vec_acc(const RealMatrix& m, std::span<const double> x, std::span<double> y);
// x_grad += M^T y_grad
void mat_t_vec_acc(const RealMatrix& m, std::span<const double> y_grad,
                std::span<double> x_grad);
// g += a b^T
void outer_acc(RealMatrix& g, std::span<const double> a, std::span<const double> b);
void add_to(std::span<double> dst, std::span<const double> src);
double dot(std::span<const double> a, std::span<const double> b);
RealVector concat(std::span<const double> a, std::span<const double> b);

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

RealVector softmax(std::span<const double> logits);

inline constexpr double kCrossEntropyEpsilon = 1e-12;

double cross_entropy(std::span<const double> probs, std::size_t target);

// d cross_entropy(softmax(z), target) / dz, including the epsilon clamp.
RealVector softmax_cross_entropy_grad(std::span<const double> probs, std::size_t target);

std::size_t argmax(std::span<const double> values);

bool all_finite(std::span<const double> values);

// Mersenne Twister (64-bit) engine with distribution transforms written out
// here, so draws are identical on every standard library.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // [0, 1) with 53 bits of resolution.
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  // Box-Muller; consumes two draws per call.
  double normal();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return unit() < p; }

  // Independent child stream.
  SeededRng fork() { return SeededRng(next_u64()); }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

void fill_uniform(std::span<double> values, double lo, double hi, SeededRng& rng);

struct GradCheckReport {
  std::string parameter;
  double max_relative_error = 0.0;
  std::vector<double> analytic;  // leading entries, for display
  std::vector<double> numeric;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckTarget {
  std::string name;
  std::span<double> values;          // perturbed in place, restored afterwards
  std::span<const double> analytic;  // gradient computed by the caller
};

// Central differences (f(θ+ε) − f(θ−ε)) / 2ε for every entry, relative error
// |a − n| / max(|a|, |n|, 1e-8).
std::vector<GradCheckReport> finite_diff_check(const std::function<double()>& loss_fn,
                                               std::span<const GradCheckTarget> targets,
                                               double epsilon = 1e-5);

}  // namespace slu
