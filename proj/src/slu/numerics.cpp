#include "slu/numerics.hpp"

#include <limits>
#include <numbers>

#include "slu/error.hpp"

namespace slu {

void append_tensor(TensorList& out, const std::string& name, RealMatrix& m) {
  out.push_back({name, m.span(), m.rows(), m.cols()});
}

void append_tensor(TensorList& out, const std::string& name, RealVector& v) {
  out.push_back({name, v.span(), v.dim(), 1});
}

void mat_vec_acc(const RealMatrix& m, std::span<const double> x, std::span<double> y) {
  const std::size_t cols = m.cols();
  const double* w = m.span().data();
  for (std::size_t r = 0; r < m.rows(); ++r, w += cols) {
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sum += w[c] * x[c];
    y[r] += sum;
  }
}

void mat_t_vec_acc(const RealMatrix& m, std::span<const double> y_grad,
                   std::span<double> x_grad) {
  const std::size_t cols = m.cols();
  const double* w = m.span().data();
  for (std::size_t r = 0; r < m.rows(); ++r, w += cols) {
    const double g = y_grad[r];
    if (g == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) x_grad[c] += w[c] * g;
  }
}

void outer_acc(RealMatrix& g, std::span<const double> a, std::span<const double> b) {
  const std::size_t cols = g.cols();
  double* out = g.span().data();
  for (std::size_t r = 0; r < g.rows(); ++r, out += cols) {
    const double s = a[r];
    if (s == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) out[c] += s * b[c];
  }
}

void add_to(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

RealVector concat(std::span<const double> a, std::span<const double> b) {
  RealVector out(a.size() + b.size());
  std::copy(a.begin(), a.end(), out.values().begin());
  std::copy(b.begin(), b.end(), out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

RealVector softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax: empty input");
  const double peak = *std::max_element(logits.begin(), logits.end());
  RealVector out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - peak);
    total += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= total;
  return out;
}

double cross_entropy(std::span<const double> probs, std::size_t target) {
  require(target < probs.size(), "cross_entropy: target " + std::to_string(target) +
                                     " out of range for " + std::to_string(probs.size()) +
                                     " classes");
  return -std::log(probs[target] + kCrossEntropyEpsilon);
}

RealVector softmax_cross_entropy_grad(std::span<const double> probs, std::size_t target) {
  require(target < probs.size(), "softmax_cross_entropy_grad: target out of range");
  // -log(p_t + eps) differentiated through the softmax is (p_t / (p_t + eps)) (p - e_t).
  const double scale = probs[target] / (probs[target] + kCrossEntropyEpsilon);
  RealVector grad(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    grad[i] = scale * (probs[i] - (i == target ? 1.0 : 0.0));
  }
  return grad;
}

std::size_t argmax(std::span<const double> values) {
  require(!values.empty(), "argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

double SeededRng::normal() {
  // 1 - unit() lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - unit();
  const double u2 = unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t SeededRng::index(std::size_t n) {
  require(n > 0, "SeededRng::index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return static_cast<std::size_t>(draw % bound);
}

void fill_uniform(std::span<double> values, double lo, double hi, SeededRng& rng) {
  for (double& v : values) v = rng.uniform(lo, hi);
}

std::vector<GradCheckReport> finite_diff_check(const std::function<double()>& loss_fn,
                                               std::span<const GradCheckTarget> targets,
                                               double epsilon) {
  require(epsilon >= 1e-6 && epsilon <= 1e-3,
          "finite_diff_check: epsilon must lie in [1e-6, 1e-3]");
  constexpr std::size_t kSamples = 8;
  std::vector<GradCheckReport> reports;
  reports.reserve(targets.size());
  for (const GradCheckTarget& target : targets) {
    require(target.values.size() == target.analytic.size(),
            "finite_diff_check: gradient shape mismatch for " + target.name);
    GradCheckReport report;
    report.parameter = target.name;
    for (std::size_t i = 0; i < target.values.size(); ++i) {
      const double saved = target.values[i];
      target.values[i] = saved + epsilon;
      const double plus = loss_fn();
      target.values[i] = saved - epsilon;
      const double minus = loss_fn();
      target.values[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        fail(ErrorKind::kNumeric, "finite_diff_check: non-finite loss while perturbing " +
                                      target.name + "[" + std::to_string(i) + "]");
      }
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double analytic = target.analytic[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > report.max_relative_error || i == 0) {
        report.max_relative_error = rel;
        report.worst_index = i;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
      if (report.analytic.size() < kSamples) {
        report.analytic.push_back(analytic);
        report.numeric.push_back(numeric);
      }
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace slu
