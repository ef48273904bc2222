#include <cmath>
#include <vector>

#include "doctest.h"
#include "slu/cells.hpp"
#include "slu/error.hpp"
#include "slu/numerics.hpp"
#include "slu/training.hpp"

using namespace slu;

namespace {

// Softmax evaluated in long double with the max shift, as a reference.
std::vector<long double> softmax_oracle(const std::vector<double>& z) {
  long double m = z[0];
  for (double v : z) m = std::max<long double>(m, v);
  std::vector<long double> e;
  long double sum = 0;
  for (double v : z) {
    e.push_back(std::exp(static_cast<long double>(v) - m));
    sum += e.back();
  }
  for (auto& v : e) v /= sum;
  return e;
}

}  // namespace

TEST_CASE("softmax of equal logits is uniform") {
  const RealVector p = softmax(std::vector<double>{0, 0, 0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("softmax survives huge logits") {
  const RealVector p = softmax(std::vector<double>{1000, 0});
  CHECK(std::isfinite(p[0]));
  CHECK(std::isfinite(p[1]));
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(p[1] < 1e-300);
}

TEST_CASE("softmax matches an extended-precision oracle") {
  SeededRng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(1 + rng.index(12));
    for (auto& v : z) v = rng.uniform(-50, 50);
    const RealVector p = softmax(z);
    const auto ref = softmax_oracle(z);
    double total = 0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      CHECK(std::fabs(p[i] - static_cast<double>(ref[i])) <= 1e-14);
      total += p[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("cross entropy examples") {
  CHECK(cross_entropy(std::vector<double>{1.0, 0.0}, 0) == doctest::Approx(0.0).epsilon(1e-11));
  CHECK(cross_entropy(std::vector<double>{0.5, 0.5}, 1) == doctest::Approx(std::log(2.0)));
  const double oracle = -std::log(0.7);
  CHECK(cross_entropy(std::vector<double>{0.1, 0.7, 0.2}, 1) == doctest::Approx(oracle));
  CHECK(cross_entropy(std::vector<double>{0.1, 0.7, 0.2}, 1) == doctest::Approx(0.356675).epsilon(1e-6));
}

TEST_CASE("cross entropy of a zero probability stays finite") {
  const double loss = cross_entropy(std::vector<double>{1.0, 0.0}, 1);
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("cross entropy rejects an out-of-range target") {
  CHECK_THROWS_AS(cross_entropy(std::vector<double>{0.5, 0.5}, 2), Error);
}

TEST_CASE("softmax cross-entropy gradient is p minus one-hot") {
  const std::vector<double> p{0.2, 0.5, 0.3};
  const RealVector g = softmax_cross_entropy_grad(p, 1);
  CHECK(g[0] == doctest::Approx(0.2));
  CHECK(g[1] == doctest::Approx(-0.5));
  CHECK(g[2] == doctest::Approx(0.3));
}

TEST_CASE("finite differences on a quadratic") {
  std::vector<double> theta{3.0, -2.0};
  std::vector<double> analytic{3.0, -2.0};
  auto loss = [&] { return 0.5 * (theta[0] * theta[0] + theta[1] * theta[1]); };
  const std::vector<GradCheckTarget> targets{{"theta", theta, analytic}};
  const auto reports = finite_diff_check(loss, targets, 1e-5);
  REQUIRE(reports.size() == 1);
  CHECK(reports[0].max_relative_error < 1e-8);
  CHECK(theta[0] == 3.0);
  CHECK(theta[1] == -2.0);
}

TEST_CASE("finite differences on a constant loss") {
  std::vector<double> theta{0.3, 0.1, -4.0};
  std::vector<double> analytic(3, 0.0);
  const std::vector<GradCheckTarget> targets{{"theta", theta, analytic}};
  const auto reports = finite_diff_check([] { return 7.0; }, targets, 1e-5);
  CHECK(reports[0].max_relative_error == 0.0);
  for (double n : reports[0].numeric) CHECK(n == 0.0);
}

TEST_CASE("finite differences flag a wrong gradient") {
  std::vector<double> theta{1.0, 2.0};
  std::vector<double> analytic{2.0, 4.0 * 1.01};
  auto loss = [&] { return theta[0] * theta[0] + theta[1] * theta[1]; };
  const std::vector<GradCheckTarget> targets{{"theta", theta, analytic}};
  const auto reports = finite_diff_check(loss, targets, 1e-5);
  CHECK(reports[0].max_relative_error > 5e-3);
  CHECK(reports[0].worst_index == 1);
}

TEST_CASE("seeded generator is reproducible") {
  SeededRng a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  SeededRng d(5), e(6);
  bool differs = false;
  for (int i = 0; i < 10; ++i) differs |= d.next_u64() != e.next_u64();
  CHECK(differs);
}

TEST_CASE("uniform draws stay in range") {
  SeededRng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform(-0.08, 0.08);
    CHECK(u >= -0.08);
    CHECK(u < 0.08);
    CHECK(rng.index(7) < 7);
  }
}

TEST_CASE("dropout outside training is the identity") {
  SeededRng rng(1);
  const std::vector<double> v{1, -2, 3};
  CHECK(dropout_apply(v, 0.5, false, rng).values() == v);
  CHECK(dropout_apply(v, 0.0, true, rng).values() == v);
}

TEST_CASE("inverted dropout preserves the mean") {
  SeededRng rng(3);
  const std::vector<double> ones(100000, 1.0);
  const RealVector out = dropout_apply(ones, 0.5, true, rng);
  double sum = 0;
  for (double v : out.values()) {
    CHECK((v == 0.0 || v == 2.0));
    sum += v;
  }
  const double mean = sum / ones.size();
  CHECK(mean >= 0.98);
  CHECK(mean <= 1.02);
}

TEST_CASE("gradient clipping bounds the global norm") {
  SeededRng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    RealMatrix a(3, 4);
    RealVector b(5);
    fill_uniform(a.span(), -10, 10, rng);
    fill_uniform(b.span(), -10, 10, rng);
    const std::vector<double> before_a = a.values();
    TensorList list;
    append_tensor(list, "a", a);
    append_tensor(list, "b", b);
    const double clip = rng.uniform(0.1, 30.0);
    const double norm = clip_global_norm(list, clip);
    double sq = 0;
    for (const auto& t : list) {
      for (double v : t.values) sq += v * v;
    }
    CHECK(std::sqrt(sq) <= clip + 1e-9);
    if (norm <= clip) {
      CHECK(a.values() == before_a);
    } else {
      // Direction is kept.
      CHECK(a(0, 0) / before_a[0] == doctest::Approx(clip / norm));
    }
  }
}

TEST_CASE("first Adam step moves each coordinate by the step size") {
  RealVector p{1.0, -1.0, 0.5};
  RealVector g{0.3, -2.0, 1e-3};
  TensorList params, grads;
  append_tensor(params, "p", p);
  append_tensor(grads, "p", g);
  TrainConfig tc;
  Adam adam(tc, params);
  adam.step(params, grads);
  // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  CHECK(p[0] == doctest::Approx(1.0 - 1e-3 * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(-1.0 + 1e-3 * 2.0 / (2.0 + 1e-8)).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(0.5 - 1e-3 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("matrix helpers") {
  RealMatrix m(2, 3);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) m(r, c) = static_cast<double>(r * 3 + c + 1);
  RealVector y(2);
  mat_vec_acc(m, std::vector<double>{1, 0, -1}, y.span());
  CHECK(y[0] == -2.0);
  CHECK(y[1] == -2.0);
  RealVector x(3);
  mat_t_vec_acc(m, std::vector<double>{1, 1}, x.span());
  CHECK(x.values() == std::vector<double>{5, 7, 9});
  RealMatrix g(2, 3);
  outer_acc(g, std::vector<double>{1, 2}, std::vector<double>{3, 4, 5});
  CHECK(g(1, 2) == 10.0);
  CHECK(concat(std::vector<double>{1}, std::vector<double>{2, 3}).values() ==
        std::vector<double>{1, 2, 3});
}
