#include <doctest.h>

#include <cmath>
#include <limits>

#include "../metric_suite.hpp"
#include "soap/error.hpp"
#include "soap/metrics.hpp"

using namespace soap;
using namespace soap::metrics;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no exception");
  return ErrorKind::kIoError;
}

}  // namespace

TEST_CASE("roc_auc examples and errors") {
  CHECK(roc_auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}) == 0.0);
  CHECK(roc_auc(std::vector<double>(6, 0.4), std::vector<int>{1, 0, 1, 0, 0, 0}) == 0.5);
  CHECK(kind_of([] { roc_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}); }) == ErrorKind::kSingleClass);
  CHECK(kind_of([] { roc_auc(std::vector<double>{1, 2}, std::vector<int>{1}); }) == ErrorKind::kLengthMismatch);
  const std::vector<float> fs = {0.2f, 0.8f, 0.5f};
  const std::vector<std::uint8_t> fl = {0, 1, 0};
  CHECK(roc_auc(fs, fl) == 1.0);
}

TEST_CASE("metric oracles on 1000 random instances with ties") {
  const auto d = metricsuite::run(1000, 42);
  CHECK(d.instances == 1000);
  CHECK(d.auc <= 1e-12);
  CHECK(d.kendall <= 1e-12);
  CHECK(d.pearson <= 1e-12);
}

TEST_CASE("roc_auc invariances") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(60), neg(60), mono(60);
    std::vector<int> y(60);
    for (int i = 0; i < 60; ++i) {
      s[i] = rng.uniform();
      neg[i] = -s[i];
      mono[i] = std::exp(3.0 * s[i]) - 7.0;
      y[i] = i % 3 == 0;
    }
    const double a = roc_auc(s, y);
    CHECK(roc_auc(mono, y) == a);
    CHECK(a + roc_auc(neg, y) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("roc_curve shape, endpoints and trapezoid area") {
  const auto perfect = roc_curve(std::vector<double>{0.9, 0.8, 0.2, 0.1}, std::vector<int>{1, 1, 0, 0});
  bool through_corner = false;
  for (const auto& p : perfect) through_corner |= p.fpr == 0.0 && p.tpr == 1.0;
  CHECK(through_corner);

  const auto flat = roc_curve(std::vector<double>(5, 0.3), std::vector<int>{1, 0, 0, 1, 0});
  REQUIRE(flat.size() == 2);
  CHECK(flat[0].fpr == 0.0);
  CHECK(flat[0].tpr == 0.0);
  CHECK(std::isinf(flat[0].threshold));
  CHECK(flat[1].fpr == 1.0);
  CHECK(flat[1].tpr == 1.0);

  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> s(150);
    std::vector<int> y(150);
    for (int i = 0; i < 150; ++i) {
      s[i] = t % 2 ? rng.uniform() : static_cast<double>(rng.below(10));
      y[i] = rng.bernoulli(0.4);
    }
    y[0] = 1;
    y[1] = 0;
    const auto c = roc_curve(s, y);
    CHECK(std::abs(trapezoid_area(c) - roc_auc(s, y)) <= 1e-12);
    for (std::size_t i = 1; i < c.size(); ++i) {
      CHECK(c[i].fpr >= c[i - 1].fpr);
      CHECK(c[i].tpr >= c[i - 1].tpr);
      CHECK(c[i].threshold < c[i - 1].threshold);
    }
    CHECK(c.back().fpr == 1.0);
    CHECK(c.back().tpr == 1.0);
  }
  const auto csv = roc_curve_csv(perfect);
  CHECK(csv.rfind("fpr,tpr,threshold\n", 0) == 0);
}

TEST_CASE("pearson and kendall examples") {
  const std::vector<double> x = {1, 2, 3, 5, 8};
  std::vector<double> nx;
  for (double v : x) nx.push_back(-v);
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pearson(x, nx) == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> a = {1, 2, 3, 4}, b = {2, 1, 4, 3};
  // hand computation: cov 0.8*... -> r = 0.6
  CHECK(std::abs(pearson(a, b) - 0.6) <= 1e-12);
  CHECK(kendall_tau(x, x) == 1.0);
  CHECK(kendall_tau(x, nx) == -1.0);
  // 6 pairs: 4 concordant, 2 discordant
  CHECK(std::abs(kendall_tau(a, b) - 1.0 / 3.0) <= 1e-12);
  CHECK(kind_of([] { pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}); }) ==
        ErrorKind::kDegenerateInput);
  CHECK(kind_of([] { pearson(std::vector<double>{1}, std::vector<double>{1}); }) == ErrorKind::kDegenerateInput);
  CHECK(kind_of([] { kendall_tau(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}); }) ==
        ErrorKind::kDegenerateInput);
  CHECK(kind_of([] { kendall_tau(std::vector<double>{1, 2}, std::vector<double>{1}); }) ==
        ErrorKind::kLengthMismatch);
}

TEST_CASE("correlations are symmetric and permutation invariant") {
  Rng rng(4);
  std::vector<double> x(40), y(40);
  for (int i = 0; i < 40; ++i) {
    x[i] = static_cast<double>(rng.below(6));
    y[i] = x[i] + static_cast<double>(rng.below(4));
  }
  std::vector<int> perm(40);
  for (int i = 0; i < 40; ++i) perm[i] = i;
  rng.shuffle(perm.begin(), perm.end());
  std::vector<double> px(40), py(40);
  for (int i = 0; i < 40; ++i) {
    px[i] = x[perm[i]];
    py[i] = y[perm[i]];
  }
  CHECK(kendall_tau(x, y) == doctest::Approx(kendall_tau(y, x)).epsilon(1e-14));
  CHECK(kendall_tau(x, y) == doctest::Approx(kendall_tau(px, py)).epsilon(1e-14));
  CHECK(pearson(x, y) == doctest::Approx(pearson(py, px)).epsilon(1e-14));
}

TEST_CASE("accuracy") {
  const std::vector<float> p = {0.9f, 0.2f, 0.6f, 0.4f};
  const std::vector<std::uint8_t> y = {1, 0, 0, 0};
  CHECK(accuracy(p, y) == 0.75);
  CHECK(accuracy(p, y, 0.7) == 1.0);
}
