#pragma once

// Random metric instances checked against the brute-force oracles.

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "soap/metrics.hpp"
#include "soap/rng.hpp"

namespace metricsuite {

struct Deviation {
  double auc = 0.0;
  double kendall = 0.0;
  double pearson = 0.0;
  int instances = 0;
};

// Scores are drawn from a small value grid on half the instances so ties are
// common; labels always contain both classes.
inline Deviation run(int instances, std::uint64_t seed) {
  soap::Rng rng(seed);
  Deviation d;
  for (int t = 0; t < instances; ++t) {
    const int n = 2 + static_cast<int>(rng.below(199));
    const bool grid = t % 2 == 0;
    std::vector<double> s(n), x(n), y(n);
    std::vector<int> lab(n);
    for (int i = 0; i < n; ++i) {
      s[i] = grid ? static_cast<double>(rng.below(7)) / 6.0 : rng.uniform();
      x[i] = grid ? static_cast<double>(rng.below(5)) : rng.normal();
      y[i] = grid ? static_cast<double>(rng.below(5)) + 0.3 * x[i] : x[i] + rng.normal();
      lab[i] = rng.bernoulli(0.3) ? 1 : 0;
    }
    lab[0] = 1;
    lab[1] = 0;
    d.auc = std::max(d.auc, std::abs(soap::metrics::roc_auc(s, lab) - oracle::auc_pairs(s, lab)));
    const bool x_const = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    const bool y_const = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (!x_const && !y_const) {
      d.kendall = std::max(d.kendall, std::abs(soap::metrics::kendall_tau(x, y) - oracle::kendall_pairs(x, y)));
      d.pearson = std::max(d.pearson, std::abs(soap::metrics::pearson(x, y) - oracle::pearson_direct(x, y)));
    }
    ++d.instances;
  }
  return d;
}

}  // namespace metricsuite
