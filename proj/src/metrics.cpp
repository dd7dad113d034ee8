#include "soap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <sstream>

#include "soap/error.hpp"

namespace soap::metrics {

namespace {

template <class Score, class Label>
double auc_impl(std::span<const Score> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorKind::kLengthMismatch, "roc_auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  std::uint64_t pos = 0, neg = 0, twice_num = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::uint64_t gp = 0, gn = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]]) ++gp; else ++gn;
      ++j;
    }
    // positives in this tie group beat every negative seen so far, tie the group's
    twice_num += 2 * gp * neg + gp * gn;
    pos += gp;
    neg += gn;
    i = j;
  }
  if (pos == 0 || neg == 0) throw Error(ErrorKind::kSingleClass, "roc_auc needs both classes present");
  return static_cast<double>(twice_num) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

// Counts exchanges needed to sort v (merge sort), sorting v in place.
std::uint64_t count_swaps(std::vector<double>& v, std::vector<double>& tmp, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = count_swaps(v, tmp, lo, mid) + count_swaps(v, tmp, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      tmp[k++] = v[j++];
    } else {
      tmp[k++] = v[i++];
    }
  }
  while (i < mid) tmp[k++] = v[i++];
  while (j < hi) tmp[k++] = v[j++];
  std::copy(tmp.begin() + static_cast<std::ptrdiff_t>(lo), tmp.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

std::uint64_t tied_pairs_sorted(const std::vector<double>& v) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const std::uint64_t t = j - i;
    total += t * (t - 1) / 2;
    i = j;
  }
  return total;
}

}  // namespace

double roc_auc(std::span<const double> scores, std::span<const int> labels) { return auc_impl(scores, labels); }

double roc_auc(std::span<const float> scores, std::span<const std::uint8_t> labels) {
  return auc_impl(scores, labels);
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorKind::kLengthMismatch, "roc_curve: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  const auto total_pos = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
  const std::size_t total_neg = n - total_pos;
  if (total_pos == 0 || total_neg == 0) throw Error(ErrorKind::kSingleClass, "roc_curve needs both classes present");
  RocCurve curve{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    const double t = scores[order[i]];
    while (i < n && scores[order[i]] == t) {
      if (labels[order[i]]) ++tp; else ++fp;
      ++i;
    }
    curve.push_back({static_cast<double>(fp) / static_cast<double>(total_neg),
                     static_cast<double>(tp) / static_cast<double>(total_pos), t});
  }
  return curve;
}

double trapezoid_area(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  return area;
}

std::string roc_curve_csv(const RocCurve& curve) {
  std::ostringstream out;
  out.precision(17);
  out << "fpr,tpr,threshold\n";
  for (const auto& p : curve) {
    out << p.fpr << ',' << p.tpr << ',';
    if (std::isinf(p.threshold)) out << "inf"; else out << p.threshold;
    out << '\n';
  }
  return out.str();
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::kLengthMismatch, "pearson: lists differ in length");
  if (x.size() < 2) throw Error(ErrorKind::kDegenerateInput, "pearson needs at least 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::kDegenerateInput, "pearson undefined for a constant list");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::kLengthMismatch, "kendall_tau: lists differ in length");
  const std::size_t n = x.size();
  if (n < 2) throw Error(ErrorKind::kDegenerateInput, "kendall_tau needs at least 2 points");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]); });

  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  std::uint64_t n1 = 0, n3 = 0;  // pairs tied in x, tied in both
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    n1 += static_cast<std::uint64_t>(j - i) * (j - i - 1) / 2;
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && y[order[b]] == y[order[a]]) ++b;
      n3 += static_cast<std::uint64_t>(b - a) * (b - a - 1) / 2;
      a = b;
    }
    i = j;
  }
  std::vector<double> ys(n), tmp(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const std::uint64_t swaps = count_swaps(ys, tmp, 0, n);
  const std::uint64_t n2 = tied_pairs_sorted(ys);
  if (n1 == n0 || n2 == n0) throw Error(ErrorKind::kDegenerateInput, "kendall_tau undefined when all pairs tie");
  // concordant - discordant = n0 - n1 - n2 + n3 - 2*swaps
  const double numer = static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
                       static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
  const double denom = std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
  return std::clamp(numer / denom, -1.0, 1.0);
}

double accuracy(std::span<const float> probabilities, std::span<const std::uint8_t> labels, double threshold) {
  if (probabilities.size() != labels.size())
    throw Error(ErrorKind::kLengthMismatch, "accuracy: lengths differ");
  if (probabilities.empty()) throw Error(ErrorKind::kDegenerateInput, "accuracy of an empty list");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if ((probabilities[i] >= threshold) == (labels[i] != 0)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace soap::metrics
