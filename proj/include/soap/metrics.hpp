#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace soap::metrics {

/// Mann-Whitney form: (concordant + 0.5 * tied) / (pos * neg) over all
/// positive/negative pairs. O(n log n). Throws kSingleClass / kLengthMismatch.
double roc_auc(std::span<const double> scores, std::span<const int> labels);
double roc_auc(std::span<const float> scores, std::span<const std::uint8_t> labels);

struct RocPoint {
  double fpr;
  double tpr;
  double threshold;  // scores >= threshold predicted positive; +inf at (0,0)
};

/// One point per distinct score (descending), starting at (0,0).
using RocCurve = std::vector<RocPoint>;
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels);
double trapezoid_area(const RocCurve& curve);
std::string roc_curve_csv(const RocCurve& curve);

/// Sample Pearson correlation. Throws kDegenerateInput for n < 2 or a
/// constant list, kLengthMismatch on unequal lengths.
double pearson(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b (tie corrected), Knight's O(n log n) algorithm.
/// Throws kDegenerateInput if every pair is tied in x or in y.
double kendall_tau(std::span<const double> x, std::span<const double> y);

/// Fraction of pixels whose sigmoid-probability side of `threshold` matches
/// the label; scores are probabilities.
double accuracy(std::span<const float> probabilities, std::span<const std::uint8_t> labels, double threshold = 0.5);

}  // namespace soap::metrics
