#pragma once

// Squared-error gradient-boosted regression trees over architecture features.

#include <cstdint>
#include <string>
#include <vector>

#include "soap/cellspace.hpp"
#include "soap/soapcore.hpp"

namespace soap::gbpredictor {

struct PredictorHyper {
  int n_trees = 200;
  int max_depth = 4;
  double shrinkage = 0.1;
  int min_samples_leaf = 2;
  std::uint64_t seed = 0;  // fold assignment in cross_validate

  void check() const;
};

/// Internal nodes send x[feature] <= threshold left. Leaves have feature -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double eval(const std::vector<float>& x) const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct PredictorModel {
  std::size_t dim = 0;
  double base = 0.0;  // training-target mean
  double shrinkage = 0.1;
  std::vector<Tree> trees;

  friend bool operator==(const PredictorModel&, const PredictorModel&) = default;
};

struct FitResult {
  PredictorModel model;
  std::vector<double> round_mse;  // training MSE after each kept tree
  double base_mse = 0.0;          // before any tree
};

/// Boosting stops early once a round's tree cannot split (its residual fit
/// would be a constant). Throws kShapeMismatch / kInsufficientData.
FitResult fit(const std::vector<std::vector<float>>& features, const std::vector<double>& targets,
              const PredictorHyper& hyper);

/// Throws kDimensionMismatch when x has the wrong length.
double predict(const PredictorModel& model, const std::vector<float>& x);
std::vector<double> predict(const PredictorModel& model, const std::vector<std::vector<float>>& xs);

struct FoldStats {
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  double pearson = 0.0;  // NaN when the held-out predictions or targets are constant
  double kendall = 0.0;
};

struct CvResult {
  double mean_pearson = 0.0;
  double mean_kendall = 0.0;
  std::vector<FoldStats> folds;
};

/// Folds are assigned per architecture hash (seeded), so augmented copies of
/// one arch never straddle train and test. Means skip undefined folds.
CvResult cross_validate(const std::vector<soapcore::PerfRecord>& records, const cellspace::SpaceConfig& space,
                        int folds, const PredictorHyper& hyper);

std::vector<std::vector<float>> features_of(const std::vector<soapcore::PerfRecord>& records,
                                            const cellspace::SpaceConfig& space);
std::vector<double> targets_of(const std::vector<soapcore::PerfRecord>& records);

/// `SNGB 1` header, then one tree node per line; doubles in shortest
/// round-trip form so read(write(m)) == m.
std::string model_text(const PredictorModel& model);
PredictorModel parse_model_text(const std::string& text);

}  // namespace soap::gbpredictor
