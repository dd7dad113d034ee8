#include "soap/gbpredictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <sstream>

#include "soap/csv.hpp"
#include "soap/error.hpp"
#include "soap/metrics.hpp"
#include "soap/rng.hpp"

namespace soap::gbpredictor {

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<float>>& x, const std::vector<double>& r, const PredictorHyper& h)
      : x_(x), r_(r), h_(h) {}

  Tree build() {
    std::vector<std::size_t> all(r_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    tree_.nodes.clear();
    grow(all, 0);
    return std::move(tree_);
  }

 private:
  int grow(const std::vector<std::size_t>& idx, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double sum = 0.0;
    for (auto i : idx) sum += r_[i];
    tree_.nodes[static_cast<std::size_t>(id)].value = sum / static_cast<double>(idx.size());
    if (depth >= h_.max_depth) return id;
    const Split s = best_split(idx);
    if (s.feature < 0) return id;
    std::vector<std::size_t> left, right;
    for (auto i : idx) (x_[i][static_cast<std::size_t>(s.feature)] <= s.threshold ? left : right).push_back(i);
    const int l = grow(left, depth + 1);
    const int rr = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = l;
    node.right = rr;
    node.value = 0.0;
    return id;
  }

  // Gain is the SSE reduction sl^2/nl + sr^2/nr - s^2/n. Features are scanned
  // in index order and thresholds ascending; only a strictly larger gain
  // replaces the incumbent.
  Split best_split(const std::vector<std::size_t>& idx) const {
    Split best;
    const std::size_t n = idx.size();
    const auto min_leaf = static_cast<std::size_t>(h_.min_samples_leaf);
    if (n < 2 * min_leaf) return best;
    double total = 0.0;
    for (auto i : idx) total += r_[i];
    const double parent = total * total / static_cast<double>(n);
    const std::size_t dim = x_[idx[0]].size();
    std::vector<std::size_t> order(idx);
    for (std::size_t f = 0; f < dim; ++f) {
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x_[a][f] < x_[b][f]; });
      double sl = 0.0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        sl += r_[order[k]];
        const float lo = x_[order[k]][f], hi = x_[order[k + 1]][f];
        if (lo == hi) continue;
        const std::size_t nl = k + 1, nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double sr = total - sl;
        const double gain = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr) - parent;
        if (gain > best.gain * (1.0 + 1e-12) + 1e-15) {
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (static_cast<double>(lo) + static_cast<double>(hi));
          best.gain = gain;
        }
      }
    }
    return best;
  }

  const std::vector<std::vector<float>>& x_;
  const std::vector<double>& r_;
  const PredictorHyper& h_;
  Tree tree_;
};

double mse(const std::vector<double>& pred, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (pred[i] - y[i]) * (pred[i] - y[i]);
  return s / static_cast<double>(y.size());
}

double corr_or_nan(double (*fn)(std::span<const double>, std::span<const double>), const std::vector<double>& a,
                   const std::vector<double>& b) {
  try {
    return fn(a, b);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDegenerateInput) return std::nan("");
    throw;
  }
}

double finite_mean(const std::vector<FoldStats>& folds, double FoldStats::*field) {
  double s = 0.0;
  int n = 0;
  for (const auto& f : folds)
    if (std::isfinite(f.*field)) {
      s += f.*field;
      ++n;
    }
  return n ? s / n : std::nan("");
}

}  // namespace

void PredictorHyper::check() const {
  if (n_trees < 0 || max_depth < 1 || min_samples_leaf < 1 || !(shrinkage > 0.0 && shrinkage <= 1.0))
    throw Error(ErrorKind::kBadConfig,
                "predictor needs n_trees >= 0, max_depth >= 1, min_samples_leaf >= 1, shrinkage in (0, 1]");
}

double Tree::eval(const std::vector<float>& x) const {
  std::size_t i = 0;
  while (!nodes[i].leaf())
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                                                      : nodes[i].right);
  return nodes[i].value;
}

FitResult fit(const std::vector<std::vector<float>>& features, const std::vector<double>& targets,
              const PredictorHyper& hyper) {
  hyper.check();
  if (features.size() != targets.size())
    throw Error(ErrorKind::kShapeMismatch, "fit: " + std::to_string(features.size()) + " feature rows vs " +
                                               std::to_string(targets.size()) + " targets");
  if (targets.size() < 2) throw Error(ErrorKind::kInsufficientData, "fit needs at least 2 samples");
  const std::size_t dim = features[0].size();
  for (const auto& f : features)
    if (f.size() != dim) throw Error(ErrorKind::kShapeMismatch, "fit: ragged feature rows");

  // Canonical sample order makes the fit independent of input order.
  std::vector<std::size_t> perm(targets.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::sort(perm.begin(), perm.end(), [&](auto a, auto b) {
    if (features[a] != features[b]) return features[a] < features[b];
    return targets[a] < targets[b];
  });
  std::vector<std::vector<float>> x;
  std::vector<double> y;
  for (auto i : perm) {
    x.push_back(features[i]);
    y.push_back(targets[i]);
  }

  FitResult out;
  out.model.dim = dim;
  out.model.shrinkage = hyper.shrinkage;
  out.model.base = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  std::vector<double> pred(y.size(), out.model.base), resid(y.size());
  out.base_mse = mse(pred, y);
  for (int t = 0; t < hyper.n_trees; ++t) {
    for (std::size_t i = 0; i < y.size(); ++i) resid[i] = y[i] - pred[i];
    Tree tree = TreeBuilder(x, resid, hyper).build();
    if (tree.nodes.size() == 1) break;
    for (std::size_t i = 0; i < y.size(); ++i) pred[i] += hyper.shrinkage * tree.eval(x[i]);
    out.model.trees.push_back(std::move(tree));
    out.round_mse.push_back(mse(pred, y));
  }
  return out;
}

double predict(const PredictorModel& model, const std::vector<float>& x) {
  if (x.size() != model.dim)
    throw Error(ErrorKind::kDimensionMismatch, "predict: feature length " + std::to_string(x.size()) +
                                                   ", model expects " + std::to_string(model.dim));
  double v = model.base;
  for (const auto& t : model.trees) v += model.shrinkage * t.eval(x);
  return v;
}

std::vector<double> predict(const PredictorModel& model, const std::vector<std::vector<float>>& xs) {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = predict(model, xs[i]);
  return out;
}

std::vector<std::vector<float>> features_of(const std::vector<soapcore::PerfRecord>& records,
                                            const cellspace::SpaceConfig& space) {
  std::vector<std::vector<float>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(cellspace::encode_features(cellspace::CellArchitecture::parse(r.arch), space));
  return out;
}

std::vector<double> targets_of(const std::vector<soapcore::PerfRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.roc_auc);
  return out;
}

CvResult cross_validate(const std::vector<soapcore::PerfRecord>& records, const cellspace::SpaceConfig& space,
                        int folds, const PredictorHyper& hyper) {
  if (folds < 2) throw Error(ErrorKind::kBadConfig, "cross-validation needs at least 2 folds");
  std::map<cellspace::ArchHash, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) groups[records[i].hash].push_back(i);
  if (groups.size() < static_cast<std::size_t>(folds) * 2)
    throw Error(ErrorKind::kInsufficientData, "cross-validation with " + std::to_string(folds) + " folds needs at least " +
                                                  std::to_string(2 * folds) + " distinct architectures, have " +
                                                  std::to_string(groups.size()));
  std::vector<cellspace::ArchHash> keys;
  for (const auto& [h, _] : groups) keys.push_back(h);
  Rng rng(derive_seed(hyper.seed, "cv.folds"));
  rng.shuffle(keys.begin(), keys.end());

  const auto x = features_of(records, space);
  const auto y = targets_of(records);
  CvResult out;
  for (int f = 0; f < folds; ++f) {
    std::vector<char> held(records.size(), 0);
    for (std::size_t g = static_cast<std::size_t>(f); g < keys.size(); g += static_cast<std::size_t>(folds))
      for (auto i : groups[keys[g]]) held[i] = 1;
    std::vector<std::vector<float>> xtr, xte;
    std::vector<double> ytr, yte;
    for (std::size_t i = 0; i < records.size(); ++i) {
      (held[i] ? xte : xtr).push_back(x[i]);
      (held[i] ? yte : ytr).push_back(y[i]);
    }
    const auto model = fit(xtr, ytr, hyper).model;
    const auto pred = predict(model, xte);
    FoldStats s;
    s.train_size = ytr.size();
    s.test_size = yte.size();
    s.pearson = corr_or_nan(&metrics::pearson, pred, yte);
    s.kendall = corr_or_nan(&metrics::kendall_tau, pred, yte);
    out.folds.push_back(s);
  }
  out.mean_pearson = finite_mean(out.folds, &FoldStats::pearson);
  out.mean_kendall = finite_mean(out.folds, &FoldStats::kendall);
  return out;
}

std::string model_text(const PredictorModel& model) {
  std::string out = "SNGB 1\n";
  out += "dim " + std::to_string(model.dim) + '\n';
  out += "base " + csv::number(model.base) + '\n';
  out += "shrinkage " + csv::number(model.shrinkage) + '\n';
  out += "trees " + std::to_string(model.trees.size()) + '\n';
  for (const auto& t : model.trees) {
    out += "tree " + std::to_string(t.nodes.size()) + '\n';
    for (const auto& n : t.nodes)
      out += std::to_string(n.feature) + ' ' + csv::number(n.threshold) + ' ' + std::to_string(n.left) + ' ' +
             std::to_string(n.right) + ' ' + csv::number(n.value) + '\n';
  }
  return out;
}

PredictorModel parse_model_text(const std::string& text) {
  std::istringstream in(text);
  auto fail = [](const std::string& what) -> void { throw Error(ErrorKind::kFormatError, "predictor model: " + what); };
  std::string tag;
  auto word = [&]() {
    std::string w;
    if (!(in >> w)) fail("unexpected end of file");
    return w;
  };
  auto expect = [&](const char* key) {
    if (word() != key) fail(std::string("expected '") + key + "'");
  };
  auto real = [&](const char* what) { return csv::to_double(word(), std::string("predictor model ") + what); };
  auto integer = [&](const char* what) {
    const double v = real(what);
    if (v != std::floor(v)) fail(std::string(what) + " is not an integer");
    return static_cast<long long>(v);
  };
  expect("SNGB");
  if (word() != "1") fail("unsupported version");
  PredictorModel m;
  expect("dim");
  m.dim = static_cast<std::size_t>(integer("dim"));
  expect("base");
  m.base = real("base");
  expect("shrinkage");
  m.shrinkage = real("shrinkage");
  expect("trees");
  const auto n_trees = integer("trees");
  for (long long t = 0; t < n_trees; ++t) {
    expect("tree");
    const auto n_nodes = integer("node count");
    if (n_nodes < 1) fail("empty tree");
    Tree tree;
    for (long long k = 0; k < n_nodes; ++k) {
      TreeNode n;
      n.feature = static_cast<int>(integer("feature"));
      n.threshold = real("threshold");
      n.left = static_cast<int>(integer("left"));
      n.right = static_cast<int>(integer("right"));
      n.value = real("value");
      if (!std::isfinite(n.value)) fail("non-finite leaf value");
      if (!n.leaf()) {
        if (n.feature >= static_cast<int>(m.dim) || n.left <= k || n.right <= k || n.left >= n_nodes ||
            n.right >= n_nodes)
          fail("tree " + std::to_string(t) + " node " + std::to_string(k) + " has bad children or feature");
      }
      tree.nodes.push_back(n);
    }
    m.trees.push_back(std::move(tree));
  }
  if (in >> tag) fail("trailing content");
  return m;
}

}  // namespace soap::gbpredictor
