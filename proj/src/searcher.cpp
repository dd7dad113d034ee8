#include "soap/searcher.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>

#include "soap/csv.hpp"
#include "soap/error.hpp"
#include "soap/metrics.hpp"

namespace soap::searcher {

namespace {

std::vector<CellArchitecture> candidates(const cellspace::SpaceConfig& space, const SearchBudget& budget) {
  if (cellspace::raw_graph_count(space) <= cellspace::kEnumerationGuard) return cellspace::enumerate_unique(space);
  Rng rng(derive_seed(budget.seed, "search.sample"));
  std::set<cellspace::ArchHash> seen;
  std::vector<CellArchitecture> out;
  // Misses are bounded so a space smaller than n_scored still terminates.
  for (int misses = 0; out.size() < static_cast<std::size_t>(budget.n_scored) && misses < 10000;) {
    auto a = cellspace::canonicalize(cellspace::sample_random(space, rng), space);
    if (seen.insert(cellspace::hash(a, space)).second) {
      out.push_back(std::move(a));
      misses = 0;
    } else {
      ++misses;
    }
  }
  return out;
}

supernet::TrainHyper with_seed(supernet::TrainHyper h, std::uint64_t seed) {
  h.seed = seed;
  return h;
}

}  // namespace

void SearchBudget::check() const {
  if (n_scored < 1 || n_finalists < 1 || n_finalists > n_scored)
    throw Error(ErrorKind::kBadConfig, "search budget needs 1 <= n_finalists <= n_scored");
}

std::vector<RankedCandidate> search_predictor(const std::function<double(const CellArchitecture&)>& score,
                                              const cellspace::SpaceConfig& space, const SearchBudget& budget) {
  budget.check();
  space.check();
  std::vector<RankedCandidate> ranked;
  for (auto& a : candidates(space, budget)) {
    const double p = score(a);
    ranked.push_back({cellspace::hash(a, space), std::move(a), p});
  }
  std::sort(ranked.begin(), ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.predicted != b.predicted) return a.predicted > b.predicted;
    return a.hash < b.hash;
  });
  if (ranked.size() > static_cast<std::size_t>(budget.n_scored)) ranked.resize(static_cast<std::size_t>(budget.n_scored));
  return ranked;
}

std::vector<RankedCandidate> search_predictor(const gbpredictor::PredictorModel& model,
                                              const cellspace::SpaceConfig& space, const SearchBudget& budget) {
  return search_predictor(
      [&](const CellArchitecture& a) { return gbpredictor::predict(model, cellspace::encode_features(a, space)); },
      space, budget);
}

SearchReport finalize(std::vector<RankedCandidate> ranked, int n_finalists, const synthroute::PlacementDataset& data,
                      const cellspace::SpaceConfig& space, const supernet::MacroConfig& macro,
                      const supernet::TrainHyper& hyper) {
  if (ranked.empty()) throw Error(ErrorKind::kBadConfig, "finalize needs at least one ranked candidate");
  if (n_finalists < 1) throw Error(ErrorKind::kBadConfig, "n_finalists must be >= 1");
  SearchReport report;
  report.ranked = std::move(ranked);
  const auto n = std::min(report.ranked.size(), static_cast<std::size_t>(n_finalists));
  report.finalists.resize(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const auto& c = report.ranked[i];
      const auto h = with_seed(hyper, derive_seed(hyper.seed, "finalist", i));
      auto trained = supernet::train_standalone(c.arch, data, space, macro, h);
      report.finalists[i] = {c, trained.result, std::move(trained.params)};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  for (std::size_t i = 1; i < n; ++i)
    if (report.finalists[i].measured.auc > report.finalists[report.chosen].measured.auc) report.chosen = i;

  report.predicted_vs_measured_pearson = std::nan("");
  if (n >= 3) {
    std::vector<double> p, m;
    for (const auto& f : report.finalists) {
      p.push_back(f.candidate.predicted);
      m.push_back(f.measured.auc);
    }
    try {
      report.predicted_vs_measured_pearson = metrics::pearson(p, m);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kDegenerateInput) throw;
    }
  }
  return report;
}

BaselineResult random_search_baseline(const cellspace::SpaceConfig& space, const synthroute::PlacementDataset& data,
                                      const supernet::MacroConfig& macro, const supernet::TrainHyper& hyper,
                                      int n_trials, std::uint64_t stream_seed) {
  if (n_trials < 1) throw Error(ErrorKind::kBadConfig, "random search needs n_trials >= 1");
  Rng rng(derive_seed(stream_seed, "baseline.sample"));
  std::set<cellspace::ArchHash> seen;
  std::vector<CellArchitecture> archs;
  for (int misses = 0; archs.size() < static_cast<std::size_t>(n_trials);) {
    auto a = cellspace::canonicalize(cellspace::sample_random(space, rng), space);
    if (seen.insert(cellspace::hash(a, space)).second) {
      archs.push_back(std::move(a));
      misses = 0;
    } else if (++misses > 10000) {
      throw Error(ErrorKind::kBadConfig, "space has fewer than " + std::to_string(n_trials) + " unique architectures");
    }
  }
  BaselineResult out;
  out.trace.resize(archs.size());
  std::vector<std::exception_ptr> errors(archs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t t = 0; t < archs.size(); ++t) {
    try {
      out.trace[t] =
          supernet::train_standalone(archs[t], data, space, macro, with_seed(hyper, derive_seed(stream_seed, "baseline", t)))
              .result;
    } catch (...) {
      errors[t] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  out.best = out.trace.front();
  for (const auto& r : out.trace)
    if (r.auc > out.best.auc) out.best = r;
  return out;
}

std::string report_csv(const SearchReport& report) {
  std::string out = "rank,arch,predicted,measured_auc,measured_acc,chosen\n";
  for (std::size_t i = 0; i < report.ranked.size(); ++i) {
    const auto& c = report.ranked[i];
    out += std::to_string(i) + ',' + csv::field(c.arch.to_string()) + ',' + csv::number(c.predicted) + ',';
    if (i < report.finalists.size()) {
      const auto& m = report.finalists[i].measured;
      out += csv::number(m.auc) + ',' + csv::number(m.acc) + ',' + (i == report.chosen ? "1" : "0");
    } else {
      out += ",,";
    }
    out += '\n';
  }
  return out;
}

std::string summary_text(const SearchReport& report, const BaselineResult* baseline) {
  const auto& b = report.best();
  std::string out;
  out += "chosen_arch = " + b.measured.arch + '\n';
  out += "chosen_rank = " + std::to_string(report.chosen) + '\n';
  out += "chosen_predicted = " + csv::number(b.candidate.predicted) + '\n';
  out += "chosen_test_auc = " + csv::number(b.measured.auc) + '\n';
  out += "chosen_test_acc = " + csv::number(b.measured.acc) + '\n';
  out += "n_ranked = " + std::to_string(report.ranked.size()) + '\n';
  out += "n_finalists = " + std::to_string(report.finalists.size()) + '\n';
  out += "predicted_vs_measured_pearson = " + csv::number(report.predicted_vs_measured_pearson) + '\n';
  if (baseline) {
    std::vector<double> aucs;
    for (const auto& r : baseline->trace) aucs.push_back(r.auc);
    std::sort(aucs.begin(), aucs.end());
    const double median = aucs.size() % 2 ? aucs[aucs.size() / 2]
                                          : 0.5 * (aucs[aucs.size() / 2 - 1] + aucs[aucs.size() / 2]);
    out += "baseline_trials = " + std::to_string(baseline->trace.size()) + '\n';
    out += "baseline_best_arch = " + baseline->best.arch + '\n';
    out += "baseline_best_auc = " + csv::number(baseline->best.auc) + '\n';
    out += "baseline_median_auc = " + csv::number(median) + '\n';
  }
  return out;
}

}  // namespace soap::searcher
