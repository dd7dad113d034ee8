#pragma once

// Predictor-ranked search, standalone finalization, and a random-search baseline.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "soap/cellspace.hpp"
#include "soap/gbpredictor.hpp"
#include "soap/supernet.hpp"
#include "soap/synthroute.hpp"

namespace soap::searcher {

using cellspace::CellArchitecture;
using supernet::QueryResult;

struct SearchBudget {
  int n_scored = 500;
  int n_finalists = 5;
  std::uint64_t seed = 0;

  void check() const;
};

struct RankedCandidate {
  cellspace::ArchHash hash;
  CellArchitecture arch;  // canonical
  double predicted = 0.0;
};

/// Scores every unique arch when the space is enumerable, else up to
/// n_scored seeded random samples (deduplicated). Sorted by descending
/// prediction, ties by ascending hash; at most n_scored entries.
std::vector<RankedCandidate> search_predictor(const std::function<double(const CellArchitecture&)>& score,
                                              const cellspace::SpaceConfig& space, const SearchBudget& budget);
std::vector<RankedCandidate> search_predictor(const gbpredictor::PredictorModel& model,
                                              const cellspace::SpaceConfig& space, const SearchBudget& budget);

struct Finalist {
  RankedCandidate candidate;
  QueryResult measured;  // standalone test-split result
  nn::ParamStore params;  // trained path weights
};

struct SearchReport {
  std::vector<RankedCandidate> ranked;
  std::vector<Finalist> finalists;  // in ranking order
  std::size_t chosen = 0;           // index into finalists
  double predicted_vs_measured_pearson = 0.0;  // NaN below 3 finalists or if undefined

  const Finalist& best() const { return finalists.at(chosen); }
};

/// Standalone-trains the top n_finalists (per-finalist seed stream
/// "finalist"/rank) and picks the argmax of measured AUC; earlier rank wins ties.
SearchReport finalize(std::vector<RankedCandidate> ranked, int n_finalists, const synthroute::PlacementDataset& data,
                      const cellspace::SpaceConfig& space, const supernet::MacroConfig& macro,
                      const supernet::TrainHyper& hyper);

struct BaselineResult {
  QueryResult best;
  std::vector<QueryResult> trace;  // in trial order
};

/// n_trials unique random archs from `stream_seed`, each standalone-trained
/// with seed stream "baseline"/trial.
BaselineResult random_search_baseline(const cellspace::SpaceConfig& space, const synthroute::PlacementDataset& data,
                                      const supernet::MacroConfig& macro, const supernet::TrainHyper& hyper,
                                      int n_trials, std::uint64_t stream_seed);

/// `rank,arch,predicted,measured_auc,measured_acc,chosen` for finalists then
/// `rank,arch,predicted` rows for the rest of the ranking.
std::string report_csv(const SearchReport& report);
std::string summary_text(const SearchReport& report, const BaselineResult* baseline);

}  // namespace soap::searcher
