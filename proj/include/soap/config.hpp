#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "soap/cellspace.hpp"
#include "soap/gbpredictor.hpp"
#include "soap/searcher.hpp"
#include "soap/soapcore.hpp"
#include "soap/supernet.hpp"
#include "soap/synthroute.hpp"

namespace soap {

struct CampaignConfig {
  int n_archs = 12;
  int n_retrains = 4;
  int epochs = 6;
};

/// Everything a run depends on. Serialized as flat `key = value` lines.
struct RunConfig {
  std::uint64_t seed = 0;
  cellspace::SpaceConfig space;
  synthroute::GenerateConfig data;
  std::array<double, 3> split = {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0};  // train, val, test
  supernet::MacroConfig macro;
  supernet::TrainHyper supernet = supernet::TrainHyper::desk();
  int k = 5;
  soapcore::SamplePlan plan;
  bool include_singletons = false;
  int factor_x = 7;
  CampaignConfig campaign;
  gbpredictor::PredictorHyper predictor;
  int cv_folds = 5;
  searcher::SearchBudget search;
  int final_epochs = 6;     // standalone epochs for finalists and the baseline
  int baseline_trials = 5;  // random-search trainings; 0 disables the baseline

  /// 300 maps 32x32, k=5, n=60, rho=0.5, x=7, campaign 12x4x6, supernet 8
  /// epochs, n_scored=500, n_finalists=5.
  static RunConfig desk();
  /// desk() with the published training schedule (240 epochs, batch 32).
  static RunConfig paper();

  void check() const;
  /// Standalone training hyperparameters for `epochs`, seed left at 0.
  supernet::TrainHyper standalone_hyper(int epochs) const;
};

/// Strict parser: unknown keys, duplicate keys and malformed values raise
/// kBadConfig naming the line. A `preset = desk|paper` line selects the base.
RunConfig parse_config(const std::string& text, const std::string& source = "config");
RunConfig load_config(const std::string& path);
std::string config_text(const RunConfig& cfg);

}  // namespace soap
