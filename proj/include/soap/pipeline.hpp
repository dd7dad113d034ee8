#pragma once

// End-to-end orchestration over a run directory:
//
//   config.cfg              data/{train,val,test}.srds     supernets/sn_<i>.snck
//   sets/set_<i>.csv        smoothed.csv                   campaign.csv
//   noise_model.txt         augmented.csv                  predictor.model
//   predictor_cv.csv        search/{report.csv,baseline.csv,summary.txt,final.snck}
//   report/{hist_auc.csv,hist_acc.csv,roc.csv,variance.csv,summary.txt}
//   run_report.txt          (timings; the only non-deterministic file)
//
// A stage whose artifacts all exist is loaded instead of recomputed, so a run
// resumes from its last completed stage. Randomness is keyed by
// (seed, stage, index) only.

#include <string>
#include <string_view>
#include <vector>

#include "soap/config.hpp"

namespace soap::pipeline {

enum class Stage {
  kData,
  kSupernets,
  kSets,
  kMerge,
  kCampaign,
  kNoise,
  kAugment,
  kPredictor,
  kSearch,
  kReport,
};
inline constexpr int kNumStages = 10;
std::string_view stage_name(Stage s);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
  bool resumed = false;
};

struct RunReport {
  std::string run_dir;
  std::vector<std::string> artifacts;  // relative to run_dir, all present
  std::vector<StageTiming> timings;
  // headline numbers; NaN when the stage producing them did not run
  std::string final_arch;
  double final_auc = 0.0;
  double final_acc = 0.0;
  double cv_pearson = 0.0;
  double cv_kendall = 0.0;
  double truth_pearson = 0.0;  // predictor vs standalone campaign means
  double truth_kendall = 0.0;
  double baseline_best = 0.0;
  double baseline_median = 0.0;
  double latency_median_ms = 0.0;
  double latency_p90_ms = 0.0;
};

/// Runs (or resumes) every stage up to and including `last`. Stage failures
/// are rethrown with the stage name prefixed; finished artifacts stay on disk.
RunReport run_until(const RunConfig& cfg, const std::string& run_dir, Stage last);
RunReport run_full(const RunConfig& cfg, const std::string& run_dir);
std::string run_report_text(const RunReport& r);

struct AblationRow {
  std::string axis;  // "k" or "x"
  int k = 0;
  int x = 0;
  int repeat = 0;
  std::size_t n_smoothed = 0;
  double truth_pearson = 0.0;
  double truth_kendall = 0.0;
};

/// For each repeat: trains max(k_values, cfg.k) fresh supernets, then sweeps
/// k (x = cfg.factor_x) and x (k = cfg.k) through predictor fitting and
/// scores the predictor against the campaign ground truth of `run_dir`
/// (computed there if absent). k = 1 keeps singletons since no arch can
/// appear in two sets. Writes ablation_k.csv and ablation_x.csv.
std::vector<AblationRow> ablation_sweep(const RunConfig& cfg, const std::string& run_dir,
                                        const std::vector<int>& k_values, const std::vector<int>& x_values,
                                        int repeats);
std::string ablation_csv(const std::vector<AblationRow>& rows, std::string_view axis);

struct LatencyStats {
  double median_ms = 0.0;
  double p90_ms = 0.0;
  std::vector<double> samples_ms;
};

/// Single-map eval-mode forward passes after 10 warmup passes. Throws
/// kBadConfig for n_iters < 100.
LatencyStats benchmark_query_latency(const nn::ParamStore& params, const cellspace::SpaceConfig& space,
                                     const supernet::MacroConfig& macro, const cellspace::CellArchitecture& arch,
                                     const synthroute::PlacementDataset& data, int n_iters);
/// Uses the run's final model. Throws kModelMissing when search has not run.
LatencyStats benchmark_query_latency(const std::string& run_dir, int n_iters);

/// Rebuilds report/ from the artifacts of a finished run. Throws
/// kMissingArtifact naming the absent file.
void report(const std::string& run_dir);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;
};
/// `bins` equal-width bins over [min, max] of the values (last bin closed).
Histogram histogram(const std::vector<double>& values, int bins);
std::string histogram_csv(const Histogram& h);

/// Loads a run's config.cfg.
RunConfig run_config(const std::string& run_dir);

}  // namespace soap::pipeline
