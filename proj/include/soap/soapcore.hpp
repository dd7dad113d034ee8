#pragma once

// k-shot smoothing and noise-model augmentation of (architecture, ROC-AUC)
// measurements.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "soap/cellspace.hpp"
#include "soap/rng.hpp"

namespace soap::soapcore {

using cellspace::ArchHash;
using cellspace::CellArchitecture;

inline constexpr std::string_view kStandaloneSource = "standalone";
inline constexpr std::string_view kSmoothedSource = "smoothed";
inline constexpr std::string_view kAugmentedSource = "augmented";

struct PerfRecord {
  ArchHash hash;
  std::string arch;    // canonical serialization
  double roc_auc = 0.0;
  std::string source;  // supernet index, "standalone", "smoothed", "augmented"

  friend bool operator==(const PerfRecord&, const PerfRecord&) = default;
};

struct CandidateSet {
  int supernet_id = 0;
  std::vector<PerfRecord> records;
};

struct SmoothedRecord {
  PerfRecord record;              // source == "smoothed"
  std::vector<int> contributors;  // supernet ids, ascending
};

using SmoothedDataset = std::vector<SmoothedRecord>;

struct SamplePlan {
  int per_set = 60;       // n
  double overlap = 0.5;   // rho: ceil(rho*n) archs shared by every set
  void check() const;
};

/// Measures one architecture against supernet `set_index`.
using QueryFn = std::function<double(int set_index, const CellArchitecture& canonical)>;

/// Architectures of every set before querying: the shared pool first, then
/// each set's private remainder. All unique within a set.
std::vector<std::vector<CellArchitecture>> plan_candidates(int k, const SamplePlan& plan,
                                                          const cellspace::SpaceConfig& space, Rng& rng);

/// plan_candidates + query; sets are queried in parallel, records keep plan order.
std::vector<CandidateSet> build_candidate_sets(int k, const SamplePlan& plan, const cellspace::SpaceConfig& space,
                                               Rng& rng, const QueryFn& query);

/// Groups by hash. Archs in >= 2 sets keep their max value; archs in exactly
/// one set are dropped unless `include_singletons`. Output sorted by hash.
SmoothedDataset merge_smoothed(const std::vector<CandidateSet>& sets, bool include_singletons);

struct NoiseModel {
  double mean = 0.0;
  double variance = 0.0;   // pooled within-group unbiased variance
  std::size_t samples = 0;
  std::size_t groups = 0;  // groups with >= 2 values
  std::size_t dof = 0;     // sum over groups of (size - 1)
};

/// Grand mean and pooled within-group variance of per-architecture retrain
/// groups. Throws kInsufficientData without any group of size >= 2.
NoiseModel estimate_noise_model(const std::vector<std::vector<double>>& groups);

/// Every original, then (factor_x - 1) * n draws with replacement, each plus
/// N(0, variance) noise, clipped to [0, 1]. Throws kBadConfig.
std::vector<PerfRecord> augment(const std::vector<PerfRecord>& dataset, int factor_x, const NoiseModel& noise,
                                Rng& rng);

std::vector<PerfRecord> records_of(const SmoothedDataset& smoothed);

// ---- persistence ----------------------------------------------------------

/// `arch,auc,sources` (sources: supernet ids joined by ';').
std::string smoothed_csv(const SmoothedDataset& d);
SmoothedDataset parse_smoothed_csv(const std::string& text, const cellspace::SpaceConfig& space);

/// `arch,auc,source`.
std::string records_csv(const std::vector<PerfRecord>& records);
std::vector<PerfRecord> parse_records_csv(const std::string& text, const cellspace::SpaceConfig& space);

/// Key-value text (`key = value` per line), one block per metric prefix.
std::string noise_model_text(const std::map<std::string, NoiseModel>& models);
std::map<std::string, NoiseModel> parse_noise_model_text(const std::string& text);

}  // namespace soap::soapcore
