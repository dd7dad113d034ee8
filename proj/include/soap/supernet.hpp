#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "soap/cellspace.hpp"
#include "soap/nnkernel.hpp"
#include "soap/synthroute.hpp"

namespace soap::supernet {

using cellspace::CellArchitecture;
using cellspace::SpaceConfig;

/// Stem conv3x3 (in -> channels) + BN + ReLU, `supercells` stacked cells
/// each followed by BN + ReLU, head conv1x1 (channels -> 1) producing
/// per-pixel logits.
struct MacroConfig {
  int in_channels = synthroute::kChannels;
  int channels = 16;
  int supercells = 3;

  void check() const;
  friend bool operator==(const MacroConfig&, const MacroConfig&) = default;
};

struct TrainHyper {
  int epochs = 8;
  float lr = 0.02f;
  int batch = 16;
  int ghost = 8;
  float momentum = 0.9f;
  std::uint64_t seed = 0;

  /// 240 epochs, lr 0.02, batch 32, ghost 8.
  static TrainHyper paper();
  /// 8 epochs, lr 0.02, batch 16, ghost 8.
  static TrainHyper desk();
  void check() const;
};

inline constexpr int kStandaloneId = -1;

struct QueryResult {
  cellspace::ArchHash hash;
  std::string arch;  // canonical serialization
  double auc = 0.0;
  double acc = 0.0;
  int supernet_id = kStandaloneId;
};

/// Shared weights for every cell in the space. Parameter names:
///   stem.w, stem.bn.*; cell<s>.edge<i>_<j>.{w,b} for every slot pair of the
///   padded frame; cell<s>.node<k>.<op>.w and .bn.* per interior slot and op;
///   cell<s>.out.bn.* (BN + ReLU on each supercell's output); head.{w,b}. BN running statistics live in the same store.
struct Supernet {
  SpaceConfig space;
  MacroConfig macro;
  nn::ParamStore params;
  std::uint64_t seed = 0;
  int id = 0;
};

/// Seeded He-uniform initialization. Each tensor draws from its own stream
/// keyed by (seed, name), so a standalone network for one cell starts from
/// exactly the supernet's initial weights on that path.
Supernet build(const SpaceConfig& space, const MacroConfig& macro, std::uint64_t seed, int id = 0);

/// Parameters only for the path of `arch` (standalone network).
nn::ParamStore build_path_params(const SpaceConfig& space, const MacroConfig& macro, const CellArchitecture& arch,
                                 std::uint64_t seed);

/// Trainable scalar count of the full supernet (running statistics excluded).
std::size_t parameter_count(const SpaceConfig& space, const MacroConfig& macro);
std::size_t parameter_count(const nn::ParamStore& params);

/// Names of the tensors (trainable and running statistics) `arch` touches.
std::vector<std::string> path_parameter_names(const SpaceConfig& space, const MacroConfig& macro,
                                              const CellArchitecture& arch);

struct TrainTrace {
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

/// One random cell per batch (cellspace::sample_random); only that path runs
/// forward and backward and only its parameters are stepped.
TrainTrace train_oneshot(Supernet& net, const synthroute::PlacementDataset& data, const TrainHyper& hyper);

/// Logits for a batch through one path. `mode` selects BN behaviour; in
/// kTrain/kCalibrate the running statistics inside `params` are updated.
nn::Tensor forward(nn::ParamStore& params, const SpaceConfig& space, const MacroConfig& macro,
                   const CellArchitecture& arch, const nn::Tensor& input, nn::BnMode mode, int ghost);

/// Loss and gradients (keyed like the parameter store) of one batch.
struct StepResult {
  double loss = 0.0;
  nn::ParamStore grads;
};
StepResult loss_and_gradients(nn::ParamStore& params, const SpaceConfig& space, const MacroConfig& macro,
                              const CellArchitecture& arch, const synthroute::Batch& batch, int ghost);

/// Pooled pixel ROC-AUC and accuracy of one path on `maps` in eval mode.
struct Evaluation {
  double auc = 0.0;
  double acc = 0.0;
  std::vector<float> probabilities;  // pooled, in map order
  std::vector<std::uint8_t> labels;
};
Evaluation evaluate(nn::ParamStore& params, const SpaceConfig& space, const MacroConfig& macro,
                    const CellArchitecture& arch, const synthroute::PlacementDataset& data,
                    const std::vector<int>& maps);

inline constexpr int kCalibrationMaps = 16;

/// BN statistics are recalibrated on the first kCalibrationMaps training maps
/// with the queried path active (on a private copy), then validation maps are
/// scored. The supernet itself is never modified.
QueryResult query(const Supernet& net, const CellArchitecture& arch, const synthroute::PlacementDataset& data);

struct StandaloneResult {
  QueryResult result;
  TrainTrace trace;
  nn::ParamStore params;
};

/// Fresh network holding only this cell's path, trained from scratch on the
/// train split and scored on the test split.
StandaloneResult train_standalone(const CellArchitecture& arch, const synthroute::PlacementDataset& data,
                                  const SpaceConfig& space, const MacroConfig& macro, const TrainHyper& hyper);

struct Correlation {
  double pearson = 0.0;
  double kendall_tau = 0.0;
  double best_queried_auc = 0.0;
  std::vector<double> queried;
  std::vector<double> truth;
};

/// Queries each arch and correlates with the ground-truth AUC of the same
/// arch (matched by hash). Throws kDegenerateInput / kInsufficientData.
Correlation evaluate_correlation(const Supernet& net, const std::vector<CellArchitecture>& archs,
                                 const std::vector<QueryResult>& ground_truth,
                                 const synthroute::PlacementDataset& data);
Correlation correlate(std::vector<double> queried, std::vector<double> truth);

/// `arch,auc,acc,supernet_id` rows.
std::string query_csv_header();
std::string query_csv_row(const QueryResult& r);

}  // namespace soap::supernet
