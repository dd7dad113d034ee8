#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "soap/rng.hpp"

namespace soap::cellspace {

enum class Op : std::uint8_t { kConv3x3 = 0, kConv1x1 = 1, kMaxPool3x3 = 2 };

inline constexpr int kNumOps = 3;

std::string_view op_name(Op op);
std::optional<Op> parse_op(std::string_view name);

/// Limits of the search space. Node counts include the input and output node.
struct SpaceConfig {
  int max_nodes = 5;
  int max_edges = 7;
  std::vector<Op> ops = {Op::kConv3x3, Op::kConv1x1, Op::kMaxPool3x3};

  /// Throws kBadConfig when the limits are out of range.
  void check() const;
  friend bool operator==(const SpaceConfig&, const SpaceConfig&) = default;
};

/// A DAG cell: node 0 is the input, node n-1 the output, nodes 1..n-2 carry an
/// operation. Only the strict upper triangle of the adjacency is stored, so
/// every edge i->j has i<j and the graph is acyclic by construction.
class CellArchitecture {
 public:
  CellArchitecture() : CellArchitecture(2) {}
  /// Edgeless cell with `num_nodes` nodes; interior ops default to conv3x3.
  explicit CellArchitecture(int num_nodes);

  /// Builds from a dense row-major n x n 0/1 matrix. Throws kInvalidArchitecture
  /// if any entry on or below the diagonal is set or sizes disagree.
  static CellArchitecture from_matrix(const std::vector<std::vector<int>>& adjacency,
                                      std::vector<Op> ops);

  int num_nodes() const { return num_nodes_; }
  int num_interior() const { return num_nodes_ - 2; }
  bool edge(int from, int to) const;
  void set_edge(int from, int to, bool present);
  int edge_count() const;

  /// Operation of interior node `node` (1 <= node <= n-2).
  Op op(int node) const { return ops_.at(static_cast<std::size_t>(node - 1)); }
  void set_op(int node, Op op) { ops_.at(static_cast<std::size_t>(node - 1)) = op; }
  const std::vector<Op>& ops() const { return ops_; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  /// `N;<row-major upper-tri bits>;<op labels comma-separated>`
  std::string to_string() const;
  /// Inverse of to_string. Throws kFormatError on malformed text.
  static CellArchitecture parse(std::string_view text);

  friend bool operator==(const CellArchitecture&, const CellArchitecture&) = default;
  friend std::strong_ordering operator<=>(const CellArchitecture& a,
                                          const CellArchitecture& b);

 private:
  std::size_t index(int from, int to) const;

  int num_nodes_;
  std::vector<std::uint8_t> bits_;
  std::vector<Op> ops_;
};

enum class Verdict {
  kValid,
  kTooManyEdges,
  kNoInputOutputPath,
  kDanglingNode,
  kOutOfSpace,  // node count above max_nodes or op outside the configured set
};

std::string_view verdict_name(Verdict v);

/// Valid cells are exactly the pruned, in-space cells with an input->output
/// path. A cell carrying interior nodes off every path is reported as
/// kDanglingNode; prune() maps it to its valid representative.
Verdict validate(const CellArchitecture& arch, const SpaceConfig& space = {});

/// Deletes interior nodes not on any input->output path. Returns nullopt if
/// no such path exists.
std::optional<CellArchitecture> prune(const CellArchitecture& arch);

/// Lexicographically minimal relabeling over topological orders of the
/// interior nodes. Throws kInvalidArchitecture if `arch` is not valid.
CellArchitecture canonicalize(const CellArchitecture& arch, const SpaceConfig& space = {});

struct ArchHash {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  std::string hex() const;
  friend auto operator<=>(const ArchHash&, const ArchHash&) = default;
};

/// 128-bit FNV-1a of the canonical serialization.
ArchHash hash(const CellArchitecture& arch, const SpaceConfig& space = {});

CellArchitecture sample_random(const SpaceConfig& space, Rng& rng);

/// Raw graph count the enumerator would visit; compared against the guard.
std::uint64_t raw_graph_count(const SpaceConfig& space);
inline constexpr std::uint64_t kEnumerationGuard = 1'000'000;

/// Every isomorphism class exactly once, canonical form, ordered by node
/// count then canonical order. Throws kSpaceTooLarge above the guard.
std::vector<CellArchitecture> enumerate_unique(const SpaceConfig& space);

/// One edge toggle or one op relabel followed by pruning; the result is
/// valid and not isomorphic to the input. Throws kNoValidNeighbor.
CellArchitecture mutate(const CellArchitecture& arch, const SpaceConfig& space, Rng& rng);

/// Length of encode_features output for this space.
std::size_t feature_length(const SpaceConfig& space);

/// Padded adjacency of the canonical form (output placed at the last slot)
/// followed by one-hot ops for each padded interior slot.
std::vector<float> encode_features(const CellArchitecture& arch, const SpaceConfig& space = {});

}  // namespace soap::cellspace
