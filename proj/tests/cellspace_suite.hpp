#pragma once

// Graph-class checks shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "soap/rng.hpp"
#include "soap/cellspace.hpp"

namespace cellsuite {

using soap::cellspace::CellArchitecture;

inline oracle::Graph to_graph(const CellArchitecture& a) {
  oracle::Graph g;
  g.n = a.num_nodes();
  g.adj.assign(g.n, std::vector<int>(g.n, 0));
  for (int i = 0; i < g.n; ++i)
    for (int j = i + 1; j < g.n; ++j) g.adj[i][j] = a.edge(i, j);
  for (int k = 1; k + 1 < g.n; ++k) g.ops.push_back(static_cast<int>(a.op(k)));
  return g;
}

// Relabels interior nodes by `perm` (perm[old] = new); empty when an edge
// would point backwards under the new labels.
inline std::optional<CellArchitecture> relabel(const CellArchitecture& a, const std::vector<int>& perm) {
  const int n = a.num_nodes();
  CellArchitecture out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (a.edge(i, j)) {
        const int pi = perm[i], pj = perm[j];
        if (pi >= pj) return std::nullopt;
        out.set_edge(pi, pj, true);
      }
  for (int k = 1; k < n - 1; ++k) out.set_op(perm[k], a.op(k));
  return out;
}

// enumerate_unique(max_nodes) against the brute-force class oracle.
inline bool enumeration_matches(int max_nodes) {
  soap::cellspace::SpaceConfig space;
  space.max_nodes = max_nodes;
  const auto archs = soap::cellspace::enumerate_unique(space);
  std::set<std::string> got;
  std::set<soap::cellspace::ArchHash> hashes;
  for (const auto& a : archs) {
    if (soap::cellspace::validate(a, space) != soap::cellspace::Verdict::kValid) return false;
    got.insert(oracle::class_key(to_graph(a)));
    hashes.insert(soap::cellspace::hash(a, space));
  }
  const auto expected =
      oracle::enumerate_classes(max_nodes, space.max_edges, static_cast<int>(space.ops.size()));
  return got == expected && archs.size() == expected.size() && hashes.size() == archs.size();
}

struct RelabelStats {
  int cells = 0;
  int relabelings = 0;
  int mismatches = 0;
};

// Hash of every valid interior relabeling of `n_cells` random 5-node cells.
inline RelabelStats relabel_invariance(int n_cells, std::uint64_t seed) {
  soap::cellspace::SpaceConfig space;
  soap::Rng rng(seed);
  RelabelStats s;
  while (s.cells < n_cells) {
    const auto a = soap::cellspace::sample_random(space, rng);
    if (a.num_nodes() != 5) continue;
    ++s.cells;
    const auto h = soap::cellspace::hash(a);
    std::vector<int> perm = {0, 1, 2, 3, 4};
    do {
      if (auto r = relabel(a, perm)) {
        ++s.relabelings;
        if (soap::cellspace::hash(*r) != h) ++s.mismatches;
      }
    } while (std::next_permutation(perm.begin() + 1, perm.end() - 1));
  }
  return s;
}

}  // namespace cellsuite
