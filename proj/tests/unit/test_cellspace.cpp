#include <doctest.h>

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "../cellspace_suite.hpp"
#include "../oracles.hpp"
#include "soap/cellspace.hpp"
#include "soap/error.hpp"

using namespace soap;
using namespace soap::cellspace;

namespace {

using cellsuite::relabel;
using cellsuite::to_graph;

CellArchitecture diamond() {
  // in -> a(conv3) -> out, in -> b(pool) -> out, a -> b
  return CellArchitecture::from_matrix({{0, 1, 1, 0}, {0, 0, 1, 1}, {0, 0, 0, 1}, {0, 0, 0, 0}},
                                       {Op::kConv3x3, Op::kMaxPool3x3});
}

}  // namespace

TEST_CASE("serialization round-trips and rejects junk") {
  const auto a = diamond();
  CHECK(a.to_string() == "4;110111;conv3x3,maxpool3x3");
  CHECK(CellArchitecture::parse(a.to_string()) == a);
  CHECK(CellArchitecture(2).to_string() == "2;0;");
  for (const char* bad : {"", "4;11;conv3x3", "x;1;", "3;111;conv9x9", "2;12;", "3;111;conv3x3,conv1x1"})
    CHECK_THROWS_AS(CellArchitecture::parse(bad), Error);
}

TEST_CASE("from_matrix rejects lower-triangle entries") {
  CHECK_THROWS_AS(CellArchitecture::from_matrix({{0, 1}, {1, 0}}, {}), Error);
  CHECK_THROWS_AS(CellArchitecture::from_matrix({{0, 1, 0}, {0, 0, 1}, {0, 0, 0}}, {}), Error);
}

TEST_CASE("validate verdicts") {
  CellArchitecture minimal(2);
  minimal.set_edge(0, 1, true);
  CHECK(validate(minimal) == Verdict::kValid);

  CellArchitecture dense(5);
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) dense.set_edge(i, j, true);
  CHECK(dense.edge_count() == 10);
  dense.set_edge(0, 4, false);
  dense.set_edge(1, 3, false);
  CHECK(dense.edge_count() == 8);
  CHECK(validate(dense) == Verdict::kTooManyEdges);

  CellArchitecture dead_end(3);
  dead_end.set_edge(0, 1, true);
  CHECK(validate(dead_end) == Verdict::kNoInputOutputPath);
  CHECK_FALSE(prune(dead_end).has_value());

  CellArchitecture dangling(3);
  dangling.set_edge(0, 2, true);
  dangling.set_edge(0, 1, true);
  CHECK(validate(dangling) == Verdict::kDanglingNode);
  CHECK(prune(dangling)->to_string() == "2;1;");

  CHECK(validate(CellArchitecture(6), SpaceConfig{}) == Verdict::kOutOfSpace);
  SpaceConfig no_pool;
  no_pool.ops = {Op::kConv3x3, Op::kConv1x1};
  CHECK(validate(diamond(), no_pool) == Verdict::kOutOfSpace);
}

TEST_CASE("canonicalize is idempotent and permutation invariant") {
  const auto c = canonicalize(diamond());
  CHECK(canonicalize(c) == c);
  CellArchitecture minimal(2);
  minimal.set_edge(0, 1, true);
  CHECK(canonicalize(minimal) == minimal);
  CHECK_THROWS_AS(canonicalize(CellArchitecture(3)), Error);
}

TEST_CASE("hash invariant under every node relabeling of 200 random 5-node cells") {
  SpaceConfig space;
  Rng rng(11);
  int five_node = 0, relabelings = 0;
  while (five_node < 200) {
    const auto a = sample_random(space, rng);
    if (a.num_nodes() != 5) continue;
    ++five_node;
    const auto h = hash(a);
    std::vector<int> perm = {0, 1, 2, 3, 4};
    do {
      if (auto r = relabel(a, perm)) {
        ++relabelings;
        CHECK(hash(*r) == h);
        CHECK(canonicalize(*r) == canonicalize(a));
        CHECK(encode_features(*r) == encode_features(a));
      }
    } while (std::next_permutation(perm.begin() + 1, perm.end() - 1));
  }
  CHECK(relabelings >= 200);
}

TEST_CASE("op relabel changes the hash") {
  const auto a = diamond();
  auto b = a;
  b.set_op(1, Op::kConv1x1);
  CHECK(hash(a) != hash(b));
  CHECK(hash(a) == hash(a));
  CHECK(hash(a).hex().size() == 32);
}

TEST_CASE("enumerate_unique matches the brute-force class oracle") {
  for (int max_nodes : {2, 3, 4}) {
    SpaceConfig space;
    space.max_nodes = max_nodes;
    const auto archs = enumerate_unique(space);
    const auto expected = oracle::enumerate_classes(max_nodes, space.max_edges, kNumOps);
    std::set<std::string> got;
    std::set<ArchHash> hashes;
    for (const auto& a : archs) {
      CHECK(validate(a, space) == Verdict::kValid);
      got.insert(oracle::class_key(to_graph(a)));
      hashes.insert(hash(a, space));
    }
    CHECK(got == expected);
    CHECK(archs.size() == expected.size());
    CHECK(hashes.size() == archs.size());
    CHECK(enumerate_unique(space) == archs);
  }
  SpaceConfig two;
  two.max_nodes = 2;
  CHECK(enumerate_unique(two).size() == 1);
}

TEST_CASE("encode_features is injective on a small space and zero-padded") {
  SpaceConfig space;
  space.max_nodes = 4;
  std::set<std::vector<float>> seen;
  for (const auto& a : enumerate_unique(space)) {
    const auto f = encode_features(a, space);
    CHECK(f.size() == feature_length(space));
    CHECK(seen.insert(f).second);
  }
  CellArchitecture minimal(2);
  minimal.set_edge(0, 1, true);
  const auto f = encode_features(minimal);
  CHECK(std::count(f.begin(), f.end(), 1.0f) == 1);
  CHECK(f.size() == feature_length(SpaceConfig{}));
}

TEST_CASE("sample_random: valid, seeded, full support on max_nodes=3") {
  SpaceConfig space;
  Rng a(5), b(5);
  for (int i = 0; i < 10000; ++i) {
    const auto x = sample_random(space, a);
    CHECK(x == sample_random(space, b));
    if (validate(x, space) != Verdict::kValid) FAIL("invalid sample " << x.to_string());
  }
  space.max_nodes = 3;
  std::set<ArchHash> support;
  Rng r(9);
  for (int i = 0; i < 20000; ++i) support.insert(hash(sample_random(space, r), space));
  CHECK(support.size() == enumerate_unique(space).size());
}

TEST_CASE("mutate: one valid edit away, reaches the whole max_nodes=3 space") {
  SpaceConfig space;
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const auto a = sample_random(space, rng);
    if (a.num_nodes() == 2) {
      // the single-edge cell has no valid single edit
      CHECK_THROWS_AS(mutate(a, space, rng), Error);
      continue;
    }
    const auto m = mutate(a, space, rng);
    CHECK(validate(m, space) == Verdict::kValid);
    CHECK(hash(m, space) != hash(a, space));
  }

  space.max_nodes = 3;
  const auto all = enumerate_unique(space);
  std::set<ArchHash> reached = {hash(all.back(), space)};
  std::deque<CellArchitecture> frontier = {all.back()};
  Rng walk(1);
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop_front();
    if (cur.num_nodes() == 2) continue;
    for (int t = 0; t < 200; ++t) {
      const auto next = mutate(cur, space, walk);
      if (reached.insert(hash(next, space)).second) frontier.push_back(next);
    }
  }
  CHECK(reached.size() == all.size());
}

TEST_CASE("enumeration guard and config checks") {
  SpaceConfig big;
  big.max_nodes = 9;
  big.max_edges = 20;
  CHECK_THROWS_AS(big.check(), Error);
  SpaceConfig ok;
  CHECK(raw_graph_count(ok) <= kEnumerationGuard);
  CHECK_FALSE(enumerate_unique(ok).empty());
}
