#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "soap/error.hpp"
#include "soap/searcher.hpp"

using namespace soap;
using namespace soap::searcher;

namespace {

const synthroute::PlacementDataset& small_data() {
  static const auto d = [] {
    synthroute::GenerateConfig g;
    g.seed = 8;
    g.n_maps = 24;
    g.height = 12;
    g.width = 12;
    return synthroute::split(synthroute::generate(g), {2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0}, 2);
  }();
  return d;
}

supernet::MacroConfig small_macro() {
  supernet::MacroConfig m;
  m.channels = 4;
  m.supercells = 1;
  return m;
}

supernet::TrainHyper quick() {
  supernet::TrainHyper h;
  h.epochs = 1;
  h.batch = 8;
  h.ghost = 4;
  h.seed = 6;
  return h;
}

// Deterministic score with few ties.
double synthetic_score(const CellArchitecture& a) {
  return static_cast<double>(std::hash<std::string>{}(a.to_string()) % 1000) / 1000.0 + 0.1 * a.num_nodes();
}

}  // namespace

TEST_CASE("enumerable spaces are ranked exhaustively") {
  cellspace::SpaceConfig space;
  space.max_nodes = 3;
  const auto all = cellspace::enumerate_unique(space);
  const auto ranked = search_predictor(synthetic_score, space, SearchBudget{1000, 1, 0});
  REQUIRE(ranked.size() == all.size());

  double best = -1e300;
  for (const auto& a : all) best = std::max(best, synthetic_score(a));
  CHECK(ranked.front().predicted == best);

  std::set<cellspace::ArchHash> seen;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CHECK(seen.insert(ranked[i].hash).second);
    CHECK(ranked[i].predicted == synthetic_score(ranked[i].arch));
    if (i) {
      const auto& p = ranked[i - 1];
      CHECK((p.predicted > ranked[i].predicted || (p.predicted == ranked[i].predicted && p.hash < ranked[i].hash)));
    }
  }

  const auto one = search_predictor(synthetic_score, space, SearchBudget{1, 1, 0});
  REQUIRE(one.size() == 1);
  CHECK(one[0].hash == ranked[0].hash);
}

TEST_CASE("sampled search honours n_scored and avoids duplicates") {
  cellspace::SpaceConfig space;
  space.max_nodes = 7;
  space.max_edges = 9;
  const auto ranked = search_predictor(synthetic_score, space, SearchBudget{150, 3, 4});
  CHECK(ranked.size() == 150);
  std::set<cellspace::ArchHash> seen;
  for (const auto& r : ranked) CHECK(seen.insert(r.hash).second);
  const auto again = search_predictor(synthetic_score, space, SearchBudget{150, 3, 4});
  for (std::size_t i = 0; i < ranked.size(); ++i) CHECK(again[i].hash == ranked[i].hash);

  CHECK_THROWS_AS(search_predictor(synthetic_score, space, SearchBudget{0, 1, 0}), Error);
  CHECK_THROWS_AS(search_predictor(synthetic_score, space, SearchBudget{3, 4, 0}), Error);
}

TEST_CASE("a fitted model ranks in the same order as its predictions") {
  cellspace::SpaceConfig space;
  space.max_nodes = 4;
  const auto all = cellspace::enumerate_unique(space);
  std::vector<std::vector<float>> x;
  std::vector<double> y;
  for (const auto& a : all) {
    x.push_back(cellspace::encode_features(a, space));
    y.push_back(synthetic_score(a));
  }
  const auto model = gbpredictor::fit(x, y, gbpredictor::PredictorHyper{}).model;
  const auto ranked = search_predictor(model, space, SearchBudget{5000, 1, 0});
  REQUIRE(ranked.size() == all.size());
  double best = -1e300;
  for (const auto& r : x) best = std::max(best, gbpredictor::predict(model, r));
  CHECK(ranked.front().predicted == best);
}

TEST_CASE("finalize picks the measured argmax") {
  cellspace::SpaceConfig space;
  space.max_nodes = 3;
  auto ranked = search_predictor(synthetic_score, space, SearchBudget{1000, 3, 0});
  const auto report = finalize(ranked, 3, small_data(), space, small_macro(), quick());
  REQUIRE(report.finalists.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(report.finalists[i].candidate.hash == ranked[i].hash);
    CHECK(report.finalists[i].measured.auc <= report.best().measured.auc);
  }
  for (std::size_t i = 0; i < report.chosen; ++i)
    CHECK(report.finalists[i].measured.auc < report.best().measured.auc);

  const auto single = finalize(ranked, 1, small_data(), space, small_macro(), quick());
  CHECK(single.finalists.size() == 1);
  CHECK(single.chosen == 0);
  CHECK(std::isnan(single.predicted_vs_measured_pearson));
  CHECK(single.best().measured.auc == report.finalists[0].measured.auc);

  const auto csv = report_csv(report);
  CHECK(csv.rfind("rank,arch,predicted,measured_auc,measured_acc,chosen\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(ranked.size()) + 1);
  CHECK_THROWS_AS(finalize({}, 1, small_data(), space, small_macro(), quick()), Error);
}

TEST_CASE("random baseline is seeded and prefix-stable") {
  cellspace::SpaceConfig space;
  const auto three = random_search_baseline(space, small_data(), small_macro(), quick(), 3, 12);
  const auto two = random_search_baseline(space, small_data(), small_macro(), quick(), 2, 12);
  REQUIRE(three.trace.size() == 3);
  REQUIRE(two.trace.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(two.trace[i].arch == three.trace[i].arch);
    CHECK(two.trace[i].auc == three.trace[i].auc);
  }
  for (const auto& r : three.trace) CHECK(r.auc <= three.best.auc);
  std::set<std::string> archs;
  for (const auto& r : three.trace) archs.insert(r.arch);
  CHECK(archs.size() == 3);

  const auto one = random_search_baseline(space, small_data(), small_macro(), quick(), 1, 12);
  CHECK(one.best.arch == three.trace[0].arch);
  CHECK_THROWS_AS(random_search_baseline(space, small_data(), small_macro(), quick(), 0, 12), Error);

  cellspace::SpaceConfig tiny;
  tiny.max_nodes = 2;
  CHECK_THROWS_AS(random_search_baseline(tiny, small_data(), small_macro(), quick(), 2, 12), Error);
}
