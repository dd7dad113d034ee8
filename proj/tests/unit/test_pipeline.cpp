#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "../tiny_config.hpp"
#include "soap/config.hpp"
#include "soap/error.hpp"
#include "soap/pipeline.hpp"

using namespace soap;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("soapnas_unit_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Every file under a run directory except the timing report.
std::map<std::string, std::string> contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).string();
    if (rel != "run_report.txt") out[rel] = slurp(e.path());
  }
  return out;
}

std::string error_message(const std::function<void()>& f, ErrorKind want) {
  try {
    f();
  } catch (const Error& e) {
    CHECK(e.kind() == want);
    return e.what();
  }
  FAIL("expected an error");
  return {};
}

int cli(const std::string& args) {
  const std::string cmd = std::string(SOAPNAS_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config text round-trips and presets differ only in schedule") {
  const auto desk = RunConfig::desk();
  const auto back = parse_config(config_text(desk));
  CHECK(config_text(back) == config_text(desk));
  CHECK(desk.k == 5);
  CHECK(desk.factor_x == 7);
  CHECK(desk.plan.per_set == 60);
  CHECK(desk.plan.overlap == 0.5);
  CHECK(desk.data.n_maps == 300);
  CHECK(desk.campaign.n_archs == 12);
  CHECK(desk.campaign.n_retrains == 4);
  CHECK(desk.search.n_scored == 500);
  CHECK(desk.search.n_finalists == 5);

  const auto paper = parse_config("preset = paper\n");
  CHECK(paper.supernet.epochs == 240);
  CHECK(paper.supernet.batch == 32);
  CHECK(paper.k == desk.k);

  const auto tiny = parse_config(tinycfg::kText, "tiny.cfg");
  CHECK(tiny.seed == 3);
  CHECK(tiny.macro.channels == 4);
  CHECK(parse_config(config_text(tiny)).seed == 3);
  CHECK(config_text(parse_config(config_text(tiny))) == config_text(tiny));
}

TEST_CASE("config errors name the source line") {
  auto msg = error_message([] { parse_config("seed = 1\nnot.a.key = 3\n", "run.cfg"); }, ErrorKind::kBadConfig);
  CHECK(msg.find("run.cfg:2") != std::string::npos);
  CHECK(msg.find("not.a.key") != std::string::npos);
  msg = error_message([] { parse_config("seed = 1\n# comment\nseed = 2\n", "run.cfg"); }, ErrorKind::kBadConfig);
  CHECK(msg.find("run.cfg:3") != std::string::npos);
  msg = error_message([] { parse_config("smoothing.k = many\n", "run.cfg"); }, ErrorKind::kBadConfig);
  CHECK(msg.find("run.cfg:1") != std::string::npos);
  error_message([] { parse_config("just words\n"); }, ErrorKind::kBadConfig);
  error_message([] { parse_config("preset = huge\n"); }, ErrorKind::kBadConfig);
  error_message([] { parse_config("smoothing.k = 0\n"); }, ErrorKind::kBadConfig);
  error_message([] { parse_config("augment.factor = 0\n"); }, ErrorKind::kBadConfig);
  error_message([] { parse_config("space.ops = conv3x3,conv7x7\n"); }, ErrorKind::kBadConfig);
  error_message([] { load_config("/nonexistent/run.cfg"); }, ErrorKind::kIoError);
}

TEST_CASE("histograms count every value once") {
  const std::vector<double> v = {0.1, 0.2, 0.2, 0.5, 0.9, 0.9, 1.0};
  const auto h = pipeline::histogram(v, 4);
  CHECK(h.lo == 0.1);
  CHECK(h.hi == 1.0);
  CHECK(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}) == v.size());
  CHECK(h.counts.back() == 3);
  const auto flat = pipeline::histogram({0.5, 0.5, 0.5}, 5);
  CHECK(std::accumulate(flat.counts.begin(), flat.counts.end(), std::size_t{0}) == 3);
}

TEST_CASE("tiny runs are reproducible and resumable") {
  const auto cfg = parse_config(tinycfg::kText);
  const auto a = scratch("run_a"), b = scratch("run_b");
  const auto ra = pipeline::run_full(cfg, a.string());
  pipeline::run_full(cfg, b.string());
  const auto ca = contents(a);
  CHECK(ca == contents(b));
  for (const auto& rel : ra.artifacts) CHECK(fs::exists(a / rel));
  CHECK(parse_config(slurp(a / "config.cfg")).seed == cfg.seed);
  CHECK(ra.final_auc >= 0.0);
  CHECK(ra.final_auc <= 1.0);
  CHECK(ra.latency_median_ms <= ra.latency_p90_ms);

  fs::remove(a / "sets" / "set_1.csv");
  fs::remove(a / "smoothed.csv");
  fs::remove(a / "search" / "report.csv");
  fs::remove_all(a / "report");
  const auto resumed = pipeline::run_full(cfg, a.string());
  CHECK(contents(a) == ca);
  bool any_resumed = false;
  for (const auto& t : resumed.timings) any_resumed = any_resumed || t.resumed;
  CHECK(any_resumed);

  const auto other = scratch("run_seed");
  auto cfg2 = cfg;
  cfg2.seed = 4;
  pipeline::run_until(cfg2, other.string(), pipeline::Stage::kData);
  CHECK(slurp(other / "data" / "train.srds") != ca.at("data/train.srds"));

  error_message([&] { pipeline::benchmark_query_latency(a.string(), 10); }, ErrorKind::kBadConfig);
  const auto empty = scratch("run_empty");
  fs::create_directories(empty);
  error_message([&] { pipeline::report(empty.string()); }, ErrorKind::kMissingArtifact);
}

TEST_CASE("ablation emits one row per setting and repeat") {
  const auto cfg = parse_config(tinycfg::kText);
  const auto dir = scratch("ablate");
  const auto rows = pipeline::ablation_sweep(cfg, dir.string(), {1, 2}, {1, 3}, 2);
  CHECK(rows.size() == 8);
  const auto k = slurp(dir / "ablation_k.csv");
  const auto x = slurp(dir / "ablation_x.csv");
  CHECK(std::count(k.begin(), k.end(), '\n') == 5);
  CHECK(std::count(x.begin(), x.end(), '\n') == 5);
  error_message([&] { pipeline::ablation_sweep(cfg, dir.string(), {}, {1}, 1); }, ErrorKind::kBadConfig);
}

TEST_CASE("command-line exit codes") {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  const auto cfg = dir / "tiny.cfg";
  std::ofstream(cfg) << tinycfg::kText;
  CHECK(cli("") == 1);
  CHECK(cli("frobnicate") == 1);
  CHECK(cli("run-full --config " + (dir / "missing.cfg").string() + " --out " + (dir / "x").string()) == 1);
  CHECK(cli("gen-data --config " + cfg.string() + " --seed 9 --out " + (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "data" / "train.srds"));
  CHECK(cli("bench-latency --out " + (dir / "run").string()) == 2);
  CHECK(cli("report --out " + (dir / "nothing").string()) == 2);
  CHECK(cli("run-full --config " + cfg.string() + " --out " + (dir / "run").string()) == 2);
  CHECK(cli("run-full --config " + cfg.string() + " --seed 9 --out " + (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "run_report.txt"));
}
