// soapnas: command-line driver for the search pipeline.
//
// Exit status: 0 success, 1 usage or configuration error, 2 stage failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "soap/config.hpp"
#include "soap/csv.hpp"
#include "soap/error.hpp"
#include "soap/pipeline.hpp"

namespace {

using soap::pipeline::Stage;

constexpr int kUsage = 1;
constexpr int kStageFailure = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool need_out = true) {
  cmd->add_option("--config", c.config, "run configuration (key = value); desk preset when omitted");
  cmd->add_option("--seed", c.seed, "global seed, overrides the config");
  auto* out = cmd->add_option("--out", c.out, "run directory");
  if (need_out) out->required();
}

soap::RunConfig resolve(const Common& c) {
  auto cfg = c.config.empty() ? soap::RunConfig::desk() : soap::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.check();
  return cfg;
}

void print_report(const soap::pipeline::RunReport& r) {
  for (const auto& t : r.timings)
    std::cout << "  " << t.stage << (t.resumed ? " (resumed)" : "") << "  " << t.seconds << " s\n";
  if (!r.final_arch.empty()) {
    std::cout << "final arch      " << r.final_arch << '\n'
              << "test ROC-AUC    " << r.final_auc << '\n'
              << "test accuracy   " << r.final_acc << '\n';
  }
  if (!std::isnan(r.cv_pearson)) std::cout << "cv pearson      " << r.cv_pearson << '\n';
  if (!std::isnan(r.truth_pearson)) std::cout << "truth pearson   " << r.truth_pearson << '\n';
  if (!std::isnan(r.baseline_best))
    std::cout << "baseline best   " << r.baseline_best << "  median " << r.baseline_median << '\n';
  if (!std::isnan(r.latency_median_ms))
    std::cout << "latency (ms)    median " << r.latency_median_ms << "  p90 " << r.latency_p90_ms << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-shot NAS with k-shot smoothing and noise augmentation for routability prediction"};
  app.require_subcommand(1);

  struct StageCmd {
    const char* name;
    const char* help;
    Stage last;
  };
  const std::vector<StageCmd> stage_cmds = {
      {"gen-data", "generate and split the synthetic placement dataset", Stage::kData},
      {"train-supernets", "train the k one-shot supernets", Stage::kSupernets},
      {"build-sets", "query candidate sets against each supernet", Stage::kSets},
      {"merge", "merge candidate sets (k-shot smoothing)", Stage::kMerge},
      {"noise-campaign", "standalone retrains and the noise model", Stage::kNoise},
      {"augment", "augment the smoothed dataset with model noise", Stage::kAugment},
      {"fit-predictor", "fit and cross-validate the boosted-tree predictor", Stage::kPredictor},
      {"search", "rank the space, train finalists and the random baseline", Stage::kSearch},
  };
  Common common;
  std::optional<Stage> chosen_stage;
  for (const auto& s : stage_cmds) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, common);
    cmd->callback([&, last = s.last] { chosen_stage = last; });
  }

  auto* full = app.add_subcommand("run-full", "every stage, the report and the latency benchmark");
  add_common(full, common);

  std::vector<int> k_values = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> x_values = {1, 3, 5, 7, 9};
  int repeats = 3;
  auto* ablate = app.add_subcommand("ablate", "sweep k and x, scoring the predictor against standalone truth");
  add_common(ablate, common);
  ablate->add_option("--k", k_values, "k values (x fixed at the config's factor)")->delimiter(',');
  ablate->add_option("--x", x_values, "x values (k fixed at the config's k)")->delimiter(',');
  ablate->add_option("--repeats", repeats, "independent repeats")->check(CLI::PositiveNumber);

  int iters = 1000;
  auto* bench = app.add_subcommand("bench-latency", "single-map inference latency of a run's final model");
  bench->add_option("--out", common.out, "run directory")->required();
  bench->add_option("--iters", iters, "timed iterations (>= 100)")->check(CLI::Range(100, 100000000));

  auto* rep = app.add_subcommand("report", "rebuild report/ from a finished run");
  rep->add_option("--out", common.out, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << '\n' << app.help();
    return kUsage;
  }

  soap::RunConfig cfg;
  if (!bench->parsed() && !rep->parsed()) {
    try {
      cfg = resolve(common);
    } catch (const soap::Error& e) {
      std::cerr << "soapnas: " << e.what() << '\n';
      return kUsage;
    }
  }

  try {
    if (chosen_stage) {
      print_report(soap::pipeline::run_until(cfg, common.out, *chosen_stage));
    } else if (full->parsed()) {
      const auto r = soap::pipeline::run_full(cfg, common.out);
      print_report(r);
      std::cout << "report          " << common.out << "/run_report.txt\n";
    } else if (ablate->parsed()) {
      const auto rows = soap::pipeline::ablation_sweep(cfg, common.out, k_values, x_values, repeats);
      std::cout << "axis k x repeat n_smoothed pearson kendall\n";
      for (const auto& r : rows)
        std::cout << r.axis << ' ' << r.k << ' ' << r.x << ' ' << r.repeat << ' ' << r.n_smoothed << ' '
                  << soap::csv::number(r.truth_pearson) << ' ' << soap::csv::number(r.truth_kendall) << '\n';
    } else if (bench->parsed()) {
      const auto st = soap::pipeline::benchmark_query_latency(common.out, iters);
      std::cout << "median_ms " << st.median_ms << "\np90_ms " << st.p90_ms << '\n';
    } else if (rep->parsed()) {
      soap::pipeline::report(common.out);
      std::cout << "wrote " << common.out << "/report\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "soapnas: " << e.what() << '\n';
    return kStageFailure;
  }
  return 0;
}
