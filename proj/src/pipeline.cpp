#include "soap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "soap/csv.hpp"
#include "soap/error.hpp"
#include "soap/io.hpp"
#include "soap/metrics.hpp"

namespace soap::pipeline {

namespace fs = std::filesystem;
using cellspace::CellArchitecture;
using supernet::QueryResult;

namespace {

// Runs fn(0..n-1) across the OpenMP pool; the first failure (by index) is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string strip_kind(const Error& e) {
  std::string msg = e.what();
  const std::string prefix = std::string(to_string(e.kind())) + ": ";
  if (msg.starts_with(prefix)) msg.erase(0, prefix.size());
  return msg;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

double kv_number(const std::map<std::string, std::string>& kv, const std::string& key, const std::string& source) {
  auto it = kv.find(key);
  if (it == kv.end()) throw Error(ErrorKind::kFormatError, source + ": missing key '" + key + "'");
  return csv::to_double(it->second, source + " " + key);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Nearest-rank percentile.
double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

double corr_or_nan(double (*fn)(std::span<const double>, std::span<const double>), const std::vector<double>& a,
                   const std::vector<double>& b) {
  try {
    return fn(a, b);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDegenerateInput || e.kind() == ErrorKind::kInsufficientData) return std::nan("");
    throw;
  }
}

const char* kSplitFiles[3] = {"data/train.srds", "data/val.srds", "data/test.srds"};

struct CampaignEntry {
  std::string arch;
  cellspace::ArchHash hash;
  int retrain = 0;
  double auc = 0.0;
  double acc = 0.0;
};

// Ground truth: per-arch mean standalone AUC, in first-appearance order.
struct Truth {
  std::vector<CellArchitecture> archs;
  std::vector<double> mean_auc;
};

Truth truth_of(const std::vector<CampaignEntry>& campaign) {
  std::map<cellspace::ArchHash, std::size_t> slot;
  Truth t;
  std::vector<int> counts;
  for (const auto& c : campaign) {
    auto [it, fresh] = slot.try_emplace(c.hash, t.archs.size());
    if (fresh) {
      t.archs.push_back(CellArchitecture::parse(c.arch));
      t.mean_auc.push_back(0.0);
      counts.push_back(0);
    }
    t.mean_auc[it->second] += c.auc;
    ++counts[it->second];
  }
  for (std::size_t i = 0; i < t.mean_auc.size(); ++i) t.mean_auc[i] /= counts[i];
  return t;
}

std::vector<double> predict_truth(const gbpredictor::PredictorModel& m, const Truth& t,
                                  const cellspace::SpaceConfig& space) {
  std::vector<double> out;
  for (const auto& a : t.archs) out.push_back(gbpredictor::predict(m, cellspace::encode_features(a, space)));
  return out;
}

class Runner {
 public:
  Runner(const RunConfig& cfg, std::string dir) : cfg_(cfg), dir_(std::move(dir)) {
    cfg_.check();
    fs::create_directories(dir_);
    const auto text = config_text(cfg_);
    const auto cfg_path = path("config.cfg");
    if (io::exists(cfg_path)) {
      if (io::read_file(cfg_path) != text)
        throw Error(ErrorKind::kBadConfig, dir_ + " holds a run with a different config; use a fresh --out");
    } else {
      io::write_file_atomic(cfg_path, text);
    }
  }

  std::string path(const std::string& rel) const { return (fs::path(dir_) / rel).string(); }

  std::vector<std::string> artifacts(Stage s) const {
    const int k = cfg_.k;
    switch (s) {
      case Stage::kData: return {kSplitFiles[0], kSplitFiles[1], kSplitFiles[2]};
      case Stage::kSupernets: {
        std::vector<std::string> v;
        for (int i = 0; i < k; ++i) v.push_back("supernets/sn_" + std::to_string(i) + ".snck");
        v.push_back("supernets/train_log.csv");
        return v;
      }
      case Stage::kSets: {
        std::vector<std::string> v;
        for (int i = 0; i < k; ++i) v.push_back("sets/set_" + std::to_string(i) + ".csv");
        return v;
      }
      case Stage::kMerge: return {"smoothed.csv"};
      case Stage::kCampaign: return {"campaign.csv"};
      case Stage::kNoise: return {"noise_model.txt"};
      case Stage::kAugment: return {"augmented.csv"};
      case Stage::kPredictor:
        return {"predictor.model", "predictor_loss.csv", "predictor_cv.csv", "predictor_truth.csv"};
      case Stage::kSearch: {
        std::vector<std::string> v = {"search/report.csv", "search/summary.txt", "search/final.snck"};
        if (cfg_.baseline_trials > 0) v.push_back("search/baseline.csv");
        return v;
      }
      case Stage::kReport:
        return {"report/hist_auc.csv", "report/hist_acc.csv", "report/roc.csv", "report/variance.csv",
                "report/summary.txt"};
    }
    return {};
  }

  bool done(Stage s) const {
    for (const auto& a : artifacts(s))
      if (!io::exists(path(a))) return false;
    return true;
  }

  std::vector<Stage> deps(Stage s) const {
    switch (s) {
      case Stage::kData: return {};
      case Stage::kSupernets: return {Stage::kData};
      case Stage::kSets: return {Stage::kSupernets};
      case Stage::kMerge: return {Stage::kSets};
      case Stage::kCampaign: return {Stage::kData};
      case Stage::kNoise: return {Stage::kCampaign};
      case Stage::kAugment: return {Stage::kMerge, Stage::kNoise};
      case Stage::kPredictor: return {Stage::kAugment, Stage::kCampaign};
      case Stage::kSearch: return {Stage::kPredictor};
      case Stage::kReport: return {Stage::kSearch};
    }
    return {};
  }

  /// Runs `s` (after its dependencies) unless its artifacts already exist.
  void ensure(Stage s) {
    if (visited_.contains(s)) return;
    for (Stage d : deps(s)) ensure(d);
    const auto t0 = std::chrono::steady_clock::now();
    const bool resumed = done(s);
    if (!resumed) {
      try {
        compute(s);
      } catch (const Error& e) {
        throw Error(e.kind(), "stage " + std::string(stage_name(s)) + ": " + strip_kind(e));
      } catch (const std::exception& e) {
        throw Error(ErrorKind::kIoError, "stage " + std::string(stage_name(s)) + ": " + e.what());
      }
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    timings_.push_back({std::string(stage_name(s)), dt.count(), resumed});
    visited_.insert(s);
  }

  const std::vector<StageTiming>& timings() const { return timings_; }
  const RunConfig& cfg() const { return cfg_; }

  // ---- artifact loaders (everything downstream reads the on-disk form) -------

  const synthroute::PlacementDataset& data() {
    if (!data_) {
      synthroute::PlacementDataset all;
      for (int s = 0; s < 3; ++s) {
        auto part = synthroute::read_dataset(path(kSplitFiles[s]));
        if (s == 0) {
          all.height = part.height;
          all.width = part.width;
          all.channels = part.channels;
        } else if (part.height != all.height || part.width != all.width) {
          throw Error(ErrorKind::kFormatError, "data splits disagree on map size");
        }
        for (auto& m : part.maps) {
          all.maps.push_back(std::move(m));
          all.splits.push_back(static_cast<synthroute::Split>(s));
        }
      }
      data_ = std::move(all);
    }
    return *data_;
  }

  supernet::Supernet supernet_at(int i) const {
    return {cfg_.space, cfg_.macro, nn::read_checkpoint(path("supernets/sn_" + std::to_string(i) + ".snck")), 0, i};
  }

  std::vector<std::vector<QueryResult>> sets() const {
    std::vector<std::vector<QueryResult>> out;
    for (int i = 0; i < cfg_.k; ++i) out.push_back(read_queries(path("sets/set_" + std::to_string(i) + ".csv")));
    return out;
  }

  soapcore::SmoothedDataset smoothed() const {
    return soapcore::parse_smoothed_csv(io::read_file(path("smoothed.csv")), cfg_.space);
  }

  std::vector<CampaignEntry> campaign() const {
    const auto t = csv::read(path("campaign.csv"));
    const auto ca = t.column("arch"), cr = t.column("retrain"), cu = t.column("auc"), cc = t.column("acc");
    std::vector<CampaignEntry> out;
    for (const auto& row : t.rows) {
      const auto arch = CellArchitecture::parse(row[ca]);
      out.push_back({row[ca], cellspace::hash(arch, cfg_.space), static_cast<int>(csv::to_double(row[cr], "retrain")),
                     csv::to_double(row[cu], "campaign auc"), csv::to_double(row[cc], "campaign acc")});
    }
    return out;
  }

  std::map<std::string, soapcore::NoiseModel> noise() const {
    return soapcore::parse_noise_model_text(io::read_file(path("noise_model.txt")));
  }

  std::vector<soapcore::PerfRecord> augmented() const {
    return soapcore::parse_records_csv(io::read_file(path("augmented.csv")), cfg_.space);
  }

  gbpredictor::PredictorModel predictor() const {
    return gbpredictor::parse_model_text(io::read_file(path("predictor.model")));
  }

  std::vector<QueryResult> read_queries(const std::string& file) const {
    const auto t = csv::read(file);
    const auto ca = t.column("arch"), cu = t.column("auc"), cc = t.column("acc"), cs = t.column("supernet_id");
    std::vector<QueryResult> out;
    for (const auto& row : t.rows) {
      const auto arch = CellArchitecture::parse(row[ca]);
      out.push_back({cellspace::hash(arch, cfg_.space), row[ca], csv::to_double(row[cu], file),
                     csv::to_double(row[cc], file), static_cast<int>(csv::to_double(row[cs], file))});
    }
    return out;
  }

 private:
  void write(const std::string& rel, const std::string& text) const { io::write_file_atomic(path(rel), text); }

  std::uint64_t seed(std::string_view name, std::uint64_t index = 0) const {
    return derive_seed(cfg_.seed, name, index);
  }

  void compute(Stage s) {
    switch (s) {
      case Stage::kData: return compute_data();
      case Stage::kSupernets: return compute_supernets();
      case Stage::kSets: return compute_sets();
      case Stage::kMerge: return compute_merge();
      case Stage::kCampaign: return compute_campaign();
      case Stage::kNoise: return compute_noise();
      case Stage::kAugment: return compute_augment();
      case Stage::kPredictor: return compute_predictor();
      case Stage::kSearch: return compute_search();
      case Stage::kReport: return report(dir_);
    }
  }

  void compute_data() {
    auto gen = cfg_.data;
    gen.seed = seed("data");
    const auto ds = synthroute::split(synthroute::generate(gen), cfg_.split, seed("data.split"));
    for (int s = 0; s < 3; ++s)
      synthroute::write_dataset(ds.subset(static_cast<synthroute::Split>(s)), path(kSplitFiles[s]));
    data_.reset();
  }

  void compute_supernets() {
    const auto& ds = data();
    std::vector<supernet::TrainTrace> traces(static_cast<std::size_t>(cfg_.k));
    parallel_for(traces.size(), [&](std::size_t i) {
      auto net = supernet::build(cfg_.space, cfg_.macro, seed("supernet.init", i), static_cast<int>(i));
      auto hyper = cfg_.supernet;
      hyper.seed = seed("supernet.train", i);
      traces[i] = supernet::train_oneshot(net, ds, hyper);
      nn::write_checkpoint(path("supernets/sn_" + std::to_string(i) + ".snck"), net.params);
    });
    std::string log = "supernet,epoch,loss\n";
    for (std::size_t i = 0; i < traces.size(); ++i)
      for (std::size_t e = 0; e < traces[i].epoch_loss.size(); ++e)
        log += std::to_string(i) + ',' + std::to_string(e) + ',' + csv::number(traces[i].epoch_loss[e]) + '\n';
    write("supernets/train_log.csv", log);
  }

  void compute_sets() {
    const auto& ds = data();
    std::vector<supernet::Supernet> nets;
    for (int i = 0; i < cfg_.k; ++i) nets.push_back(supernet_at(i));
    std::vector<std::vector<double>> accs(nets.size());
    Rng rng(seed("sets"));
    const auto sets = soapcore::build_candidate_sets(cfg_.k, cfg_.plan, cfg_.space, rng,
                                                     [&](int s, const CellArchitecture& a) {
                                                       const auto q = supernet::query(nets[static_cast<std::size_t>(s)], a, ds);
                                                       accs[static_cast<std::size_t>(s)].push_back(q.acc);
                                                       return q.auc;
                                                     });
    for (std::size_t s = 0; s < sets.size(); ++s) {
      std::string text = supernet::query_csv_header();
      for (std::size_t j = 0; j < sets[s].records.size(); ++j) {
        const auto& r = sets[s].records[j];
        text += supernet::query_csv_row({r.hash, r.arch, r.roc_auc, accs[s][j], sets[s].supernet_id});
      }
      write("sets/set_" + std::to_string(s) + ".csv", text);
    }
  }

  void compute_merge() {
    std::vector<soapcore::CandidateSet> sets;
    for (const auto& qs : this->sets()) {
      soapcore::CandidateSet cs;
      for (const auto& q : qs) {
        cs.supernet_id = q.supernet_id;
        cs.records.push_back({q.hash, q.arch, q.auc, std::to_string(q.supernet_id)});
      }
      sets.push_back(std::move(cs));
    }
    const auto merged = soapcore::merge_smoothed(sets, cfg_.include_singletons);
    if (merged.empty())
      throw Error(ErrorKind::kInsufficientData,
                  "no architecture appears in two candidate sets; raise smoothing.overlap or set "
                  "smoothing.include_singletons = true");
    write("smoothed.csv", soapcore::smoothed_csv(merged));
  }

  void compute_campaign() {
    const auto& ds = data();
    Rng rng(seed("campaign.archs"));
    const auto archs = soapcore::plan_candidates(1, {cfg_.campaign.n_archs, 0.0}, cfg_.space, rng).front();
    const auto retrains = static_cast<std::size_t>(cfg_.campaign.n_retrains);
    std::vector<QueryResult> results(archs.size() * retrains);
    parallel_for(results.size(), [&](std::size_t job) {
      auto hyper = cfg_.standalone_hyper(cfg_.campaign.epochs);
      hyper.seed = seed("campaign", job);
      results[job] = supernet::train_standalone(archs[job / retrains], ds, cfg_.space, cfg_.macro, hyper).result;
    });
    std::string text = "arch,retrain,auc,acc\n";
    for (std::size_t job = 0; job < results.size(); ++job)
      text += csv::field(results[job].arch) + ',' + std::to_string(job % retrains) + ',' +
              csv::number(results[job].auc) + ',' + csv::number(results[job].acc) + '\n';
    write("campaign.csv", text);
  }

  void compute_noise() {
    std::map<cellspace::ArchHash, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& c : campaign()) {
      groups[c.hash].first.push_back(c.auc);
      groups[c.hash].second.push_back(c.acc);
    }
    std::vector<std::vector<double>> auc, acc;
    for (auto& [h, g] : groups) {
      auc.push_back(g.first);
      acc.push_back(g.second);
    }
    write("noise_model.txt", soapcore::noise_model_text({{"auc", soapcore::estimate_noise_model(auc)},
                                                         {"acc", soapcore::estimate_noise_model(acc)}}));
  }

  void compute_augment() {
    Rng rng(seed("augment"));
    const auto out = soapcore::augment(soapcore::records_of(smoothed()), cfg_.factor_x, noise().at("auc"), rng);
    write("augmented.csv", soapcore::records_csv(out));
  }

  void compute_predictor() {
    const auto records = augmented();
    auto hyper = cfg_.predictor;
    hyper.seed = seed("predictor");
    const auto fitted = gbpredictor::fit(gbpredictor::features_of(records, cfg_.space),
                                         gbpredictor::targets_of(records), hyper);
    write("predictor.model", gbpredictor::model_text(fitted.model));

    std::string loss = "round,mse\n-1," + csv::number(fitted.base_mse) + '\n';
    for (std::size_t r = 0; r < fitted.round_mse.size(); ++r)
      loss += std::to_string(r) + ',' + csv::number(fitted.round_mse[r]) + '\n';
    write("predictor_loss.csv", loss);

    std::string cv_text = "fold,train_size,test_size,pearson,kendall\n";
    try {
      const auto cv = gbpredictor::cross_validate(records, cfg_.space, cfg_.cv_folds, hyper);
      for (std::size_t f = 0; f < cv.folds.size(); ++f) {
        const auto& s = cv.folds[f];
        cv_text += std::to_string(f) + ',' + std::to_string(s.train_size) + ',' + std::to_string(s.test_size) + ',' +
                   csv::number(s.pearson) + ',' + csv::number(s.kendall) + '\n';
      }
      cv_text += "mean,,," + csv::number(cv.mean_pearson) + ',' + csv::number(cv.mean_kendall) + '\n';
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kInsufficientData) throw;
      cv_text += "mean,,,nan,nan\n";  // too few distinct archs for the requested folds
    }
    write("predictor_cv.csv", cv_text);

    const auto truth = truth_of(campaign());
    const auto pred = predict_truth(fitted.model, truth, cfg_.space);
    std::string t = "arch,predicted,standalone_mean_auc\n";
    for (std::size_t i = 0; i < pred.size(); ++i)
      t += csv::field(truth.archs[i].to_string()) + ',' + csv::number(pred[i]) + ',' + csv::number(truth.mean_auc[i]) +
           '\n';
    write("predictor_truth.csv", t);
  }

  void compute_search() {
    const auto& ds = data();
    const auto model = predictor();
    auto budget = cfg_.search;
    budget.seed = seed("search");
    auto ranked = searcher::search_predictor(model, cfg_.space, budget);
    auto hyper = cfg_.standalone_hyper(cfg_.final_epochs);
    hyper.seed = seed("finalize");
    const auto rep = searcher::finalize(std::move(ranked), cfg_.search.n_finalists, ds, cfg_.space, cfg_.macro, hyper);
    std::optional<searcher::BaselineResult> base;
    if (cfg_.baseline_trials > 0) {
      base = searcher::random_search_baseline(cfg_.space, ds, cfg_.macro, cfg_.standalone_hyper(cfg_.final_epochs),
                                              cfg_.baseline_trials, seed("baseline"));
      std::string text = "trial,arch,auc,acc\n";
      for (std::size_t t = 0; t < base->trace.size(); ++t)
        text += std::to_string(t) + ',' + csv::field(base->trace[t].arch) + ',' + csv::number(base->trace[t].auc) +
                ',' + csv::number(base->trace[t].acc) + '\n';
      write("search/baseline.csv", text);
    }
    nn::write_checkpoint(path("search/final.snck"), rep.best().params);
    write("search/report.csv", searcher::report_csv(rep));
    write("search/summary.txt", searcher::summary_text(rep, base ? &*base : nullptr));
  }

  RunConfig cfg_;
  std::string dir_;
  std::set<Stage> visited_;
  std::vector<StageTiming> timings_;
  std::optional<synthroute::PlacementDataset> data_;
};

struct FinalModel {
  CellArchitecture arch;
  double auc = 0.0;
  double acc = 0.0;
};

FinalModel final_model(const std::string& dir) {
  const auto file = (fs::path(dir) / "search/report.csv").string();
  if (!io::exists(file)) throw Error(ErrorKind::kMissingArtifact, file);
  const auto t = csv::read(file);
  const auto ca = t.column("arch"), cu = t.column("measured_auc"), cc = t.column("measured_acc"),
             ch = t.column("chosen");
  for (const auto& row : t.rows)
    if (row[ch] == "1")
      return {CellArchitecture::parse(row[ca]), csv::to_double(row[cu], file), csv::to_double(row[cc], file)};
  throw Error(ErrorKind::kFormatError, file + ": no chosen row");
}

void require(const std::string& dir, const std::vector<std::string>& rel) {
  for (const auto& r : rel) {
    const auto p = (fs::path(dir) / r).string();
    if (!io::exists(p)) throw Error(ErrorKind::kMissingArtifact, "missing run artifact " + p);
  }
}

}  // namespace

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::kData: return "data";
    case Stage::kSupernets: return "supernets";
    case Stage::kSets: return "sets";
    case Stage::kMerge: return "merge";
    case Stage::kCampaign: return "campaign";
    case Stage::kNoise: return "noise";
    case Stage::kAugment: return "augment";
    case Stage::kPredictor: return "predictor";
    case Stage::kSearch: return "search";
    case Stage::kReport: return "report";
  }
  return "?";
}

RunConfig run_config(const std::string& run_dir) {
  const auto p = (fs::path(run_dir) / "config.cfg").string();
  if (!io::exists(p)) throw Error(ErrorKind::kMissingArtifact, "missing run artifact " + p);
  return load_config(p);
}

RunReport run_until(const RunConfig& cfg, const std::string& run_dir, Stage last) {
  Runner runner(cfg, run_dir);
  for (int s = 0; s <= static_cast<int>(last); ++s) runner.ensure(static_cast<Stage>(s));

  RunReport r;
  r.run_dir = run_dir;
  r.timings = runner.timings();
  r.artifacts.push_back("config.cfg");
  for (int s = 0; s <= static_cast<int>(last); ++s)
    for (const auto& a : runner.artifacts(static_cast<Stage>(s))) r.artifacts.push_back(a);
  const double nan = std::nan("");
  r.final_auc = r.final_acc = r.cv_pearson = r.cv_kendall = r.truth_pearson = r.truth_kendall = nan;
  r.baseline_best = r.baseline_median = r.latency_median_ms = r.latency_p90_ms = nan;
  if (last >= Stage::kPredictor) {
    const auto t = csv::read(runner.path("predictor_cv.csv"));
    const auto& mean_row = t.rows.back();
    r.cv_pearson = csv::to_double(mean_row[t.column("pearson")], "predictor_cv.csv");
    r.cv_kendall = csv::to_double(mean_row[t.column("kendall")], "predictor_cv.csv");
    const auto tr = csv::read(runner.path("predictor_truth.csv"));
    std::vector<double> p, m;
    for (const auto& row : tr.rows) {
      p.push_back(csv::to_double(row[tr.column("predicted")], "predictor_truth.csv"));
      m.push_back(csv::to_double(row[tr.column("standalone_mean_auc")], "predictor_truth.csv"));
    }
    r.truth_pearson = corr_or_nan(&metrics::pearson, p, m);
    r.truth_kendall = corr_or_nan(&metrics::kendall_tau, p, m);
  }
  if (last >= Stage::kSearch) {
    const auto fm = final_model(run_dir);
    r.final_arch = fm.arch.to_string();
    r.final_auc = fm.auc;
    r.final_acc = fm.acc;
    const auto kv = parse_kv(io::read_file(runner.path("search/summary.txt")));
    if (kv.contains("baseline_best_auc")) {
      r.baseline_best = kv_number(kv, "baseline_best_auc", "search/summary.txt");
      r.baseline_median = kv_number(kv, "baseline_median_auc", "search/summary.txt");
    }
  }
  return r;
}

RunReport run_full(const RunConfig& cfg, const std::string& run_dir) {
  auto r = run_until(cfg, run_dir, Stage::kReport);
  const auto t0 = std::chrono::steady_clock::now();
  const auto lat = benchmark_query_latency(run_dir, 200);
  r.latency_median_ms = lat.median_ms;
  r.latency_p90_ms = lat.p90_ms;
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  r.timings.push_back({"latency", dt.count(), false});
  io::write_file_atomic((fs::path(run_dir) / "run_report.txt").string(), run_report_text(r));
  r.artifacts.push_back("run_report.txt");
  return r;
}

std::string run_report_text(const RunReport& r) {
  std::string out = "run_dir = " + r.run_dir + '\n';
  out += "final_arch = " + r.final_arch + '\n';
  out += "final_test_auc = " + csv::number(r.final_auc) + '\n';
  out += "final_test_acc = " + csv::number(r.final_acc) + '\n';
  out += "cv_pearson = " + csv::number(r.cv_pearson) + '\n';
  out += "cv_kendall = " + csv::number(r.cv_kendall) + '\n';
  out += "truth_pearson = " + csv::number(r.truth_pearson) + '\n';
  out += "truth_kendall = " + csv::number(r.truth_kendall) + '\n';
  out += "baseline_best_auc = " + csv::number(r.baseline_best) + '\n';
  out += "baseline_median_auc = " + csv::number(r.baseline_median) + '\n';
  out += "latency_median_ms = " + csv::number(r.latency_median_ms) + '\n';
  out += "latency_p90_ms = " + csv::number(r.latency_p90_ms) + '\n';
  for (const auto& t : r.timings)
    out += "stage." + t.stage + ".seconds = " + csv::number(t.seconds) + (t.resumed ? "  # resumed" : "") + '\n';
  for (const auto& a : r.artifacts) out += "artifact = " + a + '\n';
  return out;
}

// ---- ablation ---------------------------------------------------------------------

std::vector<AblationRow> ablation_sweep(const RunConfig& cfg, const std::string& run_dir,
                                        const std::vector<int>& k_values, const std::vector<int>& x_values,
                                        int repeats) {
  if (k_values.empty() || x_values.empty() || repeats < 1)
    throw Error(ErrorKind::kBadConfig, "ablation needs non-empty k and x lists and repeats >= 1");
  for (int k : k_values)
    if (k < 1) throw Error(ErrorKind::kBadConfig, "ablation k values must be >= 1");
  for (int x : x_values)
    if (x < 1) throw Error(ErrorKind::kBadConfig, "ablation x values must be >= 1");

  Runner runner(cfg, run_dir);
  runner.ensure(Stage::kNoise);  // data + standalone campaign
  const auto& ds = runner.data();
  const auto truth = truth_of(runner.campaign());
  const auto noise = runner.noise().at("auc");
  const int max_k = std::max(cfg.k, *std::max_element(k_values.begin(), k_values.end()));
  auto seed = [&](std::string_view name, std::uint64_t i) { return derive_seed(cfg.seed, name, i); };

  std::vector<AblationRow> rows;
  for (int r = 0; r < repeats; ++r) {
    const auto ru = static_cast<std::uint64_t>(r);
    std::vector<supernet::Supernet> nets(static_cast<std::size_t>(max_k));
    parallel_for(nets.size(), [&](std::size_t i) {
      nets[i] = supernet::build(cfg.space, cfg.macro, seed("ablation.supernet.init", ru * 1000 + i), static_cast<int>(i));
      auto hyper = cfg.supernet;
      hyper.seed = seed("ablation.supernet.train", ru * 1000 + i);
      supernet::train_oneshot(nets[i], ds, hyper);
    });
    // (set, hash) -> auc; sets for different k share their plan prefix.
    std::map<std::pair<int, cellspace::ArchHash>, double> memo;

    auto evaluate = [&](const std::string& axis, int k, int x) {
      Rng set_rng(seed("ablation.sets", ru));
      const auto plans = soapcore::plan_candidates(k, cfg.plan, cfg.space, set_rng);
      std::vector<soapcore::CandidateSet> sets(plans.size());
      std::vector<std::vector<double>> values(plans.size());
      parallel_for(plans.size(), [&](std::size_t s) {
        for (const auto& a : plans[s]) {
          const auto h = cellspace::hash(a, cfg.space);
          double v;
          bool cached;
#pragma omp critical(ablation_memo)
          {
            auto it = memo.find({static_cast<int>(s), h});
            cached = it != memo.end();
            v = cached ? it->second : 0.0;
          }
          if (!cached) {
            v = supernet::query(nets[s], a, ds).auc;
#pragma omp critical(ablation_memo)
            memo[{static_cast<int>(s), h}] = v;
          }
          sets[s].supernet_id = static_cast<int>(s);
          sets[s].records.push_back({h, a.to_string(), v, std::to_string(s)});
        }
      });
      const auto merged = soapcore::merge_smoothed(sets, cfg.include_singletons || k == 1);
      AblationRow row{axis, k, x, r, merged.size(), std::nan(""), std::nan("")};
      if (merged.size() >= 2) {
        Rng aug_rng(seed("ablation.augment", ru));
        const auto records = soapcore::augment(soapcore::records_of(merged), x, noise, aug_rng);
        auto hyper = cfg.predictor;
        hyper.seed = seed("ablation.predictor", ru);
        const auto model = gbpredictor::fit(gbpredictor::features_of(records, cfg.space),
                                            gbpredictor::targets_of(records), hyper)
                               .model;
        const auto pred = predict_truth(model, truth, cfg.space);
        row.truth_pearson = corr_or_nan(&metrics::pearson, pred, truth.mean_auc);
        row.truth_kendall = corr_or_nan(&metrics::kendall_tau, pred, truth.mean_auc);
      }
      rows.push_back(row);
    };
    for (int k : k_values) evaluate("k", k, cfg.factor_x);
    for (int x : x_values) evaluate("x", cfg.k, x);
  }
  // Rows grouped by axis, then value, then repeat.
  std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
    if (a.axis != b.axis) return a.axis < b.axis;
    const int va = a.axis == "k" ? a.k : a.x, vb = b.axis == "k" ? b.k : b.x;
    if (va != vb) return va < vb;
    return a.repeat < b.repeat;
  });
  io::write_file_atomic(runner.path("ablation_k.csv"), ablation_csv(rows, "k"));
  io::write_file_atomic(runner.path("ablation_x.csv"), ablation_csv(rows, "x"));
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows, std::string_view axis) {
  std::string out = "k,x,repeat,n_smoothed,pearson,kendall\n";
  for (const auto& r : rows)
    if (r.axis == axis)
      out += std::to_string(r.k) + ',' + std::to_string(r.x) + ',' + std::to_string(r.repeat) + ',' +
             std::to_string(r.n_smoothed) + ',' + csv::number(r.truth_pearson) + ',' + csv::number(r.truth_kendall) +
             '\n';
  return out;
}

// ---- latency ------------------------------------------------------------------------

LatencyStats benchmark_query_latency(const nn::ParamStore& params, const cellspace::SpaceConfig& space,
                                     const supernet::MacroConfig& macro, const CellArchitecture& arch,
                                     const synthroute::PlacementDataset& data, int n_iters) {
  if (n_iters < 100) throw Error(ErrorKind::kBadConfig, "latency benchmark needs n_iters >= 100");
  if (data.maps.empty()) throw Error(ErrorKind::kBadConfig, "latency benchmark needs at least one map");
  nn::ParamStore local = params;
  const auto input = synthroute::make_batch(data, {0}).features;
  for (int i = 0; i < 10; ++i) supernet::forward(local, space, macro, arch, input, nn::BnMode::kEval, 1);
  LatencyStats st;
  for (int i = 0; i < n_iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = supernet::forward(local, space, macro, arch, input, nn::BnMode::kEval, 1);
    const std::chrono::duration<double, std::milli> dt = std::chrono::steady_clock::now() - t0;
    if (!out.all_finite()) throw Error(ErrorKind::kNumericalDivergence, "non-finite logits during latency benchmark");
    st.samples_ms.push_back(dt.count());
  }
  st.median_ms = median_of(st.samples_ms);
  st.p90_ms = percentile(st.samples_ms, 0.9);
  return st;
}

LatencyStats benchmark_query_latency(const std::string& run_dir, int n_iters) {
  const auto model = (fs::path(run_dir) / "search/final.snck").string();
  if (!io::exists(model)) throw Error(ErrorKind::kModelMissing, "no trained model at " + model + "; run the search stage first");
  const auto cfg = run_config(run_dir);
  const auto fm = final_model(run_dir);
  const auto test = synthroute::read_dataset((fs::path(run_dir) / kSplitFiles[2]).string());
  return benchmark_query_latency(nn::read_checkpoint(model), cfg.space, cfg.macro, fm.arch, test, n_iters);
}

// ---- report -------------------------------------------------------------------------

Histogram histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw Error(ErrorKind::kBadConfig, "histogram needs >= 1 bin");
  if (values.empty()) throw Error(ErrorKind::kDegenerateInput, "histogram of no values");
  Histogram h;
  h.lo = *std::min_element(values.begin(), values.end());
  h.hi = *std::max_element(values.begin(), values.end());
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  const double width = (h.hi - h.lo) / bins;
  for (double v : values) {
    std::size_t b = width > 0.0 ? static_cast<std::size_t>((v - h.lo) / width) : 0;
    ++h.counts[std::min(b, h.counts.size() - 1)];
  }
  return h;
}

std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_lo,bin_hi,count\n";
  const auto n = h.counts.size();
  const double width = (h.hi - h.lo) / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    const double lo = h.lo + width * static_cast<double>(b);
    const double hi = b + 1 == n ? h.hi : h.lo + width * static_cast<double>(b + 1);
    out += csv::number(lo) + ',' + csv::number(hi) + ',' + std::to_string(h.counts[b]) + '\n';
  }
  return out;
}

void report(const std::string& run_dir) {
  const auto cfg = run_config(run_dir);
  std::vector<std::string> needed = {kSplitFiles[0], kSplitFiles[1], kSplitFiles[2], "noise_model.txt",
                                     "predictor_cv.csv", "predictor_truth.csv", "search/report.csv",
                                     "search/summary.txt", "search/final.snck"};
  for (int i = 0; i < cfg.k; ++i) needed.push_back("sets/set_" + std::to_string(i) + ".csv");
  require(run_dir, needed);
  auto p = [&](const std::string& rel) { return (fs::path(run_dir) / rel).string(); };

  // Runner construction only verifies config.cfg here; no stage is run.
  Runner runner(cfg, run_dir);
  std::vector<double> aucs, accs;
  for (const auto& set : runner.sets())
    for (const auto& q : set) {
      aucs.push_back(q.auc);
      accs.push_back(q.acc);
    }
  constexpr int kBins = 20;
  io::write_file_atomic(p("report/hist_auc.csv"), histogram_csv(histogram(aucs, kBins)));
  io::write_file_atomic(p("report/hist_acc.csv"), histogram_csv(histogram(accs, kBins)));

  const auto fm = final_model(run_dir);
  auto params = nn::read_checkpoint(p("search/final.snck"));
  const auto& ds = runner.data();
  const auto ev = supernet::evaluate(params, cfg.space, cfg.macro, fm.arch, ds, ds.indices(synthroute::Split::kTest));
  std::vector<double> scores(ev.probabilities.begin(), ev.probabilities.end());
  std::vector<int> labels(ev.labels.begin(), ev.labels.end());
  const auto curve = metrics::roc_curve(scores, labels);
  io::write_file_atomic(p("report/roc.csv"), metrics::roc_curve_csv(curve));

  const auto noise = runner.noise();
  std::string var = "metric,mean,variance,samples,groups,dof\n";
  for (const auto& [metric, m] : noise)
    var += metric + ',' + csv::number(m.mean) + ',' + csv::number(m.variance) + ',' + std::to_string(m.samples) + ',' +
           std::to_string(m.groups) + ',' + std::to_string(m.dof) + '\n';
  io::write_file_atomic(p("report/variance.csv"), var);

  const auto search = parse_kv(io::read_file(p("search/summary.txt")));
  const auto cv = csv::read(p("predictor_cv.csv"));
  const auto tr = csv::read(p("predictor_truth.csv"));
  std::vector<double> pred, truth;
  for (const auto& row : tr.rows) {
    pred.push_back(csv::to_double(row[tr.column("predicted")], "predictor_truth.csv"));
    truth.push_back(csv::to_double(row[tr.column("standalone_mean_auc")], "predictor_truth.csv"));
  }
  std::string s;
  s += "final_arch = " + fm.arch.to_string() + '\n';
  s += "final_test_auc = " + csv::number(fm.auc) + '\n';
  s += "final_test_acc = " + csv::number(fm.acc) + '\n';
  s += "roc_points = " + std::to_string(curve.size()) + '\n';
  s += "roc_trapezoid_auc = " + csv::number(metrics::trapezoid_area(curve)) + '\n';
  s += "queried_records = " + std::to_string(aucs.size()) + '\n';
  s += "queried_auc_mean = " + csv::number(std::accumulate(aucs.begin(), aucs.end(), 0.0) / aucs.size()) + '\n';
  s += "queried_acc_mean = " + csv::number(std::accumulate(accs.begin(), accs.end(), 0.0) / accs.size()) + '\n';
  for (const auto& [metric, m] : noise) {
    s += "standalone_" + metric + "_mean = " + csv::number(m.mean) + '\n';
    s += "standalone_" + metric + "_variance = " + csv::number(m.variance) + '\n';
  }
  s += "predictor_cv_pearson = " + cv.rows.back()[cv.column("pearson")] + '\n';
  s += "predictor_cv_kendall = " + cv.rows.back()[cv.column("kendall")] + '\n';
  s += "predictor_truth_pearson = " + csv::number(corr_or_nan(&metrics::pearson, pred, truth)) + '\n';
  s += "predictor_truth_kendall = " + csv::number(corr_or_nan(&metrics::kendall_tau, pred, truth)) + '\n';
  for (const char* key : {"predicted_vs_measured_pearson", "baseline_trials", "baseline_best_auc", "baseline_median_auc"})
    if (search.contains(key)) s += std::string(key) + " = " + search.at(key) + '\n';
  io::write_file_atomic(p("report/summary.txt"), s);
}

}  // namespace soap::pipeline
