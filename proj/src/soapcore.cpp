#include "soap/soapcore.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>
#include <sstream>

#include "soap/csv.hpp"
#include "soap/error.hpp"

namespace soap::soapcore {

namespace {

// Distinct canonical archs not in `taken`; gives up after a bounded number of
// consecutive duplicates so small spaces fail loudly instead of spinning.
std::vector<CellArchitecture> sample_unique(std::size_t count, const cellspace::SpaceConfig& space, Rng& rng,
                                            std::set<ArchHash>& taken) {
  std::vector<CellArchitecture> out;
  int misses = 0;
  while (out.size() < count) {
    const auto a = cellspace::canonicalize(cellspace::sample_random(space, rng), space);
    if (taken.insert(cellspace::hash(a, space)).second) {
      out.push_back(a);
      misses = 0;
    } else if (++misses > 10000) {
      throw Error(ErrorKind::kBadConfig, "search space too small for " + std::to_string(count) +
                                             " more unique architectures");
    }
  }
  return out;
}

std::string join_ids(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(ids[i]);
  }
  return s;
}

void check_value(double v, const std::string& context) {
  if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::kFormatError, context + ": value outside [0, 1]");
}

}  // namespace

void SamplePlan::check() const {
  if (per_set < 1) throw Error(ErrorKind::kBadConfig, "candidates per set must be >= 1");
  if (!(overlap >= 0.0 && overlap <= 1.0)) throw Error(ErrorKind::kBadConfig, "overlap must lie in [0, 1]");
}

std::vector<std::vector<CellArchitecture>> plan_candidates(int k, const SamplePlan& plan,
                                                          const cellspace::SpaceConfig& space, Rng& rng) {
  plan.check();
  if (k < 1) throw Error(ErrorKind::kBadConfig, "k must be >= 1");
  const auto n = static_cast<std::size_t>(plan.per_set);
  const auto shared_n = std::min(n, static_cast<std::size_t>(std::ceil(plan.overlap * plan.per_set - 1e-9)));
  std::set<ArchHash> shared_hashes;
  const auto shared = sample_unique(shared_n, space, rng, shared_hashes);
  std::vector<std::vector<CellArchitecture>> sets;
  for (int s = 0; s < k; ++s) {
    auto taken = shared_hashes;
    auto set = shared;
    const auto rest = sample_unique(n - shared_n, space, rng, taken);
    set.insert(set.end(), rest.begin(), rest.end());
    sets.push_back(std::move(set));
  }
  return sets;
}

std::vector<CandidateSet> build_candidate_sets(int k, const SamplePlan& plan, const cellspace::SpaceConfig& space,
                                               Rng& rng, const QueryFn& query) {
  const auto plans = plan_candidates(k, plan, space, rng);
  std::vector<CandidateSet> sets(plans.size());
  std::vector<std::exception_ptr> errors(plans.size());
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < k; ++s) {
    try {
      auto& set = sets[static_cast<std::size_t>(s)];
      set.supernet_id = s;
      for (const auto& a : plans[static_cast<std::size_t>(s)]) {
        const double v = query(s, a);
        set.records.push_back({cellspace::hash(a, space), a.to_string(), v, std::to_string(s)});
      }
    } catch (...) {
      errors[static_cast<std::size_t>(s)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return sets;
}

SmoothedDataset merge_smoothed(const std::vector<CandidateSet>& sets, bool include_singletons) {
  std::map<ArchHash, SmoothedRecord> groups;
  for (const auto& set : sets) {
    for (const auto& r : set.records) {
      auto [it, fresh] = groups.try_emplace(r.hash);
      auto& g = it->second;
      if (fresh) {
        g.record = {r.hash, r.arch, r.roc_auc, std::string(kSmoothedSource)};
      } else {
        g.record.roc_auc = std::max(g.record.roc_auc, r.roc_auc);
      }
      g.contributors.push_back(set.supernet_id);
    }
  }
  SmoothedDataset out;
  for (auto& [h, g] : groups) {
    std::sort(g.contributors.begin(), g.contributors.end());
    g.contributors.erase(std::unique(g.contributors.begin(), g.contributors.end()), g.contributors.end());
    if (g.contributors.size() >= 2 || include_singletons) out.push_back(std::move(g));
  }
  return out;
}

NoiseModel estimate_noise_model(const std::vector<std::vector<double>>& groups) {
  NoiseModel m;
  double total = 0.0, ss = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) continue;
    // Offsets from the first value keep constant groups exactly at zero.
    double shift = 0.0;
    for (double v : g) shift += v - g[0];
    shift /= static_cast<double>(g.size());
    for (double v : g) ss += (v - g[0] - shift) * (v - g[0] - shift);
    for (double v : g) total += v;
    m.samples += g.size();
    if (g.size() >= 2) {
      ++m.groups;
      m.dof += g.size() - 1;
    }
  }
  if (m.dof == 0) throw Error(ErrorKind::kInsufficientData, "noise model needs a group with >= 2 retrains");
  m.mean = total / static_cast<double>(m.samples);
  m.variance = ss / static_cast<double>(m.dof);
  return m;
}

std::vector<PerfRecord> augment(const std::vector<PerfRecord>& dataset, int factor_x, const NoiseModel& noise,
                                Rng& rng) {
  if (dataset.empty()) throw Error(ErrorKind::kBadConfig, "cannot augment an empty dataset");
  if (factor_x < 1) throw Error(ErrorKind::kBadConfig, "augmentation factor must be >= 1");
  if (!(noise.variance >= 0.0)) throw Error(ErrorKind::kBadConfig, "noise variance must be >= 0");
  const double sd = std::sqrt(noise.variance);
  std::vector<PerfRecord> out = dataset;
  const std::size_t extra = static_cast<std::size_t>(factor_x - 1) * dataset.size();
  out.reserve(dataset.size() + extra);
  for (std::size_t i = 0; i < extra; ++i) {
    PerfRecord r = dataset[rng.below(dataset.size())];
    r.roc_auc = std::clamp(r.roc_auc + sd * rng.normal(), 0.0, 1.0);
    r.source = std::string(kAugmentedSource);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PerfRecord> records_of(const SmoothedDataset& smoothed) {
  std::vector<PerfRecord> out;
  out.reserve(smoothed.size());
  for (const auto& s : smoothed) out.push_back(s.record);
  return out;
}

std::string smoothed_csv(const SmoothedDataset& d) {
  std::string out = "arch,auc,sources\n";
  for (const auto& s : d)
    out += csv::field(s.record.arch) + ',' + csv::number(s.record.roc_auc) + ',' + join_ids(s.contributors) + '\n';
  return out;
}

SmoothedDataset parse_smoothed_csv(const std::string& text, const cellspace::SpaceConfig& space) {
  const auto t = csv::parse(text, "smoothed csv");
  const auto ca = t.column("arch"), cv = t.column("auc"), cs = t.column("sources");
  SmoothedDataset out;
  for (const auto& row : t.rows) {
    SmoothedRecord s;
    const auto arch = cellspace::CellArchitecture::parse(row[ca]);
    s.record = {cellspace::hash(arch, space), row[ca], csv::to_double(row[cv], "smoothed csv auc"),
                std::string(kSmoothedSource)};
    check_value(s.record.roc_auc, "smoothed csv");
    std::stringstream ids(row[cs]);
    for (std::string id; std::getline(ids, id, ';');)
      s.contributors.push_back(static_cast<int>(csv::to_double(id, "smoothed csv sources")));
    out.push_back(std::move(s));
  }
  return out;
}

std::string records_csv(const std::vector<PerfRecord>& records) {
  std::string out = "arch,auc,source\n";
  for (const auto& r : records)
    out += csv::field(r.arch) + ',' + csv::number(r.roc_auc) + ',' + csv::field(r.source) + '\n';
  return out;
}

std::vector<PerfRecord> parse_records_csv(const std::string& text, const cellspace::SpaceConfig& space) {
  const auto t = csv::parse(text, "records csv");
  const auto ca = t.column("arch"), cv = t.column("auc"), cs = t.column("source");
  std::vector<PerfRecord> out;
  for (const auto& row : t.rows) {
    const auto arch = cellspace::CellArchitecture::parse(row[ca]);
    out.push_back({cellspace::hash(arch, space), row[ca], csv::to_double(row[cv], "records csv auc"), row[cs]});
    check_value(out.back().roc_auc, "records csv");
  }
  return out;
}

std::string noise_model_text(const std::map<std::string, NoiseModel>& models) {
  std::string out;
  for (const auto& [metric, m] : models) {
    out += metric + ".mean = " + csv::number(m.mean) + '\n';
    out += metric + ".variance = " + csv::number(m.variance) + '\n';
    out += metric + ".samples = " + std::to_string(m.samples) + '\n';
    out += metric + ".groups = " + std::to_string(m.groups) + '\n';
    out += metric + ".dof = " + std::to_string(m.dof) + '\n';
  }
  return out;
}

std::map<std::string, NoiseModel> parse_noise_model_text(const std::string& text) {
  std::map<std::string, NoiseModel> out;
  std::stringstream in(text);
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    const auto dot = line.rfind('.', eq);
    if (eq == std::string::npos || dot == std::string::npos)
      throw Error(ErrorKind::kFormatError, "noise model line " + std::to_string(line_no) + ": expected metric.key = value");
    const auto metric = line.substr(0, dot), key = line.substr(dot + 1, eq - dot - 1), value = line.substr(eq + 3);
    auto& m = out[metric];
    const double v = csv::to_double(value, "noise model " + metric + "." + key);
    if (key == "mean") m.mean = v;
    else if (key == "variance") m.variance = v;
    else if (key == "samples") m.samples = static_cast<std::size_t>(v);
    else if (key == "groups") m.groups = static_cast<std::size_t>(v);
    else if (key == "dof") m.dof = static_cast<std::size_t>(v);
    else throw Error(ErrorKind::kFormatError, "noise model: unknown key '" + key + "'");
  }
  return out;
}

}  // namespace soap::soapcore
