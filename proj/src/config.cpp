#include "soap/config.hpp"

#include <charconv>
#include <functional>
#include <set>
#include <sstream>

#include "soap/csv.hpp"
#include "soap/error.hpp"
#include "soap/io.hpp"

namespace soap {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_int(const std::string& v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw std::invalid_argument("expected an integer");
  return out;
}

double parse_real(const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw std::invalid_argument("expected a number");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("expected true or false");
}

std::vector<cellspace::Op> parse_ops(const std::string& v) {
  std::vector<cellspace::Op> ops;
  std::stringstream in(v);
  for (std::string name; std::getline(in, name, ',');) {
    const auto op = cellspace::parse_op(trim(name));
    if (!op) throw std::invalid_argument("unknown op '" + trim(name) + "'");
    ops.push_back(*op);
  }
  return ops;
}

std::string ops_text(const std::vector<cellspace::Op>& ops) {
  std::string s;
  for (std::size_t i = 0; i < ops.size(); ++i) s += (i ? "," : "") + std::string(cellspace::op_name(ops[i]));
  return s;
}

struct Key {
  const char* name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define SOAP_INT(key, field)                                                    \
  Key { key, [](const RunConfig& c) { return std::to_string(c.field); },        \
        [](RunConfig& c, const std::string& v) { c.field = parse_int<std::remove_cvref_t<decltype(c.field)>>(v); } }
#define SOAP_REAL(key, field)                                              \
  Key { key, [](const RunConfig& c) { return csv::number(c.field); },      \
        [](RunConfig& c, const std::string& v) { c.field = static_cast<std::remove_cvref_t<decltype(c.field)>>(parse_real(v)); } }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      SOAP_INT("seed", seed),
      SOAP_INT("space.max_nodes", space.max_nodes),
      SOAP_INT("space.max_edges", space.max_edges),
      Key{"space.ops", [](const RunConfig& c) { return ops_text(c.space.ops); },
          [](RunConfig& c, const std::string& v) { c.space.ops = parse_ops(v); }},
      SOAP_INT("data.maps", data.n_maps),
      SOAP_INT("data.height", data.height),
      SOAP_INT("data.width", data.width),
      SOAP_REAL("data.quantile", data.hotspot_quantile),
      SOAP_REAL("data.train_fraction", split[0]),
      SOAP_REAL("data.val_fraction", split[1]),
      SOAP_REAL("data.test_fraction", split[2]),
      SOAP_INT("macro.channels", macro.channels),
      SOAP_INT("macro.supercells", macro.supercells),
      SOAP_INT("supernet.epochs", supernet.epochs),
      SOAP_REAL("supernet.lr", supernet.lr),
      SOAP_INT("supernet.batch", supernet.batch),
      SOAP_INT("supernet.ghost", supernet.ghost),
      SOAP_REAL("supernet.momentum", supernet.momentum),
      SOAP_INT("smoothing.k", k),
      SOAP_INT("smoothing.per_set", plan.per_set),
      SOAP_REAL("smoothing.overlap", plan.overlap),
      Key{"smoothing.include_singletons", [](const RunConfig& c) { return std::string(c.include_singletons ? "true" : "false"); },
          [](RunConfig& c, const std::string& v) { c.include_singletons = parse_bool(v); }},
      SOAP_INT("augment.factor", factor_x),
      SOAP_INT("campaign.archs", campaign.n_archs),
      SOAP_INT("campaign.retrains", campaign.n_retrains),
      SOAP_INT("campaign.epochs", campaign.epochs),
      SOAP_INT("predictor.trees", predictor.n_trees),
      SOAP_INT("predictor.max_depth", predictor.max_depth),
      SOAP_REAL("predictor.shrinkage", predictor.shrinkage),
      SOAP_INT("predictor.min_samples_leaf", predictor.min_samples_leaf),
      SOAP_INT("predictor.cv_folds", cv_folds),
      SOAP_INT("search.n_scored", search.n_scored),
      SOAP_INT("search.n_finalists", search.n_finalists),
      SOAP_INT("search.final_epochs", final_epochs),
      SOAP_INT("search.baseline_trials", baseline_trials),
  };
  return k;
}

#undef SOAP_INT
#undef SOAP_REAL

}  // namespace

RunConfig RunConfig::desk() { return RunConfig{}; }

RunConfig RunConfig::paper() {
  RunConfig c;
  c.supernet = supernet::TrainHyper::paper();
  return c;
}

void RunConfig::check() const {
  space.check();
  macro.check();
  supernet.check();
  plan.check();
  predictor.check();
  search.check();
  if (data.n_maps < 3 || data.height < 3 || data.width < 3)
    throw Error(ErrorKind::kBadConfig, "data needs >= 3 maps of at least 3x3");
  if (!(data.hotspot_quantile > 0.0 && data.hotspot_quantile < 1.0))
    throw Error(ErrorKind::kBadConfig, "data.quantile must lie in (0, 1)");
  for (double f : split)
    if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorKind::kBadConfig, "split fractions must lie in [0, 1]");
  if (std::abs(split[0] + split[1] + split[2] - 1.0) > 1e-6)
    throw Error(ErrorKind::kBadConfig, "split fractions must sum to 1");
  if (k < 1) throw Error(ErrorKind::kBadConfig, "smoothing.k must be >= 1");
  if (factor_x < 1) throw Error(ErrorKind::kBadConfig, "augment.factor must be >= 1");
  if (campaign.n_archs < 3 || campaign.n_retrains < 2 || campaign.epochs < 1)
    throw Error(ErrorKind::kBadConfig, "campaign needs >= 3 archs, >= 2 retrains and >= 1 epoch");
  if (cv_folds < 2) throw Error(ErrorKind::kBadConfig, "predictor.cv_folds must be >= 2");
  if (final_epochs < 1) throw Error(ErrorKind::kBadConfig, "search.final_epochs must be >= 1");
  if (baseline_trials < 0) throw Error(ErrorKind::kBadConfig, "search.baseline_trials must be >= 0");
}

supernet::TrainHyper RunConfig::standalone_hyper(int epochs) const {
  auto h = supernet;
  h.epochs = epochs;
  h.seed = 0;
  return h;
}

RunConfig parse_config(const std::string& text, const std::string& source) {
  struct Line {
    int no;
    std::string key, value;
  };
  std::vector<Line> lines;
  std::set<std::string> seen;
  std::istringstream in(text);
  int no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++no;
    const auto hash = raw.find('#');
    const auto line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const auto where = source + ":" + std::to_string(no);
    if (eq == std::string::npos) throw Error(ErrorKind::kBadConfig, where + ": expected 'key = value'");
    Line l{no, trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1))};
    if (!seen.insert(l.key).second) throw Error(ErrorKind::kBadConfig, where + ": duplicate key '" + l.key + "'");
    lines.push_back(std::move(l));
  }
  RunConfig cfg = RunConfig::desk();
  for (const auto& l : lines) {
    if (l.key != "preset") continue;
    if (l.value == "desk") cfg = RunConfig::desk();
    else if (l.value == "paper") cfg = RunConfig::paper();
    else throw Error(ErrorKind::kBadConfig, source + ":" + std::to_string(l.no) + ": unknown preset '" + l.value + "'");
  }
  for (const auto& l : lines) {
    if (l.key == "preset") continue;
    const auto where = source + ":" + std::to_string(l.no);
    const Key* key = nullptr;
    for (const auto& k : keys())
      if (l.key == k.name) key = &k;
    if (!key) throw Error(ErrorKind::kBadConfig, where + ": unknown key '" + l.key + "'");
    try {
      key->set(cfg, l.value);
    } catch (const std::invalid_argument& e) {
      throw Error(ErrorKind::kBadConfig, where + ": " + l.key + ": " + e.what() + ", got '" + l.value + "'");
    }
  }
  cfg.check();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  if (!io::exists(path)) throw Error(ErrorKind::kIoError, "config file not found: " + path);
  return parse_config(io::read_file(path), path);
}

std::string config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += std::string(k.name) + " = " + k.get(cfg) + '\n';
  return out;
}

}  // namespace soap
