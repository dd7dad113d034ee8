#include "soap/supernet.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "soap/csv.hpp"
#include "soap/error.hpp"
#include "soap/metrics.hpp"
#include "soap/rng.hpp"

namespace soap::supernet {

using cellspace::Op;
using nn::ParamStore;
using nn::Tensor;

namespace {

std::string edge_name(int s, int from, int to) {
  return "cell" + std::to_string(s) + ".edge" + std::to_string(from) + "_" + std::to_string(to);
}

std::string node_name(int s, int slot, Op op) {
  return "cell" + std::to_string(s) + ".node" + std::to_string(slot) + "." + std::string(cellspace::op_name(op));
}

// BN + ReLU applied to each supercell's output node.
std::string cell_out_name(int s) { return "cell" + std::to_string(s) + ".out"; }

bool is_running_stat(const std::string& name) {
  return name.ends_with(".bn.mean") || name.ends_with(".bn.var");
}

// ---- parameter construction -----------------------------------------------------

class ParamBuilder {
 public:
  ParamBuilder(std::uint64_t seed, ParamStore& out) : seed_(seed), out_(out) {}

  void conv(const std::string& prefix, int out_ch, int in_ch, int k, bool bias) {
    Tensor w({out_ch, in_ch, k, k});
    Rng rng(derive_seed(seed_, prefix + ".w"));
    const double bound = std::sqrt(6.0 / static_cast<double>(in_ch * k * k));
    for (auto& v : w.values()) v = static_cast<float>(rng.uniform(-bound, bound));
    out_[prefix + ".w"] = std::move(w);
    if (bias) out_[prefix + ".b"] = Tensor({out_ch});
  }

  void bn(const std::string& prefix, int ch) {
    out_[prefix + ".bn.scale"] = Tensor({ch}, 1.0f);
    out_[prefix + ".bn.shift"] = Tensor({ch}, 0.0f);
    out_[prefix + ".bn.mean"] = Tensor({ch}, 0.0f);
    out_[prefix + ".bn.var"] = Tensor({ch}, 1.0f);
  }

  void node(const std::string& prefix, Op op, int ch) {
    switch (op) {
      case Op::kConv3x3:
        conv(prefix, ch, ch, 3, false);
        bn(prefix, ch);
        break;
      case Op::kConv1x1:
        conv(prefix, ch, ch, 1, false);
        bn(prefix, ch);
        break;
      case Op::kMaxPool3x3:
        break;
    }
  }

 private:
  std::uint64_t seed_;
  ParamStore& out_;
};

// Slot of canonical node `node` (of n) inside the padded max_nodes frame.
int frame_slot(int node, int n, int max_nodes) { return node == n - 1 ? max_nodes - 1 : node; }

// ---- tape-based execution of one path --------------------------------------------

struct Step {
  enum class Kind { kConv, kBn, kRelu, kPool, kSum } kind;
  std::vector<int> in;
  int out = -1;
  std::string prefix;  // conv: "<prefix>.w"/".b"; bn: "<prefix>.bn.*"
  bool has_bias = false;
  nn::BnCache bn;
  nn::MaxPoolResult pool;
};

class PathRunner {
 public:
  PathRunner(ParamStore& params, nn::BnMode mode, int ghost) : params_(params), mode_(mode), ghost_(ghost) {}

  int input(Tensor x) {
    values_.push_back(std::move(x));
    return static_cast<int>(values_.size()) - 1;
  }

  int conv(int in, const std::string& prefix, bool bias) {
    const Tensor& w = get(prefix + ".w");
    const Tensor* b = bias ? &get(prefix + ".b") : nullptr;
    Step s{Step::Kind::kConv, {in}, -1, prefix, bias, {}, {}};
    return push(std::move(s), nn::conv2d(values_[static_cast<std::size_t>(in)], w, b));
  }

  int bn(int in, const std::string& prefix) {
    Step s{Step::Kind::kBn, {in}, -1, prefix, false, {}, {}};
    auto p = take_bn(prefix);
    Tensor y = nn::ghost_batchnorm(values_[static_cast<std::size_t>(in)], p, ghost_, mode_, &s.bn);
    give_bn(prefix, std::move(p));
    return push(std::move(s), std::move(y));
  }

  int relu(int in) {
    return push(Step{Step::Kind::kRelu, {in}, -1, {}, false, {}, {}}, nn::relu(values_[static_cast<std::size_t>(in)]));
  }

  int pool(int in) {
    Step s{Step::Kind::kPool, {in}, -1, {}, false, {}, {}};
    s.pool = nn::maxpool3x3(values_[static_cast<std::size_t>(in)]);
    Tensor y = s.pool.y;
    return push(std::move(s), std::move(y));
  }

  int sum(const std::vector<int>& ins) {
    if (ins.size() == 1) return ins[0];
    Tensor y = values_[static_cast<std::size_t>(ins[0])];
    for (std::size_t k = 1; k < ins.size(); ++k) {
      const Tensor& x = values_[static_cast<std::size_t>(ins[k])];
      for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
    }
    return push(Step{Step::Kind::kSum, ins, -1, {}, false, {}, {}}, std::move(y));
  }

  const Tensor& value(int id) const { return values_[static_cast<std::size_t>(id)]; }

  /// Backpropagates `grad_out` from value `out`; value 0 (the network input)
  /// receives no gradient.
  ParamStore backward(int out, Tensor grad_out) {
    ParamStore grads;
    std::vector<Tensor> g(values_.size());
    g[static_cast<std::size_t>(out)] = std::move(grad_out);
    const auto grad_of = [&](int id) -> Tensor* {
      if (id == 0) return nullptr;
      auto& t = g[static_cast<std::size_t>(id)];
      if (t.size() == 0) t = Tensor(values_[static_cast<std::size_t>(id)].shape());
      return &t;
    };
    const auto param_grad = [&](const std::string& name) -> Tensor* {
      auto it = grads.find(name);
      if (it == grads.end()) it = grads.emplace(name, Tensor(get(name).shape())).first;
      return &it->second;
    };
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
      Step& s = *it;
      Tensor& gy = g[static_cast<std::size_t>(s.out)];
      if (gy.size() == 0) continue;  // output unused downstream
      switch (s.kind) {
        case Step::Kind::kConv:
          nn::conv2d_backward(values_[static_cast<std::size_t>(s.in[0])], get(s.prefix + ".w"), gy, grad_of(s.in[0]),
                              param_grad(s.prefix + ".w"), s.has_bias ? param_grad(s.prefix + ".b") : nullptr);
          break;
        case Step::Kind::kBn: {
          Tensor* gscale = param_grad(s.prefix + ".bn.scale");
          Tensor* gshift = param_grad(s.prefix + ".bn.shift");
          Tensor* gx = grad_of(s.in[0]);
          Tensor scratch;
          if (!gx) {
            scratch = Tensor(gy.shape());
            gx = &scratch;
          }
          auto p = take_bn(s.prefix);
          nn::ghost_batchnorm_backward(s.bn, p, gy, *gx, gscale, gshift);
          give_bn(s.prefix, std::move(p));
          break;
        }
        case Step::Kind::kRelu:
          if (auto* gx = grad_of(s.in[0])) nn::relu_backward(values_[static_cast<std::size_t>(s.in[0])], gy, *gx);
          break;
        case Step::Kind::kPool:
          if (auto* gx = grad_of(s.in[0])) nn::maxpool3x3_backward(s.pool, gy, *gx);
          break;
        case Step::Kind::kSum:
          for (int in : s.in)
            if (auto* gx = grad_of(in))
              for (std::size_t i = 0; i < gy.size(); ++i) (*gx)[i] += gy[i];
          break;
      }
      gy = Tensor();  // release as soon as consumed
    }
    return grads;
  }

 private:
  const Tensor& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(ErrorKind::kInvalidArchitecture, "missing parameter " + name);
    return it->second;
  }

  Tensor& get_mut(const std::string& name) { return const_cast<Tensor&>(get(name)); }

  nn::BnParams take_bn(const std::string& prefix) {
    return {std::move(get_mut(prefix + ".bn.scale")), std::move(get_mut(prefix + ".bn.shift")),
            std::move(get_mut(prefix + ".bn.mean")), std::move(get_mut(prefix + ".bn.var"))};
  }

  void give_bn(const std::string& prefix, nn::BnParams p) {
    get_mut(prefix + ".bn.scale") = std::move(p.scale);
    get_mut(prefix + ".bn.shift") = std::move(p.shift);
    get_mut(prefix + ".bn.mean") = std::move(p.running_mean);
    get_mut(prefix + ".bn.var") = std::move(p.running_var);
  }

  int push(Step s, Tensor y) {
    values_.push_back(std::move(y));
    const int id = static_cast<int>(values_.size()) - 1;
    s.out = id;
    steps_.push_back(std::move(s));
    return id;
  }

  ParamStore& params_;
  nn::BnMode mode_;
  int ghost_;
  std::vector<Tensor> values_;
  std::vector<Step> steps_;
};

int run_path(PathRunner& r, const SpaceConfig& space, const MacroConfig& macro, const CellArchitecture& canon,
             const Tensor& input) {
  int h = r.input(input);
  h = r.relu(r.bn(r.conv(h, "stem", false), "stem"));
  const int n = canon.num_nodes();
  for (int s = 0; s < macro.supercells; ++s) {
    std::vector<int> node_val(static_cast<std::size_t>(n), -1);
    node_val[0] = h;
    for (int j = 1; j < n; ++j) {
      std::vector<int> incoming;
      for (int i = 0; i < j; ++i)
        if (canon.edge(i, j))
          incoming.push_back(r.conv(node_val[static_cast<std::size_t>(i)],
                                    edge_name(s, frame_slot(i, n, space.max_nodes), frame_slot(j, n, space.max_nodes)),
                                    true));
      int v = r.sum(incoming);
      if (j < n - 1) {
        const std::string prefix = node_name(s, j, canon.op(j));
        switch (canon.op(j)) {
          case Op::kConv3x3:
          case Op::kConv1x1:
            v = r.relu(r.bn(r.conv(v, prefix, false), prefix));
            break;
          case Op::kMaxPool3x3:
            v = r.pool(v);
            break;
        }
      }
      node_val[static_cast<std::size_t>(j)] = v;
    }
    h = r.relu(r.bn(node_val[static_cast<std::size_t>(n - 1)], cell_out_name(s)));
  }
  return r.conv(h, "head", true);
}

CellArchitecture checked_canonical(const CellArchitecture& arch, const SpaceConfig& space) {
  return cellspace::canonicalize(arch, space);  // throws kInvalidArchitecture
}

void train_loop(ParamStore& params, const SpaceConfig& space, const MacroConfig& macro,
                const synthroute::PlacementDataset& data, const TrainHyper& hyper,
                const std::function<CellArchitecture()>& next_arch, TrainTrace& trace) {
  const auto train_idx = data.indices(synthroute::Split::kTrain);
  if (train_idx.empty()) throw Error(ErrorKind::kBadConfig, "dataset has no train split");
  std::map<std::string, Tensor> velocity;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    auto order = train_idx;
    Rng order_rng(derive_seed(hyper.seed, "train.order", static_cast<std::uint64_t>(epoch)));
    order_rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch));
      if ((end - start) % static_cast<std::size_t>(hyper.ghost) != 0) continue;  // ragged tail
      const std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
      const auto arch = next_arch();
      auto step = loss_and_gradients(params, space, macro, arch, synthroute::make_batch(data, idx), hyper.ghost);
      if (!std::isfinite(step.loss))
        throw Error(ErrorKind::kNumericalDivergence, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                                         std::to_string(batches) + ", cell " + arch.to_string());
      for (auto& [name, g] : step.grads) nn::sgd_step(params.at(name), g, hyper.lr, hyper.momentum, velocity[name]);
      total += step.loss;
      ++batches;
    }
    trace.epoch_loss.push_back(batches ? total / batches : 0.0);
  }
}

}  // namespace

void MacroConfig::check() const {
  if (in_channels < 1 || channels < 1 || supercells < 1)
    throw Error(ErrorKind::kBadConfig, "macro config needs positive channels and supercells");
}

TrainHyper TrainHyper::paper() { return {240, 0.02f, 32, 8, 0.9f, 0}; }
TrainHyper TrainHyper::desk() { return {8, 0.02f, 16, 8, 0.9f, 0}; }

void TrainHyper::check() const {
  if (epochs < 0) throw Error(ErrorKind::kBadConfig, "epochs must be >= 0");
  if (!(lr >= 0.0f) || !(momentum >= 0.0f && momentum < 1.0f))
    throw Error(ErrorKind::kBadConfig, "lr must be >= 0 and momentum in [0, 1)");
  if (batch < 1 || ghost < 1 || batch % ghost != 0)
    throw Error(ErrorKind::kBadConfig, "batch must be a positive multiple of ghost");
}

Supernet build(const SpaceConfig& space, const MacroConfig& macro, std::uint64_t seed, int id) {
  space.check();
  macro.check();
  Supernet net{space, macro, {}, seed, id};
  ParamBuilder b(seed, net.params);
  const int C = macro.channels;
  b.conv("stem", C, macro.in_channels, 3, false);
  b.bn("stem", C);
  for (int s = 0; s < macro.supercells; ++s) {
    for (int i = 0; i < space.max_nodes; ++i)
      for (int j = i + 1; j < space.max_nodes; ++j) b.conv(edge_name(s, i, j), C, C, 1, true);
    for (int k = 1; k < space.max_nodes - 1; ++k)
      for (Op op : space.ops) b.node(node_name(s, k, op), op, C);
    b.bn(cell_out_name(s), C);
  }
  b.conv("head", 1, C, 1, true);
  return net;
}

std::vector<std::string> path_parameter_names(const SpaceConfig& space, const MacroConfig& macro,
                                              const CellArchitecture& arch) {
  const auto canon = checked_canonical(arch, space);
  const int n = canon.num_nodes();
  std::vector<std::string> names = {"stem.w", "stem.bn.scale", "stem.bn.shift", "stem.bn.mean", "stem.bn.var",
                                    "head.w", "head.b"};
  for (int s = 0; s < macro.supercells; ++s) {
    for (const char* suffix : {".bn.scale", ".bn.shift", ".bn.mean", ".bn.var"}) names.push_back(cell_out_name(s) + suffix);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (canon.edge(i, j)) {
          const auto e = edge_name(s, frame_slot(i, n, space.max_nodes), frame_slot(j, n, space.max_nodes));
          names.push_back(e + ".w");
          names.push_back(e + ".b");
        }
    for (int k = 1; k < n - 1; ++k) {
      if (canon.op(k) == Op::kMaxPool3x3) continue;
      const auto p = node_name(s, k, canon.op(k));
      for (const char* suffix : {".w", ".bn.scale", ".bn.shift", ".bn.mean", ".bn.var"}) names.push_back(p + suffix);
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

nn::ParamStore build_path_params(const SpaceConfig& space, const MacroConfig& macro, const CellArchitecture& arch,
                                 std::uint64_t seed) {
  // Same per-name streams as build(), restricted to the path's tensors.
  const auto full = build(space, macro, seed).params;
  ParamStore out;
  for (const auto& name : path_parameter_names(space, macro, arch)) out[name] = full.at(name);
  return out;
}

std::size_t parameter_count(const SpaceConfig& space, const MacroConfig& macro) {
  const auto C = static_cast<std::size_t>(macro.channels);
  const auto m = static_cast<std::size_t>(space.max_nodes);
  std::size_t per_cell = m * (m - 1) / 2 * (C * C + C) + 2 * C;  // edges + output BN
  for (std::size_t k = 1; k + 1 < m; ++k)
    for (Op op : space.ops) {
      if (op == Op::kConv3x3) per_cell += 9 * C * C + 2 * C;
      if (op == Op::kConv1x1) per_cell += C * C + 2 * C;
    }
  const std::size_t stem = 9 * C * static_cast<std::size_t>(macro.in_channels) + 2 * C;
  const std::size_t head = C + 1;
  return stem + static_cast<std::size_t>(macro.supercells) * per_cell + head;
}

std::size_t parameter_count(const nn::ParamStore& params) {
  std::size_t total = 0;
  for (const auto& [name, t] : params)
    if (!is_running_stat(name)) total += t.size();
  return total;
}

Tensor forward(ParamStore& params, const SpaceConfig& space, const MacroConfig& macro, const CellArchitecture& arch,
               const Tensor& input, nn::BnMode mode, int ghost) {
  const auto canon = checked_canonical(arch, space);
  PathRunner r(params, mode, ghost);
  const int out = run_path(r, space, macro, canon, input);
  return r.value(out);
}

StepResult loss_and_gradients(ParamStore& params, const SpaceConfig& space, const MacroConfig& macro,
                              const CellArchitecture& arch, const synthroute::Batch& batch, int ghost) {
  const auto canon = checked_canonical(arch, space);
  PathRunner r(params, nn::BnMode::kTrain, ghost);
  const int out = run_path(r, space, macro, canon, batch.features);
  Tensor grad_logits;
  StepResult res;
  res.loss = nn::sigmoid_bce_loss(r.value(out), batch.labels, &grad_logits);
  res.grads = r.backward(out, std::move(grad_logits));
  return res;
}

TrainTrace train_oneshot(Supernet& net, const synthroute::PlacementDataset& data, const TrainHyper& hyper) {
  hyper.check();
  TrainTrace trace;
  Rng path_rng(derive_seed(hyper.seed, "train.path"));
  train_loop(net.params, net.space, net.macro, data, hyper,
             [&] { return cellspace::sample_random(net.space, path_rng); }, trace);
  return trace;
}

Evaluation evaluate(ParamStore& params, const SpaceConfig& space, const MacroConfig& macro,
                    const CellArchitecture& arch, const synthroute::PlacementDataset& data,
                    const std::vector<int>& maps) {
  if (maps.empty()) throw Error(ErrorKind::kBadConfig, "no maps to evaluate");
  Evaluation ev;
  constexpr std::size_t kEvalBatch = 16;
  for (std::size_t start = 0; start < maps.size(); start += kEvalBatch) {
    const std::size_t end = std::min(maps.size(), start + kEvalBatch);
    const std::vector<int> idx(maps.begin() + static_cast<std::ptrdiff_t>(start),
                               maps.begin() + static_cast<std::ptrdiff_t>(end));
    const auto batch = synthroute::make_batch(data, idx);
    const Tensor logits = forward(params, space, macro, arch, batch.features, nn::BnMode::kEval, 1);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      ev.probabilities.push_back(nn::sigmoid(logits[i]));
      ev.labels.push_back(batch.labels[i] > 0.5f ? 1 : 0);
    }
  }
  ev.auc = metrics::roc_auc(std::span<const float>(ev.probabilities), std::span<const std::uint8_t>(ev.labels));
  ev.acc = metrics::accuracy(ev.probabilities, ev.labels);
  return ev;
}

QueryResult query(const Supernet& net, const CellArchitecture& arch, const synthroute::PlacementDataset& data) {
  const auto canon = checked_canonical(arch, net.space);
  ParamStore local = net.params;
  auto calib = data.indices(synthroute::Split::kTrain);
  if (calib.empty()) throw Error(ErrorKind::kBadConfig, "dataset has no train split for BN calibration");
  calib.resize(std::min<std::size_t>(calib.size(), kCalibrationMaps));
  forward(local, net.space, net.macro, canon, synthroute::make_batch(data, calib).features, nn::BnMode::kCalibrate, 1);
  const auto val = data.indices(synthroute::Split::kVal);
  if (val.empty()) throw Error(ErrorKind::kBadConfig, "dataset has no validation split");
  const auto ev = evaluate(local, net.space, net.macro, canon, data, val);
  return {cellspace::hash(canon, net.space), canon.to_string(), ev.auc, ev.acc, net.id};
}

StandaloneResult train_standalone(const CellArchitecture& arch, const synthroute::PlacementDataset& data,
                                  const SpaceConfig& space, const MacroConfig& macro, const TrainHyper& hyper) {
  hyper.check();
  const auto canon = checked_canonical(arch, space);
  StandaloneResult out;
  out.params = build_path_params(space, macro, canon, derive_seed(hyper.seed, "standalone.init"));
  train_loop(out.params, space, macro, data, hyper, [&] { return canon; }, out.trace);
  const auto test = data.indices(synthroute::Split::kTest);
  if (test.empty()) throw Error(ErrorKind::kBadConfig, "dataset has no test split");
  const auto ev = evaluate(out.params, space, macro, canon, data, test);
  out.result = {cellspace::hash(canon, space), canon.to_string(), ev.auc, ev.acc, kStandaloneId};
  return out;
}

Correlation correlate(std::vector<double> queried, std::vector<double> truth) {
  if (queried.size() < 3) throw Error(ErrorKind::kInsufficientData, "correlation needs at least 3 architectures");
  Correlation c;
  c.pearson = metrics::pearson(queried, truth);
  c.kendall_tau = metrics::kendall_tau(queried, truth);
  c.best_queried_auc = *std::max_element(queried.begin(), queried.end());
  c.queried = std::move(queried);
  c.truth = std::move(truth);
  return c;
}

Correlation evaluate_correlation(const Supernet& net, const std::vector<CellArchitecture>& archs,
                                 const std::vector<QueryResult>& ground_truth,
                                 const synthroute::PlacementDataset& data) {
  if (archs.size() < 3) throw Error(ErrorKind::kInsufficientData, "correlation needs at least 3 architectures");
  std::map<cellspace::ArchHash, double> truth_by_hash;
  for (const auto& g : ground_truth) truth_by_hash[g.hash] = g.auc;
  std::vector<double> queried, truth;
  for (const auto& a : archs) {
    const auto q = query(net, a, data);
    auto it = truth_by_hash.find(q.hash);
    if (it == truth_by_hash.end())
      throw Error(ErrorKind::kInsufficientData, "no ground truth for " + q.arch);
    queried.push_back(q.auc);
    truth.push_back(it->second);
  }
  return correlate(std::move(queried), std::move(truth));
}

std::string query_csv_header() { return "arch,auc,acc,supernet_id\n"; }

std::string query_csv_row(const QueryResult& r) {
  return csv::field(r.arch) + ',' + csv::number(r.auc) + ',' + csv::number(r.acc) + ',' +
         std::to_string(r.supernet_id) + '\n';
}

}  // namespace soap::supernet
