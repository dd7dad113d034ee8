#include "soap/cellspace.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <sstream>

#include "soap/error.hpp"

namespace soap::cellspace {

namespace {

constexpr std::string_view kOpNames[kNumOps] = {"conv3x3", "conv1x1", "maxpool3x3"};

// reach[i] = node i reachable from the input / reaches the output.
std::vector<bool> forward_reach(const CellArchitecture& a) {
  const int n = a.num_nodes();
  std::vector<bool> reach(static_cast<std::size_t>(n), false);
  reach[0] = true;
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j && !reach[static_cast<std::size_t>(j)]; ++i)
      if (reach[static_cast<std::size_t>(i)] && a.edge(i, j)) reach[static_cast<std::size_t>(j)] = true;
  return reach;
}

std::vector<bool> backward_reach(const CellArchitecture& a) {
  const int n = a.num_nodes();
  std::vector<bool> reach(static_cast<std::size_t>(n), false);
  reach[static_cast<std::size_t>(n - 1)] = true;
  for (int i = n - 2; i >= 0; --i)
    for (int j = i + 1; j < n && !reach[static_cast<std::size_t>(i)]; ++j)
      if (reach[static_cast<std::size_t>(j)] && a.edge(i, j)) reach[static_cast<std::size_t>(i)] = true;
  return reach;
}

// Relabels interior nodes: new interior position p holds old node perm[p].
// Returns nullopt if an edge would point backwards.
std::optional<CellArchitecture> relabel(const CellArchitecture& a, const std::vector<int>& perm) {
  const int n = a.num_nodes();
  std::vector<int> new_of_old(static_cast<std::size_t>(n));
  new_of_old[0] = 0;
  new_of_old[static_cast<std::size_t>(n - 1)] = n - 1;
  for (std::size_t p = 0; p < perm.size(); ++p)
    new_of_old[static_cast<std::size_t>(perm[p])] = static_cast<int>(p) + 1;
  CellArchitecture out(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (!a.edge(i, j)) continue;
      const int ni = new_of_old[static_cast<std::size_t>(i)];
      const int nj = new_of_old[static_cast<std::size_t>(j)];
      if (ni >= nj) return std::nullopt;
      out.set_edge(ni, nj, true);
    }
  for (std::size_t p = 0; p < perm.size(); ++p) out.set_op(static_cast<int>(p) + 1, a.op(perm[p]));
  return out;
}

CellArchitecture canonical_unchecked(const CellArchitecture& a) {
  std::vector<int> perm(static_cast<std::size_t>(a.num_interior()));
  std::iota(perm.begin(), perm.end(), 1);
  CellArchitecture best = a;
  do {
    if (auto r = relabel(a, perm); r && *r < best) best = *r;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

bool op_in_space(Op op, const SpaceConfig& space) {
  return std::find(space.ops.begin(), space.ops.end(), op) != space.ops.end();
}

}  // namespace

std::string_view op_name(Op op) { return kOpNames[static_cast<int>(op)]; }

std::optional<Op> parse_op(std::string_view name) {
  for (int i = 0; i < kNumOps; ++i)
    if (kOpNames[i] == name) return static_cast<Op>(i);
  return std::nullopt;
}

void SpaceConfig::check() const {
  if (max_nodes < 2 || max_nodes > 8)
    throw Error(ErrorKind::kBadConfig, "max_nodes must be in [2, 8]");
  if (max_edges < 1) throw Error(ErrorKind::kBadConfig, "max_edges must be >= 1");
  if (ops.empty()) throw Error(ErrorKind::kBadConfig, "operation set is empty");
}

CellArchitecture::CellArchitecture(int num_nodes)
    : num_nodes_(num_nodes),
      bits_(static_cast<std::size_t>(num_nodes * (num_nodes - 1) / 2), 0),
      ops_(static_cast<std::size_t>(std::max(0, num_nodes - 2)), Op::kConv3x3) {
  if (num_nodes < 2) throw Error(ErrorKind::kInvalidArchitecture, "cell needs at least 2 nodes");
}

CellArchitecture CellArchitecture::from_matrix(const std::vector<std::vector<int>>& adjacency,
                                               std::vector<Op> ops) {
  const int n = static_cast<int>(adjacency.size());
  CellArchitecture a(n);
  if (static_cast<int>(ops.size()) != n - 2)
    throw Error(ErrorKind::kInvalidArchitecture, "expected one op per interior node");
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(adjacency[static_cast<std::size_t>(i)].size()) != n)
      throw Error(ErrorKind::kInvalidArchitecture, "adjacency is not square");
    for (int j = 0; j < n; ++j) {
      if (!adjacency[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
      if (j <= i) throw Error(ErrorKind::kInvalidArchitecture, "adjacency is not strictly upper-triangular");
      a.set_edge(i, j, true);
    }
  }
  a.ops_ = std::move(ops);
  return a;
}

std::size_t CellArchitecture::index(int from, int to) const {
  if (from < 0 || to >= num_nodes_ || from >= to)
    throw Error(ErrorKind::kInvalidArchitecture, "edge must satisfy 0 <= from < to < num_nodes");
  // row-major offset of (from, to) within the strict upper triangle
  return static_cast<std::size_t>(from * num_nodes_ - from * (from + 1) / 2 + (to - from - 1));
}

bool CellArchitecture::edge(int from, int to) const { return bits_[index(from, to)] != 0; }

void CellArchitecture::set_edge(int from, int to, bool present) {
  bits_[index(from, to)] = present ? 1 : 0;
}

int CellArchitecture::edge_count() const {
  return static_cast<int>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string CellArchitecture::to_string() const {
  std::string s = std::to_string(num_nodes_) + ";";
  for (auto b : bits_) s.push_back(b ? '1' : '0');
  s.push_back(';');
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    if (i) s.push_back(',');
    s.append(op_name(ops_[i]));
  }
  return s;
}

CellArchitecture CellArchitecture::parse(std::string_view text) {
  const auto bad = [&](const char* why) {
    return Error(ErrorKind::kFormatError, std::string(why) + " in architecture '" + std::string(text) + "'");
  };
  const auto s1 = text.find(';');
  if (s1 == std::string_view::npos) throw bad("missing ';'");
  const auto s2 = text.find(';', s1 + 1);
  if (s2 == std::string_view::npos) throw bad("missing second ';'");
  int n = 0;
  for (char c : text.substr(0, s1)) {
    if (c < '0' || c > '9') throw bad("bad node count");
    n = n * 10 + (c - '0');
    if (n > 64) throw bad("node count too large");
  }
  if (n < 2) throw bad("node count below 2");
  CellArchitecture a(n);
  const auto bits = text.substr(s1 + 1, s2 - s1 - 1);
  if (bits.size() != a.bits_.size()) throw bad("wrong number of adjacency bits");
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') throw bad("adjacency bit not 0/1");
    a.bits_[i] = bits[i] == '1';
  }
  auto rest = text.substr(s2 + 1);
  std::vector<Op> ops;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto tok = rest.substr(0, comma);
    auto op = parse_op(tok);
    if (!op) throw bad("unknown operation");
    ops.push_back(*op);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
    if (rest.empty()) throw bad("trailing ','");
  }
  if (ops.size() != a.ops_.size()) throw bad("wrong number of operations");
  a.ops_ = std::move(ops);
  return a;
}

std::strong_ordering operator<=>(const CellArchitecture& a, const CellArchitecture& b) {
  if (auto c = a.num_nodes_ <=> b.num_nodes_; c != 0) return c;
  if (auto c = a.bits_ <=> b.bits_; c != 0) return c;
  return a.ops_ <=> b.ops_;
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::kValid: return "Valid";
    case Verdict::kTooManyEdges: return "TooManyEdges";
    case Verdict::kNoInputOutputPath: return "NoInputOutputPath";
    case Verdict::kDanglingNode: return "DanglingNode";
    case Verdict::kOutOfSpace: return "OutOfSpace";
  }
  return "?";
}

Verdict validate(const CellArchitecture& arch, const SpaceConfig& space) {
  if (arch.num_nodes() > space.max_nodes) return Verdict::kOutOfSpace;
  for (Op op : arch.ops())
    if (!op_in_space(op, space)) return Verdict::kOutOfSpace;
  if (arch.edge_count() > space.max_edges) return Verdict::kTooManyEdges;
  const auto fwd = forward_reach(arch);
  if (!fwd.back()) return Verdict::kNoInputOutputPath;
  const auto bwd = backward_reach(arch);
  for (int i = 1; i < arch.num_nodes() - 1; ++i)
    if (!fwd[static_cast<std::size_t>(i)] || !bwd[static_cast<std::size_t>(i)]) return Verdict::kDanglingNode;
  return Verdict::kValid;
}

std::optional<CellArchitecture> prune(const CellArchitecture& arch) {
  const auto fwd = forward_reach(arch);
  if (!fwd.back()) return std::nullopt;
  const auto bwd = backward_reach(arch);
  std::vector<int> keep;
  for (int i = 0; i < arch.num_nodes(); ++i)
    if (fwd[static_cast<std::size_t>(i)] && bwd[static_cast<std::size_t>(i)]) keep.push_back(i);
  CellArchitecture out(static_cast<int>(keep.size()));
  for (std::size_t a = 0; a < keep.size(); ++a)
    for (std::size_t b = a + 1; b < keep.size(); ++b)
      out.set_edge(static_cast<int>(a), static_cast<int>(b), arch.edge(keep[a], keep[b]));
  for (std::size_t a = 1; a + 1 < keep.size(); ++a) out.set_op(static_cast<int>(a), arch.op(keep[a]));
  return out;
}

CellArchitecture canonicalize(const CellArchitecture& arch, const SpaceConfig& space) {
  if (const auto v = validate(arch, space); v != Verdict::kValid)
    throw Error(ErrorKind::kInvalidArchitecture,
                arch.to_string() + " is " + std::string(verdict_name(v)));
  return canonical_unchecked(arch);
}

std::string ArchHash::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(32, '0');
  for (int i = 0; i < 16; ++i) {
    s[static_cast<std::size_t>(15 - i)] = kDigits[(hi >> (4 * i)) & 0xf];
    s[static_cast<std::size_t>(31 - i)] = kDigits[(lo >> (4 * i)) & 0xf];
  }
  return s;
}

ArchHash hash(const CellArchitecture& arch, const SpaceConfig& space) {
  using u128 = unsigned __int128;
  const u128 prime = (u128{1} << 88) | 0x13b;
  u128 h = (u128{0x6c62272e07bb0142ULL} << 64) | 0x62b821756295c58dULL;
  for (unsigned char c : canonicalize(arch, space).to_string()) {
    h ^= c;
    h *= prime;
  }
  return {static_cast<std::uint64_t>(h >> 64), static_cast<std::uint64_t>(h)};
}

CellArchitecture sample_random(const SpaceConfig& space, Rng& rng) {
  space.check();
  // Raw graph at full size with independent fair-coin edges, then prune.
  // Every valid cell is the pruned form of some raw graph, so support is full.
  for (;;) {
    CellArchitecture raw(space.max_nodes);
    for (int i = 0; i < space.max_nodes; ++i)
      for (int j = i + 1; j < space.max_nodes; ++j) raw.set_edge(i, j, rng.bernoulli(0.5));
    for (int k = 1; k < space.max_nodes - 1; ++k)
      raw.set_op(k, space.ops[rng.below(space.ops.size())]);
    auto pruned = prune(raw);
    if (!pruned || validate(*pruned, space) != Verdict::kValid) continue;
    return canonical_unchecked(*pruned);
  }
}

std::uint64_t raw_graph_count(const SpaceConfig& space) {
  std::uint64_t total = 0;
  for (int n = 2; n <= space.max_nodes; ++n) {
    std::uint64_t c = std::uint64_t{1} << (n * (n - 1) / 2);
    for (int k = 0; k < n - 2; ++k) c *= space.ops.size();
    total += c;
  }
  return total;
}

std::vector<CellArchitecture> enumerate_unique(const SpaceConfig& space) {
  space.check();
  if (raw_graph_count(space) > kEnumerationGuard)
    throw Error(ErrorKind::kSpaceTooLarge,
                std::to_string(raw_graph_count(space)) + " raw graphs exceed the enumeration guard");
  std::vector<CellArchitecture> out;
  for (int n = 2; n <= space.max_nodes; ++n) {
    const int nbits = n * (n - 1) / 2;
    const int interior = n - 2;
    std::uint64_t op_combos = 1;
    for (int k = 0; k < interior; ++k) op_combos *= space.ops.size();
    std::vector<CellArchitecture> level;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nbits); ++mask) {
      if (std::popcount(mask) > space.max_edges) continue;
      CellArchitecture a(n);
      int bit = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j, ++bit) a.set_edge(i, j, (mask >> bit) & 1);
      for (std::uint64_t combo = 0; combo < op_combos; ++combo) {
        std::uint64_t c = combo;
        for (int k = 1; k <= interior; ++k) {
          a.set_op(k, space.ops[c % space.ops.size()]);
          c /= space.ops.size();
        }
        if (validate(a, space) != Verdict::kValid) continue;
        if (canonical_unchecked(a) == a) level.push_back(a);
      }
    }
    std::sort(level.begin(), level.end());
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

CellArchitecture mutate(const CellArchitecture& arch, const SpaceConfig& space, Rng& rng) {
  if (validate(arch, space) != Verdict::kValid)
    throw Error(ErrorKind::kInvalidArchitecture, arch.to_string() + " is not valid");
  const auto origin = canonical_unchecked(arch);
  struct Edit {
    int a, b;  // edge toggle (a, b), or op relabel of node a to op index b when b < 0
  };
  std::vector<Edit> edits;
  const int n = arch.num_nodes();
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edits.push_back({i, j});
  for (int k = 1; k < n - 1; ++k)
    for (std::size_t o = 0; o < space.ops.size(); ++o)
      if (space.ops[o] != arch.op(k)) edits.push_back({k, -1 - static_cast<int>(o)});
  rng.shuffle(edits.begin(), edits.end());
  for (const auto& e : edits) {
    CellArchitecture cand = arch;
    if (e.b >= 0)
      cand.set_edge(e.a, e.b, !cand.edge(e.a, e.b));
    else
      cand.set_op(e.a, space.ops[static_cast<std::size_t>(-1 - e.b)]);
    auto pruned = prune(cand);
    if (!pruned || validate(*pruned, space) != Verdict::kValid) continue;
    if (canonical_unchecked(*pruned) == origin) continue;
    return *pruned;
  }
  throw Error(ErrorKind::kNoValidNeighbor, "no single edit of " + arch.to_string() + " is valid");
}

std::size_t feature_length(const SpaceConfig& space) {
  const auto m = static_cast<std::size_t>(space.max_nodes);
  return m * (m - 1) / 2 + (m - 2) * kNumOps;
}

std::vector<float> encode_features(const CellArchitecture& arch, const SpaceConfig& space) {
  const auto canon = canonicalize(arch, space);
  const int m = space.max_nodes;
  const int n = canon.num_nodes();
  // slot of each canonical node inside the padded frame
  const auto slot = [&](int node) { return node == n - 1 ? m - 1 : node; };
  std::vector<float> v(feature_length(space), 0.0f);
  CellArchitecture frame(m);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (canon.edge(i, j)) frame.set_edge(slot(i), slot(j), true);
  const auto& bits = frame.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) v[i] = bits[i];
  const std::size_t op_base = bits.size();
  for (int k = 1; k < n - 1; ++k)
    v[op_base + static_cast<std::size_t>((k - 1) * kNumOps + static_cast<int>(canon.op(k)))] = 1.0f;
  return v;
}

}  // namespace soap::cellspace
