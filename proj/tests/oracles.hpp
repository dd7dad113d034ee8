#pragma once

// Brute-force reference computations used as test oracles. They are written
// from the definitions, independently of the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// (concordant + 0.5 tied) / (pos * neg) over every positive/negative pair.
inline double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double num = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      pairs += 1.0;
      if (s[i] > s[j]) num += 1.0;
      else if (s[i] == s[j]) num += 0.5;
    }
  }
  return num / pairs;
}

// tau-b from explicit pair classification.
inline double kendall_pairs(const std::vector<double>& x, const std::vector<double>& y) {
  double conc = 0, disc = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        tx += 1;
      } else if (dy == 0) {
        ty += 1;
      } else if ((dx > 0) == (dy > 0)) {
        conc += 1;
      } else {
        disc += 1;
      }
    }
  return (conc - disc) / std::sqrt((conc + disc + tx) * (conc + disc + ty));
}

inline double pearson_direct(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    syy += y[i] * y[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
}

// A cell as a dense matrix plus interior op ids.
struct Graph {
  int n = 2;
  std::vector<std::vector<int>> adj;
  std::vector<int> ops;  // size n-2
};

// Removes interior nodes not on an input->output path; empty optional-like
// result (n == 0) when no path exists.
inline Graph prune(const Graph& g) {
  std::vector<char> fwd(g.n, 0), bwd(g.n, 0);
  fwd[0] = 1;
  for (int i = 0; i < g.n; ++i)
    if (fwd[i])
      for (int j = i + 1; j < g.n; ++j)
        if (g.adj[i][j]) fwd[j] = 1;
  bwd[g.n - 1] = 1;
  for (int j = g.n - 1; j >= 0; --j)
    if (bwd[j])
      for (int i = 0; i < j; ++i)
        if (g.adj[i][j]) bwd[i] = 1;
  if (!fwd[g.n - 1]) return Graph{0, {}, {}};
  std::vector<int> keep;
  for (int i = 0; i < g.n; ++i)
    if (i == 0 || i == g.n - 1 || (fwd[i] && bwd[i])) keep.push_back(i);
  Graph out;
  out.n = static_cast<int>(keep.size());
  out.adj.assign(out.n, std::vector<int>(out.n, 0));
  for (int a = 0; a < out.n; ++a)
    for (int b = 0; b < out.n; ++b) out.adj[a][b] = g.adj[keep[a]][keep[b]];
  for (int a = 1; a + 1 < out.n; ++a) out.ops.push_back(g.ops[keep[a] - 1]);
  return out;
}

inline int edges(const Graph& g) {
  int e = 0;
  for (auto& r : g.adj)
    for (int v : r) e += v;
  return e;
}

// Isomorphism-class key: minimum over all (n-2)! interior relabelings. The
// relabeled matrix may leave the upper triangle; only the class matters.
inline std::string class_key(const Graph& g) {
  std::vector<int> perm(static_cast<std::size_t>(g.n));
  std::iota(perm.begin(), perm.end(), 0);
  std::string best;
  do {
    std::string k = std::to_string(g.n) + ":";
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j) k += static_cast<char>('0' + g.adj[perm[i]][perm[j]]);
    k += ":";
    for (int i = 1; i + 1 < g.n; ++i) k += static_cast<char>('0' + g.ops[perm[i] - 1]);
    if (best.empty() || k < best) best = k;
  } while (std::next_permutation(perm.begin() + 1, perm.end() - 1));
  return best;
}

// Every isomorphism class of valid cells with up to max_nodes nodes.
inline std::set<std::string> enumerate_classes(int max_nodes, int max_edges, int n_ops) {
  std::set<std::string> out;
  for (int n = 2; n <= max_nodes; ++n) {
    std::vector<std::pair<int, int>> slots;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) slots.emplace_back(i, j);
    const int interior = n - 2;
    int op_combos = 1;
    for (int i = 0; i < interior; ++i) op_combos *= n_ops;
    for (std::uint32_t mask = 0; mask < (1u << slots.size()); ++mask) {
      for (int oc = 0; oc < op_combos; ++oc) {
        Graph g;
        g.n = n;
        g.adj.assign(n, std::vector<int>(n, 0));
        for (std::size_t s = 0; s < slots.size(); ++s)
          if (mask >> s & 1u) g.adj[slots[s].first][slots[s].second] = 1;
        int c = oc;
        for (int i = 0; i < interior; ++i) {
          g.ops.push_back(c % n_ops);
          c /= n_ops;
        }
        const Graph p = prune(g);
        if (p.n == 0 || edges(p) > max_edges) continue;
        out.insert(class_key(p));
      }
    }
  }
  return out;
}

// 3x3 in-bounds box mean of 0.6 p + 0.3 p m + 0.1 c, then the top
// ceil(q*H*W) scores (strictly greater than the order statistic) are hot.
inline std::vector<std::uint8_t> hotspot_labels(const std::vector<float>& f, int h, int w, double q) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  std::vector<double> raw(hw), score(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    const double p = f[i], m = f[hw + i], c = f[2 * hw + i];
    raw[i] = 0.6 * p + 0.3 * p * m + 0.1 * c;
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      int cnt = 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
          s += raw[static_cast<std::size_t>(yy) * w + xx];
          ++cnt;
        }
      score[static_cast<std::size_t>(y) * w + x] = s / cnt;
    }
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(hw)));
  auto sorted = score;
  std::sort(sorted.begin(), sorted.end());
  const double thr = sorted[hw - k - 1];
  std::vector<std::uint8_t> out(hw);
  for (std::size_t i = 0; i < hw; ++i) out[i] = score[i] > thr ? 1 : 0;
  return out;
}

// Central-difference derivative of f with respect to *v.
inline double central_diff(const std::function<double()>& f, float* v, double eps) {
  const float orig = *v;
  *v = static_cast<float>(orig + eps);
  const double up = f();
  *v = static_cast<float>(orig - eps);
  const double down = f();
  const double step = static_cast<double>(static_cast<float>(orig + eps)) - static_cast<float>(orig - eps);
  *v = orig;
  return (up - down) / step;
}

}  // namespace oracle
