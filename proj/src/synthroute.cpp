#include "soap/synthroute.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "soap/error.hpp"
#include "soap/io.hpp"
#include "soap/rng.hpp"

namespace soap::synthroute {

namespace {

constexpr char kMagic[4] = {'S', 'R', 'D', 'S'};
constexpr std::uint32_t kVersion = 1;

void normalize_unit(std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo, span = *hi - *lo;
  for (double& x : v) x = span > 0 ? (x - a) / span : 0.0;
}

std::vector<double> box_mean(const std::vector<double>& v, int H, int W, int radius) {
  std::vector<double> out(v.size());
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double s = 0.0;
      int n = 0;
      for (int sy = std::max(0, y - radius); sy <= std::min(H - 1, y + radius); ++sy)
        for (int sx = std::max(0, x - radius); sx <= std::min(W - 1, x + radius); ++sx) {
          s += v[static_cast<std::size_t>(sy * W + sx)];
          ++n;
        }
      out[static_cast<std::size_t>(y * W + x)] = s / n;
    }
  return out;
}

// Draws raw feature fields; returns false (caller redraws) if the label
// threshold would fall on a tie.
bool draw_map(Rng& rng, int H, int W, double q, PlacementMap& out) {
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  std::vector<double> pins(hw, 0.0), macro(hw, 0.0), cross(hw);

  const int n_blobs = 4 + static_cast<int>(rng.below(7));
  for (int b = 0; b < n_blobs; ++b) {
    const double cy = rng.uniform(0, H), cx = rng.uniform(0, W);
    const double sigma = rng.uniform(1.5, 4.0), amp = rng.uniform(0.5, 1.0);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double d2 = (y + 0.5 - cy) * (y + 0.5 - cy) + (x + 0.5 - cx) * (x + 0.5 - cx);
        pins[static_cast<std::size_t>(y * W + x)] += amp * std::exp(-d2 / (2 * sigma * sigma));
      }
  }
  normalize_unit(pins);

  const int n_macros = 1 + static_cast<int>(rng.below(3));
  for (int m = 0; m < n_macros; ++m) {
    const int h = std::min(H, 4 + static_cast<int>(rng.below(9)));
    const int w = std::min(W, 4 + static_cast<int>(rng.below(9)));
    const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(H - h + 1)));
    const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(W - w + 1)));
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) macro[static_cast<std::size_t>(y * W + x)] = 1.0;
  }

  for (auto& c : cross) c = rng.uniform();
  cross = box_mean(box_mean(cross, H, W, 2), H, W, 2);
  normalize_unit(cross);

  out.features.resize(kChannels * hw);
  for (std::size_t i = 0; i < hw; ++i) {
    out.features[i] = static_cast<float>(pins[i]);
    out.features[hw + i] = static_cast<float>(macro[i]);
    out.features[2 * hw + i] = static_cast<float>(cross[i]);
  }

  const auto score = congestion_score(out, H, W);
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(hw) - 1e-9));
  std::vector<double> sorted = score;
  std::sort(sorted.begin(), sorted.end());
  // order statistic at 1-q; strict comparison above it selects exactly k
  const double threshold = sorted[hw - k - 1];
  if (!(sorted[hw - k] > threshold)) return false;
  out.labels.resize(hw);
  for (std::size_t i = 0; i < hw; ++i) out.labels[i] = score[i] > threshold ? 1 : 0;
  return true;
}

}  // namespace

std::vector<double> congestion_score(const PlacementMap& map, int height, int width) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  std::vector<double> raw(hw);
  for (std::size_t i = 0; i < hw; ++i) {
    const double p = map.features[i], m = map.features[hw + i], c = map.features[2 * hw + i];
    raw[i] = kPinWeight * p + kPinMacroWeight * p * m + kCrossingWeight * c;
  }
  return box_mean(raw, height, width, 1);
}

std::vector<int> PlacementDataset::indices(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < splits.size(); ++i)
    if (splits[i] == s) out.push_back(static_cast<int>(i));
  return out;
}

PlacementDataset PlacementDataset::subset(Split s) const {
  PlacementDataset out{height, width, channels, seed, {}, {}};
  for (int i : indices(s)) out.maps.push_back(maps[static_cast<std::size_t>(i)]);
  return out;
}

PlacementDataset generate(const GenerateConfig& cfg) {
  if (!(cfg.hotspot_quantile > 0.0 && cfg.hotspot_quantile <= 0.5))
    throw Error(ErrorKind::kBadConfig, "hotspot_quantile must lie in (0, 0.5]");
  if (cfg.n_maps < 1 || cfg.height < 2 || cfg.width < 2 || cfg.height > 4096 || cfg.width > 4096)
    throw Error(ErrorKind::kBadConfig, "n_maps >= 1 and 2 <= H, W <= 4096 required");
  PlacementDataset ds{cfg.height, cfg.width, kChannels, cfg.seed, {}, {}};
  ds.maps.resize(static_cast<std::size_t>(cfg.n_maps));
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < cfg.n_maps; ++i) {
    Rng rng(derive_seed(cfg.seed, "synthroute.map", static_cast<std::uint64_t>(i)));
    while (!draw_map(rng, cfg.height, cfg.width, cfg.hotspot_quantile, ds.maps[static_cast<std::size_t>(i)])) {
    }
  }
  return ds;
}

PlacementDataset split(PlacementDataset dataset, std::array<double, 3> fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f >= 0.0 && f <= 1.0)) throw Error(ErrorKind::kBadConfig, "split fractions must lie in [0, 1]");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw Error(ErrorKind::kBadConfig, "split fractions must sum to 1");
  const std::size_t n = dataset.maps.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "synthroute.split"));
  rng.shuffle(order.begin(), order.end());
  const auto count = [&](double f) { return static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9)); };
  const std::size_t n_val = count(fractions[1]);
  const std::size_t n_test = count(fractions[2]);
  dataset.splits.assign(n, Split::kTrain);
  for (std::size_t i = 0; i < n_val; ++i) dataset.splits[static_cast<std::size_t>(order[i])] = Split::kVal;
  for (std::size_t i = n_val; i < n_val + n_test; ++i)
    dataset.splits[static_cast<std::size_t>(order[i])] = Split::kTest;
  return dataset;
}

void write_dataset(const PlacementDataset& ds, const std::string& path) {
  io::ByteWriter w;
  w.put_bytes({kMagic, 4});
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ds.maps.size()));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(ds.height));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(ds.width));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(ds.channels));
  const std::size_t hw = static_cast<std::size_t>(ds.height) * ds.width;
  for (const auto& m : ds.maps) {
    if (m.features.size() != ds.channels * hw || m.labels.size() != hw)
      throw Error(ErrorKind::kShapeMismatch, "map size does not match dataset dimensions");
    w.put_floats(m.features.data(), m.features.size());
    w.put_bytes({reinterpret_cast<const char*>(m.labels.data()), m.labels.size()});
  }
  io::write_file_atomic(path, w.bytes());
}

PlacementDataset read_dataset(const std::string& path) {
  const std::string bytes = io::read_file(path);
  io::ByteReader r(bytes, path);
  if (r.get_bytes(4) != std::string_view(kMagic, 4)) r.fail("bad magic (expected SRDS)");
  if (const auto v = r.get<std::uint32_t>(); v != kVersion) r.fail("unsupported version " + std::to_string(v));
  PlacementDataset ds;
  const auto n = r.get<std::uint32_t>();
  ds.height = r.get<std::uint16_t>();
  ds.width = r.get<std::uint16_t>();
  ds.channels = r.get<std::uint8_t>();
  const std::size_t hw = static_cast<std::size_t>(ds.height) * ds.width;
  const std::size_t per_map = ds.channels * hw * sizeof(float) + hw;
  if (per_map == 0 || (bytes.size() - r.offset()) / per_map < n)
    r.fail("truncated: header declares " + std::to_string(n) + " maps");
  ds.maps.resize(n);
  for (auto& m : ds.maps) {
    m.features.resize(ds.channels * hw);
    r.get_floats(m.features.data(), m.features.size());
    const auto lab = r.get_bytes(hw);
    m.labels.assign(lab.begin(), lab.end());
    for (auto l : m.labels)
      if (l > 1) r.fail("label value outside {0,1}");
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return ds;
}

Batch make_batch(const PlacementDataset& ds, const std::vector<int>& idx) {
  const int B = static_cast<int>(idx.size());
  const std::size_t hw = static_cast<std::size_t>(ds.height) * ds.width;
  Batch b{nn::Tensor({B, ds.channels, ds.height, ds.width}), nn::Tensor({B, 1, ds.height, ds.width})};
  for (int i = 0; i < B; ++i) {
    const auto& m = ds.maps.at(static_cast<std::size_t>(idx[static_cast<std::size_t>(i)]));
    std::copy(m.features.begin(), m.features.end(), b.features.data() + static_cast<std::size_t>(i) * ds.channels * hw);
    for (std::size_t p = 0; p < hw; ++p) b.labels[static_cast<std::size_t>(i) * hw + p] = m.labels[p];
  }
  return b;
}

}  // namespace soap::synthroute
