#include <algorithm>
#include <cmath>

#include "soap/error.hpp"
#include "soap/io.hpp"
#include "soap/nnkernel.hpp"

namespace soap::nn {

namespace {
constexpr char kMagic[4] = {'S', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_checkpoint(const std::string& path, const ParamStore& params) {
  io::ByteWriter w;
  w.put_bytes({kMagic, 4});
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape().size()));
    for (int d : t.shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.put_floats(t.data(), t.size());
  }
  io::write_file_atomic(path, w.bytes());
}

ParamStore read_checkpoint(const std::string& path) {
  const std::string bytes = io::read_file(path);
  io::ByteReader r(bytes, path);
  if (r.get_bytes(4) != std::string_view(kMagic, 4)) r.fail("bad magic (expected SNCK)");
  if (const auto v = r.get<std::uint32_t>(); v != kVersion) r.fail("unsupported version " + std::to_string(v));
  const auto count = r.get<std::uint32_t>();
  ParamStore out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    std::string name(r.get_bytes(len));
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) r.fail("implausible tensor rank " + std::to_string(rank));
    std::vector<int> shape;
    std::uint64_t elems = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      const auto d = r.get<std::uint32_t>();
      elems *= d;
      if (elems > (std::uint64_t{1} << 31)) r.fail("tensor too large");
      shape.push_back(static_cast<int>(d));
    }
    Tensor t(shape);
    r.get_floats(t.data(), t.size());
    if (!out.emplace(std::move(name), std::move(t)).second) r.fail("duplicate parameter name");
  }
  if (!r.at_end()) r.fail("trailing bytes");
  return out;
}

std::uint64_t checksum(const Tensor& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* p = reinterpret_cast<const unsigned char*>(t.data());
  for (std::size_t i = 0; i < t.size() * sizeof(float); ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

GradCheckReport grad_check(const std::function<double()>& objective, std::span<const GradCheckEntry> entries,
                           double eps) {
  GradCheckReport report;
  for (const auto& e : entries) {
    double scale = 0.0;
    for (std::size_t i = 0; i < e.analytic->size(); ++i)
      scale = std::max(scale, std::abs(static_cast<double>((*e.analytic)[i])));
    const double floor = std::max(1e-2 * scale, 1e-12);
    for (std::size_t i = 0; i < e.value->size(); ++i) {
      float& v = (*e.value)[i];
      const float saved = v;
      v = static_cast<float>(saved + eps);
      const double up_step = static_cast<double>(v) - saved;
      const double up = objective();
      v = static_cast<float>(saved - eps);
      const double down_step = saved - static_cast<double>(v);
      const double down = objective();
      v = saved;
      const double numeric = (up - down) / (up_step + down_step);
      const double analytic = (*e.analytic)[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      report.max_rel_error = std::max(report.max_rel_error, std::abs(analytic - numeric) / denom);
      ++report.checked;
    }
  }
  return report;
}

}  // namespace soap::nn
