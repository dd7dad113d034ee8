#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <omp.h>

#include "../gradcheck_suite.hpp"
#include "soap/error.hpp"
#include "soap/nnkernel.hpp"

using namespace soap;
using namespace soap::nn;
using gradsuite::random_tensor;

TEST_CASE("conv2d: identity 1x1 and constant 3x3 examples") {
  Rng rng(1);
  const auto x = random_tensor({2, 3, 5, 4}, rng);
  Tensor eye({3, 3, 1, 1});
  for (int c = 0; c < 3; ++c) eye.at(c, c, 0, 0) = 1.0f;
  CHECK(conv2d(x, eye, nullptr) == x);

  const Tensor c(std::vector<int>{1, 1, 5, 5}, 2.5f);
  const Tensor ones(std::vector<int>{1, 1, 3, 3}, 1.0f);
  const auto y = conv2d(c, ones, nullptr);
  CHECK(y.shape() == c.shape());
  for (int i = 1; i < 4; ++i)
    for (int j = 1; j < 4; ++j) CHECK(y.at(0, 0, i, j) == doctest::Approx(22.5));
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(10.0));  // corner sees 4 pixels

  CHECK_THROWS_AS(conv2d(x, Tensor({2, 2, 3, 3}), nullptr), Error);
  CHECK_THROWS_AS(conv2d(x, Tensor({2, 3, 2, 2}), nullptr), Error);
}

TEST_CASE("relu and maxpool examples") {
  Rng rng(2);
  const auto neg = random_tensor({1, 2, 3, 3}, rng, -2.0, -0.1);
  const auto zeroed = relu(neg);
  for (float v : zeroed.values()) CHECK(v == 0.0f);
  const auto pos = random_tensor({1, 2, 3, 3}, rng, 0.1, 2.0);
  CHECK(relu(pos) == pos);

  const Tensor c(std::vector<int>{1, 1, 4, 4}, -3.0f);
  CHECK(maxpool3x3(c).y == c);

  Tensor spot({1, 1, 5, 5});
  spot.at(0, 0, 2, 2) = 1.0f;
  const auto d = maxpool3x3(spot).y;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      CHECK(d.at(0, 0, i, j) == ((std::abs(i - 2) <= 1 && std::abs(j - 2) <= 1) ? 1.0f : 0.0f));

  // ties go to the first window element: all-equal input routes each output to
  // its top-left in-bounds neighbour
  const auto tied = maxpool3x3(Tensor(std::vector<int>{1, 1, 3, 3}, 1.0f));
  CHECK(tied.argmax[4] == 0);
  CHECK(tied.argmax[0] == 0);
  CHECK(tied.argmax[8] == 4);
}

TEST_CASE("ghost batchnorm examples") {
  Rng rng(3);
  const auto x = random_tensor({8, 3, 4, 4}, rng, -2.0, 3.0);
  BnParams a{random_tensor({3}, rng, 0.5, 1.5), random_tensor({3}, rng), Tensor({3}), Tensor({3}, 1.0f)};
  BnParams b = a;
  // ghost size = batch: plain batch norm equals calibration-mode statistics
  const auto ghost = ghost_batchnorm(x, a, 8, BnMode::kTrain, nullptr);
  const auto plain = ghost_batchnorm(x, b, 8, BnMode::kCalibrate, nullptr);
  CHECK(ghost == plain);

  BnParams unit{Tensor({3}, 1.0f), Tensor({3}), Tensor({3}), Tensor({3}, 1.0f)};
  const auto y = ghost_batchnorm(x, unit, 2, BnMode::kTrain, nullptr);
  for (int g = 0; g < 4; ++g)
    for (int c = 0; c < 3; ++c) {
      double s = 0;
      for (int n = 2 * g; n < 2 * g + 2; ++n)
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) s += y.at(n, c, i, j);
      CHECK(std::abs(s / 32.0) <= 1e-5);
    }

  BnParams sh{Tensor({1}, 2.0f), Tensor({1}, 0.7f), Tensor({1}), Tensor({1}, 1.0f)};
  const auto k = ghost_batchnorm(Tensor(std::vector<int>{4, 1, 2, 2}, 5.0f), sh, 4, BnMode::kTrain, nullptr);
  for (float v : k.values()) CHECK(v == doctest::Approx(0.7f).epsilon(1e-5));

  CHECK_THROWS_AS(ghost_batchnorm(x, unit, 3, BnMode::kTrain, nullptr), Error);
  try {
    ghost_batchnorm(x, unit, 3, BnMode::kTrain, nullptr);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBadGhostSize);
  }
  // eval mode ignores batch size
  CHECK_NOTHROW(ghost_batchnorm(random_tensor({3, 3, 2, 2}, rng), unit, 8, BnMode::kEval, nullptr));
}

TEST_CASE("running statistics follow the EMA") {
  BnParams p{Tensor({1}, 1.0f), Tensor({1}), Tensor({1}), Tensor({1}, 1.0f)};
  Tensor x({4, 1, 1, 1});
  x[0] = 1;
  x[1] = 3;
  x[2] = 5;
  x[3] = 7;
  ghost_batchnorm(x, p, 2, BnMode::kTrain, nullptr);
  // groups {1,3} and {5,7}: means 2, 6; unbiased variances 2, 2
  const double m1 = 0.9 * 0 + 0.1 * 2, m2 = 0.9 * m1 + 0.1 * 6;
  const double v1 = 0.9 * 1 + 0.1 * 2, v2 = 0.9 * v1 + 0.1 * 2;
  CHECK(p.running_mean[0] == doctest::Approx(m2).epsilon(1e-6));
  CHECK(p.running_var[0] == doctest::Approx(v2).epsilon(1e-6));
}

TEST_CASE("sigmoid BCE examples") {
  const Tensor z(std::vector<int>{1, 1, 3, 3}, 0.0f);
  Tensor t(std::vector<int>{1, 1, 3, 3});
  t[2] = 1.0f;
  CHECK(sigmoid_bce_loss(z, t, nullptr) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  const Tensor big(std::vector<int>{1, 1, 2, 2}, 20.0f);
  const Tensor one(std::vector<int>{1, 1, 2, 2}, 1.0f);
  CHECK(sigmoid_bce_loss(big, one, nullptr) <= 1e-8);
  const Tensor huge(std::vector<int>{1, 1, 1, 1}, -1e3f);
  CHECK(std::isfinite(sigmoid_bce_loss(huge, Tensor(std::vector<int>{1, 1, 1, 1}, 1.0f), nullptr)));
  CHECK_THROWS_AS(sigmoid_bce_loss(z, one, nullptr), Error);
}

TEST_CASE("sgd examples") {
  Rng rng(4);
  auto p = random_tensor({5}, rng);
  const auto g = random_tensor({5}, rng);
  auto p0 = p;
  Tensor v;
  sgd_step(p, g, 0.0f, 0.9f, v);
  CHECK(p == p0);

  Tensor v1;
  sgd_step(p, g, 0.1f, 0.0f, v1);
  for (int i = 0; i < 5; ++i) CHECK(p[i] == doctest::Approx(p0[i] - 0.1f * g[i]));

  p = p0;
  Tensor v2;
  sgd_step(p, g, 0.02f, 0.9f, v2);
  sgd_step(p, g, 0.02f, 0.9f, v2);
  for (int i = 0; i < 5; ++i) CHECK(p[i] == doctest::Approx(p0[i] - 0.02 * g[i] * 2.9).epsilon(1e-5));

  CHECK_THROWS_AS(sgd_step(p, Tensor({4}), 0.1f, 0.9f, v2), Error);
}

TEST_CASE("finite-difference checks, 20 trials per layer kind") {
  for (const auto& kind : gradsuite::kinds()) {
    double worst = 0.0;
    for (std::uint64_t t = 0; t < 20; ++t) worst = std::max(worst, kind.trial(1000 + t));
    INFO(std::string(kind.name) << " max rel error " << worst);
    CHECK(worst <= kind.tolerance);
  }
}

TEST_CASE("library grad_check agrees on a linear fragment and zero case") {
  Rng rng(5);
  auto x = random_tensor({1, 2, 4, 4}, rng);
  auto w = random_tensor({2, 2, 3, 3}, rng);
  gradsuite::Projection proj(32, rng);
  Tensor gx(x.shape()), gw(w.shape());
  conv2d_backward(x, w, proj.grad({1, 2, 4, 4}), &gx, &gw, nullptr);
  const GradCheckEntry entries[] = {{&x, &gx}, {&w, &gw}};
  const auto rep = grad_check([&] { return proj(conv2d(x, w, nullptr)); }, entries, 0.5);
  CHECK(rep.checked == x.size() + w.size());
  CHECK(rep.passed(1e-4));

  // zero input and weights on a loss symmetric in the sign of the logits
  Tensor zx({1, 1, 3, 3}), zw({1, 1, 3, 3}), gzx(zx.shape()), gzw(zw.shape());
  Tensor half(std::vector<int>{1, 1, 3, 3}, 0.5f), gl;
  sigmoid_bce_loss(conv2d(zx, zw, nullptr), half, &gl);
  conv2d_backward(zx, zw, gl, &gzx, &gzw, nullptr);
  for (float v : gzx.values()) CHECK(v == 0.0f);
  for (float v : gzw.values()) CHECK(v == 0.0f);
}

namespace {

// Largest |a - b| relative to the largest |b|.
double rel_gap(const Tensor& a, const Tensor& b) {
  REQUIRE(a.same_shape(b));
  double gap = 0.0, scale = 1e-30;
  for (std::size_t i = 0; i < a.size(); ++i) {
    gap = std::max(gap, double(std::abs(a[i] - b[i])));
    scale = std::max(scale, double(std::abs(b[i])));
  }
  return gap / scale;
}

}  // namespace

TEST_CASE("parallel kernels agree with the serial double-precision reference") {
  Rng rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const int ci = 1 + trial % 4, co = 1 + (trial * 3) % 5, k = trial % 2 ? 3 : 1;
    const auto x = random_tensor({2, ci, 7, 9}, rng);
    const auto w = random_tensor({co, ci, k, k}, rng);
    const auto b = random_tensor({co}, rng);
    CHECK(rel_gap(conv2d(x, w, &b), reference::conv2d(x, w, &b)) < 1e-6);

    const auto gy = random_tensor({2, co, 7, 9}, rng);
    Tensor gx1(x.shape()), gw1(w.shape()), gb1(b.shape()), gx2(x.shape()), gw2(w.shape()), gb2(b.shape());
    conv2d_backward(x, w, gy, &gx1, &gw1, &gb1);
    reference::conv2d_backward(x, w, gy, &gx2, &gw2, &gb2);
    CHECK(rel_gap(gx1, gx2) < 1e-6);
    CHECK(rel_gap(gw1, gw2) < 1e-5);
    CHECK(rel_gap(gb1, gb2) < 1e-5);

    const auto p1 = maxpool3x3(x), p2 = reference::maxpool3x3(x);
    CHECK(p1.y == p2.y);
    CHECK(p1.argmax == p2.argmax);
  }
}

TEST_CASE("results do not depend on the thread count") {
  Rng rng(16);
  const auto x = random_tensor({4, 3, 9, 9}, rng);
  const auto w = random_tensor({5, 3, 3, 3}, rng);
  const auto gy = random_tensor({4, 5, 9, 9}, rng);
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    Tensor gx(x.shape()), gw(w.shape());
    conv2d_backward(x, w, gy, &gx, &gw, nullptr);
    BnParams p{Tensor({5}, 1.0f), Tensor({5}), Tensor({5}), Tensor({5}, 1.0f)};
    const auto y = ghost_batchnorm(conv2d(x, w, nullptr), p, 2, BnMode::kTrain, nullptr);
    return std::vector<std::uint64_t>{checksum(y), checksum(gx), checksum(gw), checksum(p.running_var),
                                      checksum(maxpool3x3(x).y)};
  };
  const int before = omp_get_max_threads();
  const auto one = run(1);
  CHECK(run(3) == one);
  CHECK(run(8) == one);
  omp_set_num_threads(before);
}

TEST_CASE("kernels are deterministic and finite on bounded inputs") {
  Rng rng(7);
  const auto x = random_tensor({2, 3, 6, 6}, rng, -1e3, 1e3);
  const auto w = random_tensor({3, 3, 3, 3}, rng, -1.0, 1.0);
  const auto y1 = conv2d(x, w, nullptr), y2 = conv2d(x, w, nullptr);
  CHECK(checksum(y1) == checksum(y2));
  CHECK(y1.all_finite());
  BnParams p{Tensor({3}, 1.0f), Tensor({3}), Tensor({3}), Tensor({3}, 1.0f)};
  CHECK(ghost_batchnorm(x, p, 2, BnMode::kTrain, nullptr).all_finite());
  CHECK(maxpool3x3(x).y.all_finite());
  Tensor labels(std::vector<int>{2, 3, 6, 6}, 1.0f), gl;
  CHECK(std::isfinite(sigmoid_bce_loss(x, labels, &gl)));
  CHECK(gl.all_finite());
}

TEST_CASE("checkpoint round-trip is bit exact and rejects corruption") {
  Rng rng(8);
  ParamStore ps;
  ps["a.weight"] = random_tensor({3, 2, 3, 3}, rng);
  ps["a.bias"] = random_tensor({3}, rng);
  ps["z"] = Tensor({1}, -0.0f);
  const auto dir = std::filesystem::temp_directory_path() / "soap_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "p.snck").string();
  write_checkpoint(path, ps);
  const auto back = read_checkpoint(path);
  REQUIRE(back.size() == ps.size());
  for (const auto& [name, t] : ps) CHECK(checksum(back.at(name)) == checksum(t));

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  CHECK(bytes.substr(0, 4) == "SNCK");
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << bytes.substr(0, bytes.size() - 3);
  }
  CHECK_THROWS_AS(read_checkpoint(path), Error);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "XXXX" << bytes.substr(4);
  }
  CHECK_THROWS_AS(read_checkpoint(path), Error);
  CHECK_THROWS_AS(read_checkpoint((dir / "missing.snck").string()), Error);
  std::filesystem::remove_all(dir);
}
