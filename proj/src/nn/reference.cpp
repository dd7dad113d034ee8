// Straightforward serial kernels kept as the test oracle for the parallel
// versions in conv.cpp / layers.cpp. Accumulation is in double.

#include <limits>

#include "soap/error.hpp"
#include "soap/nnkernel.hpp"

namespace soap::nn::reference {

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  if (weight.dim(1) != x.dim(1)) throw Error(ErrorKind::kShapeMismatch, "reference conv2d channels");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = weight.dim(0), K = weight.dim(2), R = K / 2;
  Tensor y({N, O, H, W});
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o)
      for (int yy = 0; yy < H; ++yy)
        for (int xx = 0; xx < W; ++xx) {
          double acc = bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0;
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < K; ++ky)
              for (int kx = 0; kx < K; ++kx) {
                const int sy = yy + ky - R, sx = xx + kx - R;
                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                acc += static_cast<double>(weight.at(o, c, ky, kx)) * x.at(n, c, sy, sx);
              }
          y.at(n, o, yy, xx) = static_cast<float>(acc);
        }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, Tensor* grad_x,
                     Tensor* grad_weight, Tensor* grad_bias) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = weight.dim(0), K = weight.dim(2), R = K / 2;
  if (grad_x)
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        for (int sy = 0; sy < H; ++sy)
          for (int sx = 0; sx < W; ++sx) {
            double acc = 0.0;
            for (int o = 0; o < O; ++o)
              for (int ky = 0; ky < K; ++ky)
                for (int kx = 0; kx < K; ++kx) {
                  const int yy = sy - ky + R, xx = sx - kx + R;
                  if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                  acc += static_cast<double>(weight.at(o, c, ky, kx)) * grad_y.at(n, o, yy, xx);
                }
            grad_x->at(n, c, sy, sx) += static_cast<float>(acc);
          }
  if (grad_weight)
    for (int o = 0; o < O; ++o)
      for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < K; ++ky)
          for (int kx = 0; kx < K; ++kx) {
            double acc = 0.0;
            for (int n = 0; n < N; ++n)
              for (int yy = 0; yy < H; ++yy)
                for (int xx = 0; xx < W; ++xx) {
                  const int sy = yy + ky - R, sx = xx + kx - R;
                  if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                  acc += static_cast<double>(grad_y.at(n, o, yy, xx)) * x.at(n, c, sy, sx);
                }
            grad_weight->at(o, c, ky, kx) += static_cast<float>(acc);
          }
  if (grad_bias)
    for (int o = 0; o < O; ++o) {
      double acc = 0.0;
      for (int n = 0; n < N; ++n)
        for (int yy = 0; yy < H; ++yy)
          for (int xx = 0; xx < W; ++xx) acc += grad_y.at(n, o, yy, xx);
      (*grad_bias)[static_cast<std::size_t>(o)] += static_cast<float>(acc);
    }
}

MaxPoolResult maxpool3x3(const Tensor& x) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  MaxPoolResult r{Tensor(x.shape()), std::vector<std::uint32_t>(x.size())};
  std::size_t out = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int yy = 0; yy < H; ++yy)
        for (int xx = 0; xx < W; ++xx, ++out) {
          float best = -std::numeric_limits<float>::infinity();
          std::uint32_t arg = 0;
          for (int ky = -1; ky <= 1; ++ky)
            for (int kx = -1; kx <= 1; ++kx) {
              const int sy = yy + ky, sx = xx + kx;
              if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
              const auto idx = static_cast<std::uint32_t>(((n * C + c) * H + sy) * W + sx);
              if (x[idx] > best) {
                best = x[idx];
                arg = idx;
              }
            }
          r.y[out] = best;
          r.argmax[out] = arg;
        }
  return r;
}

}  // namespace soap::nn::reference
