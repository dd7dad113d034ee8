#include <algorithm>

#include "soap/error.hpp"
#include "soap/nnkernel.hpp"

namespace soap::nn {

namespace {

struct ConvDims {
  int batch, in_ch, out_ch, height, width, k, radius;
};

ConvDims check_conv(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  if (x.shape().size() != 4 || weight.shape().size() != 4)
    throw Error(ErrorKind::kShapeMismatch, "conv2d expects 4-D input and weight");
  const int k = weight.dim(2);
  if (k != weight.dim(3) || k % 2 == 0) throw Error(ErrorKind::kShapeMismatch, "conv2d kernel must be square and odd");
  if (weight.dim(1) != x.dim(1))
    throw Error(ErrorKind::kShapeMismatch, "conv2d input has " + std::to_string(x.dim(1)) +
                                               " channels, weight expects " + std::to_string(weight.dim(1)));
  if (bias && (bias->shape().size() != 1 || bias->dim(0) != weight.dim(0)))
    throw Error(ErrorKind::kShapeMismatch, "conv2d bias length must equal output channels");
  return {x.dim(0), x.dim(1), weight.dim(0), x.dim(2), x.dim(3), k, k / 2};
}

inline std::size_t plane(int n, int c, int channels, std::size_t hw) {
  return (static_cast<std::size_t>(n) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)) * hw;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias) {
  const auto d = check_conv(x, weight, bias);
  Tensor y({d.batch, d.out_ch, d.height, d.width});
  const std::size_t hw = static_cast<std::size_t>(d.height) * static_cast<std::size_t>(d.width);
  const float* xd = x.data();
  const float* wd = weight.data();
  float* yd = y.data();
  const int jobs = d.batch * d.out_ch;
#pragma omp parallel for schedule(static)
  for (int job = 0; job < jobs; ++job) {
    const int n = job / d.out_ch;
    const int co = job % d.out_ch;
    float* out = yd + plane(n, co, d.out_ch, hw);
    std::fill(out, out + hw, bias ? (*bias)[static_cast<std::size_t>(co)] : 0.0f);
    for (int ci = 0; ci < d.in_ch; ++ci) {
      const float* in = xd + plane(n, ci, d.in_ch, hw);
      const float* wk = wd + (static_cast<std::size_t>(co) * d.in_ch + ci) * d.k * d.k;
      for (int ky = 0; ky < d.k; ++ky) {
        const int dy = ky - d.radius;
        const int y0 = std::max(0, -dy), y1 = std::min(d.height, d.height - dy);
        for (int kx = 0; kx < d.k; ++kx) {
          const int dx = kx - d.radius;
          const int x0 = std::max(0, -dx), x1 = std::min(d.width, d.width - dx);
          const float wv = wk[ky * d.k + kx];
          for (int yy = y0; yy < y1; ++yy) {
            float* orow = out + static_cast<std::size_t>(yy) * d.width;
            const float* irow = in + static_cast<std::size_t>(yy + dy) * d.width + dx;
#pragma omp simd
            for (int xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx];
          }
        }
      }
    }
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, Tensor* grad_x,
                     Tensor* grad_weight, Tensor* grad_bias) {
  const auto d = check_conv(x, weight, nullptr);
  if (grad_y.shape() != std::vector<int>{d.batch, d.out_ch, d.height, d.width})
    throw Error(ErrorKind::kShapeMismatch, "conv2d_backward: grad_y shape does not match output");
  if (grad_x && !grad_x->same_shape(x)) throw Error(ErrorKind::kShapeMismatch, "conv2d_backward: grad_x shape");
  if (grad_weight && !grad_weight->same_shape(weight))
    throw Error(ErrorKind::kShapeMismatch, "conv2d_backward: grad_weight shape");
  if (grad_bias && (grad_bias->shape().size() != 1 || grad_bias->dim(0) != d.out_ch))
    throw Error(ErrorKind::kShapeMismatch, "conv2d_backward: grad_bias shape");

  const std::size_t hw = static_cast<std::size_t>(d.height) * static_cast<std::size_t>(d.width);
  const float* xd = x.data();
  const float* wd = weight.data();
  const float* gy = grad_y.data();

  if (grad_x) {
    float* gx = grad_x->data();
    const int jobs = d.batch * d.in_ch;
#pragma omp parallel for schedule(static)
    for (int job = 0; job < jobs; ++job) {
      const int n = job / d.in_ch;
      const int ci = job % d.in_ch;
      float* gin = gx + plane(n, ci, d.in_ch, hw);
      for (int co = 0; co < d.out_ch; ++co) {
        const float* gout = gy + plane(n, co, d.out_ch, hw);
        const float* wk = wd + (static_cast<std::size_t>(co) * d.in_ch + ci) * d.k * d.k;
        for (int ky = 0; ky < d.k; ++ky) {
          const int dy = ky - d.radius;
          const int y0 = std::max(0, -dy), y1 = std::min(d.height, d.height - dy);
          for (int kx = 0; kx < d.k; ++kx) {
            const int dx = kx - d.radius;
            const int x0 = std::max(0, -dx), x1 = std::min(d.width, d.width - dx);
            const float wv = wk[ky * d.k + kx];
            for (int yy = y0; yy < y1; ++yy) {
              const float* grow = gout + static_cast<std::size_t>(yy) * d.width;
              float* irow = gin + static_cast<std::size_t>(yy + dy) * d.width + dx;
#pragma omp simd
              for (int xx = x0; xx < x1; ++xx) irow[xx] += wv * grow[xx];
            }
          }
        }
      }
    }
  }

  if (grad_weight) {
    float* gw = grad_weight->data();
    const int jobs = d.out_ch * d.in_ch;
#pragma omp parallel for schedule(static)
    for (int job = 0; job < jobs; ++job) {
      const int co = job / d.in_ch;
      const int ci = job % d.in_ch;
      float* gk = gw + (static_cast<std::size_t>(co) * d.in_ch + ci) * d.k * d.k;
      for (int ky = 0; ky < d.k; ++ky) {
        const int dy = ky - d.radius;
        const int y0 = std::max(0, -dy), y1 = std::min(d.height, d.height - dy);
        for (int kx = 0; kx < d.k; ++kx) {
          const int dx = kx - d.radius;
          const int x0 = std::max(0, -dx), x1 = std::min(d.width, d.width - dx);
          float acc = 0.0f;
          for (int n = 0; n < d.batch; ++n) {
            const float* gout = gy + plane(n, co, d.out_ch, hw);
            const float* in = xd + plane(n, ci, d.in_ch, hw);
            for (int yy = y0; yy < y1; ++yy) {
              const float* grow = gout + static_cast<std::size_t>(yy) * d.width;
              const float* irow = in + static_cast<std::size_t>(yy + dy) * d.width + dx;
#pragma omp simd reduction(+ : acc)
              for (int xx = x0; xx < x1; ++xx) acc += grow[xx] * irow[xx];
            }
          }
          gk[ky * d.k + kx] += acc;
        }
      }
    }
  }

  if (grad_bias) {
    for (int co = 0; co < d.out_ch; ++co) {
      float acc = 0.0f;
      for (int n = 0; n < d.batch; ++n) {
        const float* gout = gy + plane(n, co, d.out_ch, hw);
#pragma omp simd reduction(+ : acc)
        for (std::size_t i = 0; i < hw; ++i) acc += gout[i];
      }
      (*grad_bias)[static_cast<std::size_t>(co)] += acc;
    }
  }
}

}  // namespace soap::nn
