#include <algorithm>
#include <cmath>
#include <limits>

#include "soap/error.hpp"
#include "soap/nnkernel.hpp"

namespace soap::nn {

Tensor::Tensor(std::vector<int> shape, float fill) : shape_(std::move(shape)) {
  std::size_t n = 1;
  for (int d : shape_) {
    if (d < 0) throw Error(ErrorKind::kShapeMismatch, "negative tensor dimension");
    n *= static_cast<std::size_t>(d);
  }
  data_.assign(n, fill);
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

// ---- relu -------------------------------------------------------------------

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  const float* in = x.data();
  float* out = y.data();
  const std::size_t n = x.size();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > 0.0f ? in[i] : 0.0f;
  return y;
}

void relu_backward(const Tensor& x, const Tensor& grad_y, Tensor& grad_x) {
  if (!x.same_shape(grad_y) || !x.same_shape(grad_x)) throw Error(ErrorKind::kShapeMismatch, "relu_backward");
  const float* in = x.data();
  const float* gy = grad_y.data();
  float* gx = grad_x.data();
  const std::size_t n = x.size();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) gx[i] += in[i] > 0.0f ? gy[i] : 0.0f;
}

// ---- maxpool ----------------------------------------------------------------

MaxPoolResult maxpool3x3(const Tensor& x) {
  if (x.shape().size() != 4) throw Error(ErrorKind::kShapeMismatch, "maxpool3x3 expects NCHW");
  const int planes = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
  MaxPoolResult r{Tensor(x.shape()), std::vector<std::uint32_t>(x.size())};
  const float* in = x.data();
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p) {
    const std::size_t base = static_cast<std::size_t>(p) * H * W;
    for (int yy = 0; yy < H; ++yy)
      for (int xx = 0; xx < W; ++xx) {
        float best = -std::numeric_limits<float>::infinity();
        std::size_t arg = 0;
        for (int sy = std::max(0, yy - 1); sy <= std::min(H - 1, yy + 1); ++sy)
          for (int sx = std::max(0, xx - 1); sx <= std::min(W - 1, xx + 1); ++sx) {
            const std::size_t idx = base + static_cast<std::size_t>(sy) * W + sx;
            if (in[idx] > best) {
              best = in[idx];
              arg = idx;
            }
          }
        const std::size_t o = base + static_cast<std::size_t>(yy) * W + xx;
        r.y[o] = best;
        r.argmax[o] = static_cast<std::uint32_t>(arg);
      }
  }
  return r;
}

void maxpool3x3_backward(const MaxPoolResult& fwd, const Tensor& grad_y, Tensor& grad_x) {
  if (!fwd.y.same_shape(grad_y) || !grad_x.same_shape(grad_y))
    throw Error(ErrorKind::kShapeMismatch, "maxpool3x3_backward");
  // argmax indices never leave their own plane, so planes scatter independently
  const int planes = grad_y.dim(0) * grad_y.dim(1);
  const std::size_t hw = static_cast<std::size_t>(grad_y.dim(2)) * grad_y.dim(3);
  float* gx = grad_x.data();
  const float* gy = grad_y.data();
#pragma omp parallel for schedule(static)
  for (int p = 0; p < planes; ++p)
    for (std::size_t i = p * hw; i < (p + 1) * hw; ++i) gx[fwd.argmax[i]] += gy[i];
}

// ---- ghost batch norm -----------------------------------------------------------

Tensor ghost_batchnorm(const Tensor& x, BnParams& params, int ghost_size, BnMode mode, BnCache* cache) {
  if (x.shape().size() != 4) throw Error(ErrorKind::kShapeMismatch, "batchnorm expects NCHW");
  const int N = x.dim(0), C = x.dim(1);
  const std::size_t hw = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  if (params.scale.size() != static_cast<std::size_t>(C) || params.shift.size() != static_cast<std::size_t>(C))
    throw Error(ErrorKind::kShapeMismatch, "batchnorm parameters do not match channel count");

  int group = N;
  if (mode == BnMode::kTrain) {
    if (ghost_size <= 0 || N % ghost_size != 0)
      throw Error(ErrorKind::kBadGhostSize, "batch " + std::to_string(N) + " not divisible by ghost size " +
                                                std::to_string(ghost_size));
    group = ghost_size;
  }
  const int groups = N / group;

  Tensor y(x.shape());
  Tensor xhat(x.shape());
  std::vector<float> inv_std(static_cast<std::size_t>(groups * C));
  const float* xd = x.data();

#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    for (int g = 0; g < groups; ++g) {
      double mean, var;
      if (mode == BnMode::kEval) {
        mean = params.running_mean[static_cast<std::size_t>(c)];
        var = params.running_var[static_cast<std::size_t>(c)];
      } else {
        const double count = static_cast<double>(group) * static_cast<double>(hw);
        double sum = 0.0;
        for (int n = g * group; n < (g + 1) * group; ++n) {
          const float* p = xd + (static_cast<std::size_t>(n) * C + c) * hw;
          for (std::size_t i = 0; i < hw; ++i) sum += p[i];
        }
        mean = sum / count;
        double ss = 0.0;
        for (int n = g * group; n < (g + 1) * group; ++n) {
          const float* p = xd + (static_cast<std::size_t>(n) * C + c) * hw;
          for (std::size_t i = 0; i < hw; ++i) {
            const double d = p[i] - mean;
            ss += d * d;
          }
        }
        var = ss / count;
        auto& rm = params.running_mean[static_cast<std::size_t>(c)];
        auto& rv = params.running_var[static_cast<std::size_t>(c)];
        if (mode == BnMode::kTrain) {
          const double unbiased = count > 1 ? ss / (count - 1) : var;
          rm = static_cast<float>((1.0 - kBnMomentum) * rm + kBnMomentum * mean);
          rv = static_cast<float>((1.0 - kBnMomentum) * rv + kBnMomentum * unbiased);
        } else {
          rm = static_cast<float>(mean);
          rv = static_cast<float>(var);
        }
      }
      const float istd = static_cast<float>(1.0 / std::sqrt(var + kBnEps));
      inv_std[static_cast<std::size_t>(g * C + c)] = istd;
      const float m = static_cast<float>(mean);
      const float a = params.scale[static_cast<std::size_t>(c)];
      const float b = params.shift[static_cast<std::size_t>(c)];
      for (int n = g * group; n < (g + 1) * group; ++n) {
        const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          const float h = (xd[off + i] - m) * istd;
          xhat[off + i] = h;
          y[off + i] = a * h + b;
        }
      }
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->ghost_size = group;
    cache->mode = mode;
  }
  return y;
}

void ghost_batchnorm_backward(const BnCache& cache, const BnParams& params, const Tensor& grad_y, Tensor& grad_x,
                              Tensor* grad_scale, Tensor* grad_shift) {
  const Tensor& xhat = cache.xhat;
  if (!xhat.same_shape(grad_y) || !grad_x.same_shape(grad_y))
    throw Error(ErrorKind::kShapeMismatch, "batchnorm_backward");
  const int N = xhat.dim(0), C = xhat.dim(1);
  const std::size_t hw = static_cast<std::size_t>(xhat.dim(2)) * xhat.dim(3);
  const int group = cache.ghost_size;
  const int groups = N / group;
  const bool batch_stats = cache.mode != BnMode::kEval;

#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    const float a = params.scale[static_cast<std::size_t>(c)];
    double dscale = 0.0, dshift = 0.0;
    for (int g = 0; g < groups; ++g) {
      const float istd = cache.inv_std[static_cast<std::size_t>(g * C + c)];
      double sum_gy = 0.0, sum_gy_xhat = 0.0;
      for (int n = g * group; n < (g + 1) * group; ++n) {
        const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i) {
          sum_gy += grad_y[off + i];
          sum_gy_xhat += static_cast<double>(grad_y[off + i]) * xhat[off + i];
        }
      }
      dscale += sum_gy_xhat;
      dshift += sum_gy;
      const double count = static_cast<double>(group) * static_cast<double>(hw);
      const float mean_gy = batch_stats ? static_cast<float>(sum_gy / count) : 0.0f;
      const float mean_gy_xhat = batch_stats ? static_cast<float>(sum_gy_xhat / count) : 0.0f;
      for (int n = g * group; n < (g + 1) * group; ++n) {
        const std::size_t off = (static_cast<std::size_t>(n) * C + c) * hw;
        for (std::size_t i = 0; i < hw; ++i)
          grad_x[off + i] += a * istd * (grad_y[off + i] - mean_gy - xhat[off + i] * mean_gy_xhat);
      }
    }
    if (grad_scale) (*grad_scale)[static_cast<std::size_t>(c)] += static_cast<float>(dscale);
    if (grad_shift) (*grad_shift)[static_cast<std::size_t>(c)] += static_cast<float>(dshift);
  }
}

// ---- loss --------------------------------------------------------------------

float sigmoid(float z) {
  if (z >= 0.0f) return 1.0f / (1.0f + std::exp(-z));
  const float e = std::exp(z);
  return e / (1.0f + e);
}

double sigmoid_bce_loss(const Tensor& logits, const Tensor& labels, Tensor* grad_logits) {
  if (!logits.same_shape(labels)) throw Error(ErrorKind::kShapeMismatch, "loss: logits and labels differ in shape");
  const std::size_t n = logits.size();
  if (n == 0) return 0.0;
  if (grad_logits && !grad_logits->same_shape(logits)) *grad_logits = Tensor(logits.shape());
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = logits[i];
    const double t = labels[i];
    total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    if (grad_logits) (*grad_logits)[i] = static_cast<float>((sigmoid(logits[i]) - t) * inv_n);
  }
  return total * inv_n;
}

// ---- optimizer -----------------------------------------------------------------

void sgd_step(Tensor& param, const Tensor& grad, float lr, float momentum, Tensor& velocity) {
  if (!param.same_shape(grad)) throw Error(ErrorKind::kShapeMismatch, "sgd_step: gradient shape");
  if (velocity.size() == 0) velocity = Tensor(param.shape());
  if (!velocity.same_shape(param)) throw Error(ErrorKind::kShapeMismatch, "sgd_step: velocity shape");
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    param[i] -= lr * velocity[i];
  }
}

}  // namespace soap::nn
