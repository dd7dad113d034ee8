#pragma once

// Dense float32 kernels for small fully-convolutional networks. Activations
// are NCHW, stride 1, "same" padding everywhere. Backward functions ADD into
// their gradient outputs so a tensor consumed by several layers can collect
// all contributions; callers zero gradient buffers first.
//
// Kernels parallelize with OpenMP over independent output planes only, so
// every output element is reduced in one fixed order regardless of thread
// count. The `reference` namespace keeps plain serial loops for testing.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace soap::nn {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, float fill = 0.0f);

  const std::vector<int>& shape() const { return shape_; }
  int dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  // NCHW accessors, only for 4-D tensors
  float& at(int n, int c, int y, int x) { return data_[offset(n, c, y, x)]; }
  float at(int n, int c, int y, int x) const { return data_[offset(n, c, y, x)]; }

  void fill(float v);
  void zero() { fill(0.0f); }
  bool all_finite() const;
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * static_cast<std::size_t>(shape_[1]) + static_cast<std::size_t>(c)) *
                static_cast<std::size_t>(shape_[2]) +
            static_cast<std::size_t>(y)) *
               static_cast<std::size_t>(shape_[3]) +
           static_cast<std::size_t>(x);
  }

  std::vector<int> shape_;
  std::vector<float> data_;
};

// ---- convolution ---------------------------------------------------------

/// y = conv(x, weight) + bias, weight is [out, in, k, k] with odd k.
/// `bias` may be null. Throws kShapeMismatch.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias);

/// Accumulates input/weight/bias gradients. Any output pointer may be null.
void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y,
                     Tensor* grad_x, Tensor* grad_weight, Tensor* grad_bias);

// ---- pointwise / pooling --------------------------------------------------

Tensor relu(const Tensor& x);
/// Gradient routed where the forward input was strictly positive.
void relu_backward(const Tensor& x, const Tensor& grad_y, Tensor& grad_x);

struct MaxPoolResult {
  Tensor y;
  std::vector<std::uint32_t> argmax;  // flat input index per output element
};

/// 3x3 window max, stride 1, padding acts as -inf. Ties go to the first
/// window element in row-major order.
MaxPoolResult maxpool3x3(const Tensor& x);
void maxpool3x3_backward(const MaxPoolResult& fwd, const Tensor& grad_y, Tensor& grad_x);

// ---- ghost batch normalization ---------------------------------------------

inline constexpr float kBnEps = 1e-5f;
inline constexpr float kBnMomentum = 0.1f;

enum class BnMode {
  kTrain,      // ghost-group statistics, running stats updated by EMA
  kEval,       // running statistics
  kCalibrate,  // whole-batch statistics written straight into running stats
};

struct BnParams {
  Tensor scale;         // [C]
  Tensor shift;         // [C]
  Tensor running_mean;  // [C]
  Tensor running_var;   // [C]
};

struct BnCache {
  Tensor xhat;
  std::vector<float> inv_std;  // [groups * C]
  int ghost_size = 0;
  BnMode mode = BnMode::kEval;
};

/// Normalizes each channel within consecutive groups of `ghost_size` samples.
/// Throws kBadGhostSize when training with a batch not divisible by it.
Tensor ghost_batchnorm(const Tensor& x, BnParams& params, int ghost_size, BnMode mode, BnCache* cache);

void ghost_batchnorm_backward(const BnCache& cache, const BnParams& params, const Tensor& grad_y,
                              Tensor& grad_x, Tensor* grad_scale, Tensor* grad_shift);

// ---- loss -----------------------------------------------------------------

/// Mean binary cross-entropy of sigmoid(logits), stable log-sum-exp form.
/// When `grad_logits` is given it is overwritten with d(loss)/d(logits).
double sigmoid_bce_loss(const Tensor& logits, const Tensor& labels, Tensor* grad_logits);

float sigmoid(float z);

// ---- optimizer ------------------------------------------------------------

/// v <- momentum*v + g; p <- p - lr*v. `velocity` is resized on first use.
void sgd_step(Tensor& param, const Tensor& grad, float lr, float momentum, Tensor& velocity);

// ---- named parameter storage and checkpoints ------------------------------

using ParamStore = std::map<std::string, Tensor>;

/// Binary `SNCK` checkpoint: magic, u32 version, u32 count, then per record
/// u32 name length, name, u32 rank, u32 dims, little-endian f32 payload.
void write_checkpoint(const std::string& path, const ParamStore& params);
ParamStore read_checkpoint(const std::string& path);

std::uint64_t checksum(const Tensor& t);

// ---- finite-difference gradient checking -----------------------------------

struct GradCheckEntry {
  Tensor* value;          // perturbed in place, restored afterwards
  const Tensor* analytic; // d(objective)/d(value)
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed(double tolerance) const { return max_rel_error <= tolerance; }
};

/// Central differences of `objective` against analytic gradients. The error
/// per element is |a - n| / max(|a|, |n|, floor), with floor = 1% of the
/// largest analytic magnitude in that tensor.
GradCheckReport grad_check(const std::function<double()>& objective, std::span<const GradCheckEntry> entries,
                           double eps);

namespace reference {

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor* bias);
void conv2d_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_y, Tensor* grad_x,
                     Tensor* grad_weight, Tensor* grad_bias);
MaxPoolResult maxpool3x3(const Tensor& x);

}  // namespace reference

}  // namespace soap::nn
