// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "uvqa/common.hpp"
#include "uvqa/rng.hpp"

namespace uvqa {

// Dense row-major tensor with an optional same-shape gradient buffer. The
// engine is templated on the scalar so the same kernels run in 32-bit for
// training and in 64-bit for gradient verification.
template <typename T>
struct TensorT {
  std::vector<int> shape;  // NCHW or lower rank
  std::vector<T> data;
  std::vector<T> grad;

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(element_count(), T(0));
  }

  std::size_t element_count() const {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
  }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
  }
};

using Tensor = TensorT<float>;

template <typename T>
struct ParamRef {
  std::string name;
  TensorT<T>* tensor;
};

struct ConvGeometry {
  int stride = 1;
  int pad = 0;       // zero padding
  int dilation = 1;
};

int conv_output_extent(int input, int kernel, const ConvGeometry& geo);

// Cross-correlation (the usual CNN convention). weight is (outC,inC,kh,kw),
// bias (outC); input (N,C,H,W).
template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                  const TensorT<T>& bias, const ConvGeometry& geo);

// grad_* accumulate; pass nullptr to skip a gradient.
template <typename T>
void conv2d_backward(const TensorT<T>& input, const TensorT<T>& weight,
                     const ConvGeometry& geo, const TensorT<T>& grad_output,
                     TensorT<T>* grad_input, TensorT<T>* grad_weight,
                     TensorT<T>* grad_bias);

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b);
template <typename T>
void split_channels(const TensorT<T>& grad, int channels_a, TensorT<T>* grad_a,
                    TensorT<T>* grad_b);

// ---------------------------------------------------------------------------
// Modules

template <typename T>
class ModuleT {
 public:
  virtual ~ModuleT() = default;
  virtual TensorT<T> forward(const TensorT<T>& input, bool training) = 0;
  // Accumulates parameter gradients, returns the input gradient.
  virtual TensorT<T> backward(const TensorT<T>& grad_output) = 0;
  virtual void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {}
  virtual void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) {}
};

template <typename T>
class Conv2dT : public ModuleT<T> {
 public:
  Conv2dT(int in_channels, int out_channels, int kernel, ConvGeometry geo,
          CounterRng& rng);
  TensorT<T> forward(const TensorT<T>& input, bool training) override;
  TensorT<T> backward(const TensorT<T>& grad_output) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;

  TensorT<T>& weight() { return weight_; }
  TensorT<T>& bias() { return bias_; }

 private:
  TensorT<T> weight_, bias_;
  TensorT<T> input_;
  ConvGeometry geo_;
};

template <typename T>
class BatchNorm2dT : public ModuleT<T> {
 public:
  explicit BatchNorm2dT(int channels);
  TensorT<T> forward(const TensorT<T>& input, bool training) override;
  TensorT<T> backward(const TensorT<T>& grad_output) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) override;

  TensorT<T>& gamma() { return gamma_; }
  TensorT<T>& beta() { return beta_; }
  TensorT<T>& running_mean() { return running_mean_; }
  TensorT<T>& running_var() { return running_var_; }

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.9;  // running = m*running + (1-m)*batch

 private:
  int channels_;
  TensorT<T> gamma_, beta_;
  TensorT<T> running_mean_, running_var_;
  // backward cache
  std::vector<T> x_hat_;
  std::vector<T> inv_std_;
  std::vector<int> cached_shape_;
  bool cached_training_ = false;
};

enum class Activation { relu, sigmoid };

template <typename T>
class ActivationT : public ModuleT<T> {
 public:
  explicit ActivationT(Activation kind) : kind_(kind) {}
  TensorT<T> forward(const TensorT<T>& input, bool training) override;
  TensorT<T> backward(const TensorT<T>& grad_output) override;

 private:
  Activation kind_;
  TensorT<T> cache_;  // relu: input; sigmoid: output
};

template <typename T>
class GlobalAvgPoolT : public ModuleT<T> {
 public:
  TensorT<T> forward(const TensorT<T>& input, bool training) override;
  TensorT<T> backward(const TensorT<T>& grad_output) override;

 private:
  std::vector<int> input_shape_;
};

template <typename T>
class LinearT : public ModuleT<T> {
 public:
  LinearT(int in_features, int out_features, CounterRng& rng);
  TensorT<T> forward(const TensorT<T>& input, bool training) override;
  TensorT<T> backward(const TensorT<T>& grad_output) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;

  TensorT<T>& weight() { return weight_; }
  TensorT<T>& bias() { return bias_; }

 private:
  TensorT<T> weight_, bias_;
  TensorT<T> input_;
};

template <typename T>
class SequentialT : public ModuleT<T> {
 public:
  void add(std::string name, std::unique_ptr<ModuleT<T>> module);
  TensorT<T> forward(const TensorT<T>& input, bool training) override;
  TensorT<T> backward(const TensorT<T>& grad_output) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  std::size_t size() const { return modules_.size(); }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<ModuleT<T>>>> modules_;
};

// out = x + branch(x); spatial shape and channels preserved by construction.
template <typename T>
class ResidualBlockT : public ModuleT<T> {
 public:
  explicit ResidualBlockT(SequentialT<T> branch) : branch_(std::move(branch)) {}
  TensorT<T> forward(const TensorT<T>& input, bool training) override;
  TensorT<T> backward(const TensorT<T>& grad_output) override;
  void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<ParamRef<T>>& out) override;

 private:
  SequentialT<T> branch_;
};

// ---------------------------------------------------------------------------
// Losses. Each returns the unweighted loss and accumulates weight * dL/dpred
// into pred_grad (when non-null).

template <typename T>
T loss_mse(const TensorT<T>& pred, const std::vector<T>& target, T weight,
           TensorT<T>* pred_grad = nullptr);

template <typename T>
T loss_l1(const TensorT<T>& pred, const TensorT<T>& target, T weight,
          TensorT<T>* pred_grad = nullptr);

// 1 - mean SSIM over valid 11x11 Gaussian windows; constants on the [0,1]
// dynamic range. Inputs are (N,1,H,W) map patches.
template <typename T>
T loss_ssim(const TensorT<T>& pred, const TensorT<T>& target, T weight,
            TensorT<T>* pred_grad = nullptr);

// alpha * loss_ssim + (1-alpha) * loss_l1.
template <typename T>
T loss_generator(const TensorT<T>& pred, const TensorT<T>& target, T alpha,
                 TensorT<T>* pred_grad = nullptr);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// One bias-corrected update; t is the 1-based step count.
template <typename T>
void adam_step(std::vector<T>& param, const std::vector<T>& grad, std::vector<T>& m,
               std::vector<T>& v, long t, const AdamConfig& config);

template <typename T>
class AdamT {
 public:
  explicit AdamT(AdamConfig config) : config_(config) {}
  void step(const std::vector<ParamRef<T>>& params);
  long step_count() const { return step_; }
  AdamConfig& config() { return config_; }

 private:
  AdamConfig config_;
  long step_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

// ---------------------------------------------------------------------------
// Gradient verification

struct GradCheckReport {
  double max_rel_error = 0.0;  // |analytic - central difference| / max |grad|
  std::string worst_param;
  long checked = 0;
};

// eval_backward() must zero grads, run forward+backward and return the loss;
// eval() must re-evaluate the loss without touching grads. Components are
// perturbed by +-step. max_per_tensor == 0 checks every component.
template <typename T>
GradCheckReport finite_difference_check(const std::vector<ParamRef<T>>& tensors,
                                        const std::function<T()>& eval,
                                        const std::function<T()>& eval_backward,
                                        T step, int max_per_tensor = 0);

// Randomized sweep over every layer kind and loss: conv (random
// stride/padding/dilation), batchnorm, relu, sigmoid, global average pool,
// fully connected, MSE / L1 / SSIM / combined generator loss. Returns the
// worst finite-difference report across `configs` seeded configurations.
template <typename T>
GradCheckReport layer_gradient_sweep(int configs, std::uint64_t seed, T step);

}  // namespace uvqa
