// SPDX-FileCopyrightText: 2026 uvqa contributors
// SPDX-License-Identifier: Apache-2.0

#include "uvqa/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace uvqa {

int conv_output_extent(int input, int kernel, const ConvGeometry& geo) {
  int span = geo.dilation * (kernel - 1) + 1;
  int out = (input + 2 * geo.pad - span) / geo.stride + 1;
  require(out >= 1, ErrorCode::dimension, "convolution output would be empty");
  return out;
}

namespace {

void check_rank4(const std::vector<int>& shape, const char* what) {
  require(shape.size() == 4, ErrorCode::dimension,
          std::string(what) + " expects an NCHW tensor");
}

// Unrolls one image (C,H,W) into a (C*kh*kw) x (OH*OW) matrix with zero
// padding; the workhorse behind the GEMM-shaped convolution loops.
template <typename T>
void im2col(const T* img, int channels, int height, int width, int kernel,
            const ConvGeometry& geo, int out_h, int out_w, T* col) {
  const int patch = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    const T* src = img + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        T* row = col + (static_cast<std::size_t>(c) * kernel * kernel +
                        static_cast<std::size_t>(ky) * kernel + kx) *
                           patch;
        for (int oy = 0; oy < out_h; ++oy) {
          int iy = oy * geo.stride - geo.pad + ky * geo.dilation;
          T* dst = row + static_cast<std::size_t>(oy) * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, T(0));
            continue;
          }
          const T* src_row = src + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            int ix = ox * geo.stride - geo.pad + kx * geo.dilation;
            dst[ox] = (ix >= 0 && ix < width) ? src_row[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int channels, int height, int width, int kernel,
                const ConvGeometry& geo, int out_h, int out_w, T* img) {
  const int patch = out_h * out_w;
  for (int c = 0; c < channels; ++c) {
    T* dst = img + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const T* row = col + (static_cast<std::size_t>(c) * kernel * kernel +
                              static_cast<std::size_t>(ky) * kernel + kx) *
                                 patch;
        for (int oy = 0; oy < out_h; ++oy) {
          int iy = oy * geo.stride - geo.pad + ky * geo.dilation;
          if (iy < 0 || iy >= height) continue;
          T* dst_row = dst + static_cast<std::size_t>(iy) * width;
          const T* src_row = row + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            int ix = ox * geo.stride - geo.pad + kx * geo.dilation;
            if (ix >= 0 && ix < width) dst_row[ix] += src_row[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
TensorT<T> conv2d(const TensorT<T>& input, const TensorT<T>& weight,
                  const TensorT<T>& bias, const ConvGeometry& geo) {
  check_rank4(input.shape, "conv2d");
  check_rank4(weight.shape, "conv2d weight");
  const int batch = input.dim(0), in_c = input.dim(1);
  const int h = input.dim(2), w = input.dim(3);
  const int out_c = weight.dim(0), kernel = weight.dim(2);
  require(weight.dim(1) == in_c, ErrorCode::dimension,
          "conv2d: weight input channels mismatch");
  require(weight.dim(2) == weight.dim(3), ErrorCode::dimension,
          "conv2d: only square kernels");
  require(bias.element_count() == static_cast<std::size_t>(out_c),
          ErrorCode::dimension, "conv2d: bias size mismatch");

  const int oh = conv_output_extent(h, kernel, geo);
  const int ow = conv_output_extent(w, kernel, geo);
  const int patch = oh * ow;
  const int ksize = in_c * kernel * kernel;

  TensorT<T> out({batch, out_c, oh, ow});
  std::vector<T> col(static_cast<std::size_t>(ksize) * patch);
  for (int n = 0; n < batch; ++n) {
    im2col(input.data.data() + static_cast<std::size_t>(n) * in_c * h * w, in_c, h, w,
           kernel, geo, oh, ow, col.data());
    for (int m = 0; m < out_c; ++m) {
      T* dst =
          out.data.data() + (static_cast<std::size_t>(n) * out_c + m) * patch;
      std::fill(dst, dst + patch, bias.data[m]);
      const T* wrow = weight.data.data() + static_cast<std::size_t>(m) * ksize;
      for (int k = 0; k < ksize; ++k) {
        const T wk = wrow[k];
        if (wk == T(0)) continue;
        const T* src = col.data() + static_cast<std::size_t>(k) * patch;
        for (int p = 0; p < patch; ++p) dst[p] += wk * src[p];
      }
    }
  }
  return out;
}

template <typename T>
void conv2d_backward(const TensorT<T>& input, const TensorT<T>& weight,
                     const ConvGeometry& geo, const TensorT<T>& grad_output,
                     TensorT<T>* grad_input, TensorT<T>* grad_weight,
                     TensorT<T>* grad_bias) {
  const int batch = input.dim(0), in_c = input.dim(1);
  const int h = input.dim(2), w = input.dim(3);
  const int out_c = weight.dim(0), kernel = weight.dim(2);
  const int oh = grad_output.dim(2), ow = grad_output.dim(3);
  const int patch = oh * ow;
  const int ksize = in_c * kernel * kernel;

  if (grad_input) {
    grad_input->shape = input.shape;
    grad_input->data.assign(input.element_count(), T(0));
  }
  if (grad_weight && grad_weight->data.size() != weight.element_count()) {
    grad_weight->shape = weight.shape;
    grad_weight->data.assign(weight.element_count(), T(0));
  }
  if (grad_bias && grad_bias->data.size() != static_cast<std::size_t>(out_c)) {
    grad_bias->shape = {out_c};
    grad_bias->data.assign(out_c, T(0));
  }
  std::vector<T> col(static_cast<std::size_t>(ksize) * patch);
  std::vector<T> dcol(grad_input ? col.size() : 0);

  for (int n = 0; n < batch; ++n) {
    const bool need_col = grad_weight != nullptr;
    if (need_col)
      im2col(input.data.data() + static_cast<std::size_t>(n) * in_c * h * w, in_c, h,
             w, kernel, geo, oh, ow, col.data());
    const T* gout =
        grad_output.data.data() + static_cast<std::size_t>(n) * out_c * patch;

    if (grad_bias) {
      for (int m = 0; m < out_c; ++m) {
        T acc = T(0);
        const T* g = gout + static_cast<std::size_t>(m) * patch;
        for (int p = 0; p < patch; ++p) acc += g[p];
        grad_bias->data[m] += acc;
      }
    }
    if (grad_weight) {
      for (int m = 0; m < out_c; ++m) {
        const T* g = gout + static_cast<std::size_t>(m) * patch;
        T* wrow = grad_weight->data.data() + static_cast<std::size_t>(m) * ksize;
        for (int k = 0; k < ksize; ++k) {
          const T* src = col.data() + static_cast<std::size_t>(k) * patch;
          T acc = T(0);
          for (int p = 0; p < patch; ++p) acc += g[p] * src[p];
          wrow[k] += acc;
        }
      }
    }
    if (grad_input) {
      std::fill(dcol.begin(), dcol.end(), T(0));
      for (int m = 0; m < out_c; ++m) {
        const T* g = gout + static_cast<std::size_t>(m) * patch;
        const T* wrow = weight.data.data() + static_cast<std::size_t>(m) * ksize;
        for (int k = 0; k < ksize; ++k) {
          const T wk = wrow[k];
          if (wk == T(0)) continue;
          T* dst = dcol.data() + static_cast<std::size_t>(k) * patch;
          for (int p = 0; p < patch; ++p) dst[p] += wk * g[p];
        }
      }
      col2im_add(dcol.data(), in_c, h, w, kernel, geo, oh, ow,
                 grad_input->data.data() + static_cast<std::size_t>(n) * in_c * h * w);
    }
  }
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
  check_rank4(a.shape, "concat");
  check_rank4(b.shape, "concat");
  require(a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2) && a.dim(3) == b.dim(3),
          ErrorCode::dimension, "concat: incompatible shapes");
  const int batch = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  const std::size_t plane = static_cast<std::size_t>(a.dim(2)) * a.dim(3);
  TensorT<T> out({batch, ca + cb, a.dim(2), a.dim(3)});
  for (int n = 0; n < batch; ++n) {
    std::memcpy(out.data.data() + (static_cast<std::size_t>(n) * (ca + cb)) * plane,
                a.data.data() + static_cast<std::size_t>(n) * ca * plane,
                sizeof(T) * ca * plane);
    std::memcpy(
        out.data.data() + (static_cast<std::size_t>(n) * (ca + cb) + ca) * plane,
        b.data.data() + static_cast<std::size_t>(n) * cb * plane, sizeof(T) * cb * plane);
  }
  return out;
}

template <typename T>
void split_channels(const TensorT<T>& grad, int channels_a, TensorT<T>* grad_a,
                    TensorT<T>* grad_b) {
  const int batch = grad.dim(0), c = grad.dim(1);
  const int cb = c - channels_a;
  const std::size_t plane = static_cast<std::size_t>(grad.dim(2)) * grad.dim(3);
  *grad_a = TensorT<T>({batch, channels_a, grad.dim(2), grad.dim(3)});
  *grad_b = TensorT<T>({batch, cb, grad.dim(2), grad.dim(3)});
  for (int n = 0; n < batch; ++n) {
    std::memcpy(grad_a->data.data() + static_cast<std::size_t>(n) * channels_a * plane,
                grad.data.data() + (static_cast<std::size_t>(n) * c) * plane,
                sizeof(T) * channels_a * plane);
    std::memcpy(grad_b->data.data() + static_cast<std::size_t>(n) * cb * plane,
                grad.data.data() + (static_cast<std::size_t>(n) * c + channels_a) * plane,
                sizeof(T) * cb * plane);
  }
}

// ---------------------------------------------------------------------------
// Conv2d module

template <typename T>
Conv2dT<T>::Conv2dT(int in_channels, int out_channels, int kernel, ConvGeometry geo,
                    CounterRng& rng)
    : geo_(geo) {
  require(in_channels >= 1 && out_channels >= 1 && kernel >= 1,
          ErrorCode::invalid_arg, "conv: invalid channel/kernel counts");
  weight_ = TensorT<T>({out_channels, in_channels, kernel, kernel});
  bias_ = TensorT<T>({out_channels});
  // He-uniform over the fan-in.
  const double bound = std::sqrt(6.0 / (in_channels * kernel * kernel));
  for (T& v : weight_.data)
    v = static_cast<T>(rng.next_uniform(-bound, bound));
  weight_.ensure_grad();
  bias_.ensure_grad();
}

template <typename T>
TensorT<T> Conv2dT<T>::forward(const TensorT<T>& input, bool) {
  input_ = input;
  return conv2d(input, weight_, bias_, geo_);
}

template <typename T>
TensorT<T> Conv2dT<T>::backward(const TensorT<T>& grad_output) {
  TensorT<T> grad_input;
  TensorT<T> gw, gb;
  gw.shape = weight_.shape;
  gw.data.swap(weight_.grad);  // accumulate straight into the stored grads
  gb.shape = bias_.shape;
  gb.data.swap(bias_.grad);
  conv2d_backward(input_, weight_, geo_, grad_output, &grad_input, &gw, &gb);
  weight_.grad.swap(gw.data);
  bias_.grad.swap(gb.data);
  return grad_input;
}

template <typename T>
void Conv2dT<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".w", &weight_});
  out.push_back({prefix + ".b", &bias_});
}

// ---------------------------------------------------------------------------
// BatchNorm2d

template <typename T>
BatchNorm2dT<T>::BatchNorm2dT(int channels) : channels_(channels) {
  require(channels >= 1, ErrorCode::invalid_arg, "batchnorm: invalid channel count");
  gamma_ = TensorT<T>({channels});
  beta_ = TensorT<T>({channels});
  running_mean_ = TensorT<T>({channels});
  running_var_ = TensorT<T>({channels});
  std::fill(gamma_.data.begin(), gamma_.data.end(), T(1));
  std::fill(running_var_.data.begin(), running_var_.data.end(), T(1));
  gamma_.ensure_grad();
  beta_.ensure_grad();
}

template <typename T>
TensorT<T> BatchNorm2dT<T>::forward(const TensorT<T>& input, bool training) {
  check_rank4(input.shape, "batchnorm");
  require(input.dim(1) == channels_, ErrorCode::dimension, "batchnorm: channel mismatch");
  const int batch = input.dim(0);
  const std::size_t plane = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
  const std::size_t count = static_cast<std::size_t>(batch) * plane;
  require(count > 0, ErrorCode::invalid_arg, "batchnorm: empty batch");

  cached_shape_ = input.shape;
  cached_training_ = training;
  x_hat_.assign(input.data.size(), T(0));
  inv_std_.assign(channels_, T(0));

  TensorT<T> out(input.shape);
  for (int c = 0; c < channels_; ++c) {
    T mean, var;
    if (training) {
      double sum = 0.0, sum_sq = 0.0;
      for (int n = 0; n < batch; ++n) {
        const T* src = input.data.data() +
                       (static_cast<std::size_t>(n) * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          sum += src[i];
          sum_sq += static_cast<double>(src[i]) * src[i];
        }
      }
      double m = sum / static_cast<double>(count);
      double v = std::max(sum_sq / static_cast<double>(count) - m * m, 0.0);
      mean = static_cast<T>(m);
      var = static_cast<T>(v);
      running_mean_.data[c] =
          static_cast<T>(kMomentum * running_mean_.data[c] + (1.0 - kMomentum) * m);
      running_var_.data[c] =
          static_cast<T>(kMomentum * running_var_.data[c] + (1.0 - kMomentum) * v);
    } else {
      mean = running_mean_.data[c];
      var = running_var_.data[c];
    }
    const T inv_std = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + kEps));
    inv_std_[c] = inv_std;
    const T g = gamma_.data[c], b = beta_.data[c];
    for (int n = 0; n < batch; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        T xh = (input.data[base + i] - mean) * inv_std;
        x_hat_[base + i] = xh;
        out.data[base + i] = g * xh + b;
      }
    }
  }
  return out;
}

template <typename T>
TensorT<T> BatchNorm2dT<T>::backward(const TensorT<T>& grad_output) {
  const int batch = cached_shape_[0];
  const std::size_t plane =
      static_cast<std::size_t>(cached_shape_[2]) * cached_shape_[3];
  const std::size_t count = static_cast<std::size_t>(batch) * plane;

  TensorT<T> grad_input(cached_shape_);
  for (int c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < batch; ++n) {
      const std::size_t base = (static_cast<std::size_t>(n) * channels_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += grad_output.data[base + i];
        sum_dy_xhat +=
            static_cast<double>(grad_output.data[base + i]) * x_hat_[base + i];
      }
    }
    gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
    beta_.grad[c] += static_cast<T>(sum_dy);

    const T g_inv = gamma_.data[c] * inv_std_[c];
    if (cached_training_) {
      const T mean_dy = static_cast<T>(sum_dy / static_cast<double>(count));
      const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / static_cast<double>(count));
      for (int n = 0; n < batch; ++n) {
        const std::size_t base = (static_cast<std::size_t>(n) * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          grad_input.data[base + i] =
              g_inv * (grad_output.data[base + i] - mean_dy -
                       x_hat_[base + i] * mean_dy_xhat);
        }
      }
    } else {
      for (int n = 0; n < batch; ++n) {
        const std::size_t base = (static_cast<std::size_t>(n) * channels_ + c) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          grad_input.data[base + i] = g_inv * grad_output.data[base + i];
      }
    }
  }
  return grad_input;
}

template <typename T>
void BatchNorm2dT<T>::collect_params(const std::string& prefix,
                                     std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".gamma", &gamma_});
  out.push_back({prefix + ".beta", &beta_});
}

template <typename T>
void BatchNorm2dT<T>::collect_buffers(const std::string& prefix,
                                      std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".running_mean", &running_mean_});
  out.push_back({prefix + ".running_var", &running_var_});
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
TensorT<T> ActivationT<T>::forward(const TensorT<T>& input, bool) {
  TensorT<T> out(input.shape);
  if (kind_ == Activation::relu) {
    for (std::size_t i = 0; i < input.data.size(); ++i)
      out.data[i] = input.data[i] > T(0) ? input.data[i] : T(0);
    cache_ = input;
  } else {
    for (std::size_t i = 0; i < input.data.size(); ++i)
      out.data[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(input.data[i]))));
    cache_ = out;
  }
  return out;
}

template <typename T>
TensorT<T> ActivationT<T>::backward(const TensorT<T>& grad_output) {
  TensorT<T> grad(grad_output.shape);
  if (kind_ == Activation::relu) {
    for (std::size_t i = 0; i < grad.data.size(); ++i)
      grad.data[i] = cache_.data[i] > T(0) ? grad_output.data[i] : T(0);
  } else {
    for (std::size_t i = 0; i < grad.data.size(); ++i) {
      T y = cache_.data[i];
      grad.data[i] = grad_output.data[i] * y * (T(1) - y);
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

template <typename T>
TensorT<T> GlobalAvgPoolT<T>::forward(const TensorT<T>& input, bool) {
  check_rank4(input.shape, "global_average_pool");
  input_shape_ = input.shape;
  const int batch = input.dim(0), channels = input.dim(1);
  const std::size_t plane = static_cast<std::size_t>(input.dim(2)) * input.dim(3);
  TensorT<T> out({batch, channels});
  for (int n = 0; n < batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      const T* src = input.data.data() + (static_cast<std::size_t>(n) * channels + c) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += src[i];
      out.data[static_cast<std::size_t>(n) * channels + c] =
          static_cast<T>(acc / static_cast<double>(plane));
    }
  }
  return out;
}

template <typename T>
TensorT<T> GlobalAvgPoolT<T>::backward(const TensorT<T>& grad_output) {
  const int batch = input_shape_[0], channels = input_shape_[1];
  const std::size_t plane =
      static_cast<std::size_t>(input_shape_[2]) * input_shape_[3];
  TensorT<T> grad(input_shape_);
  const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
  for (int n = 0; n < batch; ++n) {
    for (int c = 0; c < channels; ++c) {
      T g = grad_output.data[static_cast<std::size_t>(n) * channels + c] * inv;
      T* dst = grad.data.data() + (static_cast<std::size_t>(n) * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) dst[i] = g;
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
LinearT<T>::LinearT(int in_features, int out_features, CounterRng& rng) {
  require(in_features >= 1 && out_features >= 1, ErrorCode::invalid_arg,
          "linear: invalid feature counts");
  weight_ = TensorT<T>({out_features, in_features});
  bias_ = TensorT<T>({out_features});
  const double bound = std::sqrt(6.0 / in_features);
  for (T& v : weight_.data) v = static_cast<T>(rng.next_uniform(-bound, bound));
  weight_.ensure_grad();
  bias_.ensure_grad();
}

template <typename T>
TensorT<T> LinearT<T>::forward(const TensorT<T>& input, bool) {
  require(input.rank() == 2, ErrorCode::dimension, "linear expects (N, features)");
  const int batch = input.dim(0), in_f = input.dim(1);
  const int out_f = weight_.dim(0);
  require(weight_.dim(1) == in_f, ErrorCode::dimension, "linear: feature mismatch");
  input_ = input;
  TensorT<T> out({batch, out_f});
  for (int n = 0; n < batch; ++n) {
    const T* x = input.data.data() + static_cast<std::size_t>(n) * in_f;
    for (int o = 0; o < out_f; ++o) {
      const T* w = weight_.data.data() + static_cast<std::size_t>(o) * in_f;
      T acc = bias_.data[o];
      for (int i = 0; i < in_f; ++i) acc += w[i] * x[i];
      out.data[static_cast<std::size_t>(n) * out_f + o] = acc;
    }
  }
  return out;
}

template <typename T>
TensorT<T> LinearT<T>::backward(const TensorT<T>& grad_output) {
  const int batch = input_.dim(0), in_f = input_.dim(1);
  const int out_f = weight_.dim(0);
  TensorT<T> grad_input({batch, in_f});
  for (int n = 0; n < batch; ++n) {
    const T* x = input_.data.data() + static_cast<std::size_t>(n) * in_f;
    const T* g = grad_output.data.data() + static_cast<std::size_t>(n) * out_f;
    T* gi = grad_input.data.data() + static_cast<std::size_t>(n) * in_f;
    for (int o = 0; o < out_f; ++o) {
      bias_.grad[o] += g[o];
      T* gw = weight_.grad.data() + static_cast<std::size_t>(o) * in_f;
      const T* w = weight_.data.data() + static_cast<std::size_t>(o) * in_f;
      for (int i = 0; i < in_f; ++i) {
        gw[i] += g[o] * x[i];
        gi[i] += g[o] * w[i];
      }
    }
  }
  return grad_input;
}

template <typename T>
void LinearT<T>::collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
  out.push_back({prefix + ".w", &weight_});
  out.push_back({prefix + ".b", &bias_});
}

// ---------------------------------------------------------------------------
// Composites

template <typename T>
void SequentialT<T>::add(std::string name, std::unique_ptr<ModuleT<T>> module) {
  modules_.emplace_back(std::move(name), std::move(module));
}

template <typename T>
TensorT<T> SequentialT<T>::forward(const TensorT<T>& input, bool training) {
  TensorT<T> x = input;
  for (auto& [name, m] : modules_) x = m->forward(x, training);
  return x;
}

template <typename T>
TensorT<T> SequentialT<T>::backward(const TensorT<T>& grad_output) {
  TensorT<T> g = grad_output;
  for (auto it = modules_.rbegin(); it != modules_.rend(); ++it) g = it->second->backward(g);
  return g;
}

template <typename T>
void SequentialT<T>::collect_params(const std::string& prefix,
                                    std::vector<ParamRef<T>>& out) {
  for (auto& [name, m] : modules_)
    m->collect_params(prefix.empty() ? name : prefix + "." + name, out);
}

template <typename T>
void SequentialT<T>::collect_buffers(const std::string& prefix,
                                     std::vector<ParamRef<T>>& out) {
  for (auto& [name, m] : modules_)
    m->collect_buffers(prefix.empty() ? name : prefix + "." + name, out);
}

template <typename T>
TensorT<T> ResidualBlockT<T>::forward(const TensorT<T>& input, bool training) {
  TensorT<T> branch = branch_.forward(input, training);
  require(branch.shape == input.shape, ErrorCode::dimension,
          "residual branch changed the tensor shape");
  TensorT<T> out(input.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = input.data[i] + branch.data[i];
  return out;
}

template <typename T>
TensorT<T> ResidualBlockT<T>::backward(const TensorT<T>& grad_output) {
  TensorT<T> grad = branch_.backward(grad_output);
  for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] += grad_output.data[i];
  return grad;
}

template <typename T>
void ResidualBlockT<T>::collect_params(const std::string& prefix,
                                       std::vector<ParamRef<T>>& out) {
  branch_.collect_params(prefix, out);
}

template <typename T>
void ResidualBlockT<T>::collect_buffers(const std::string& prefix,
                                        std::vector<ParamRef<T>>& out) {
  branch_.collect_buffers(prefix, out);
}

// ---------------------------------------------------------------------------
// Losses

template <typename T>
T loss_mse(const TensorT<T>& pred, const std::vector<T>& target, T weight,
           TensorT<T>* pred_grad) {
  const std::size_t n = pred.element_count();
  require(target.size() == n, ErrorCode::dimension, "mse: target size mismatch");
  double acc = 0.0;
  const T scale = weight * static_cast<T>(2.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    T d = pred.data[i] - target[i];
    acc += static_cast<double>(d) * d;
    if (pred_grad) pred_grad->data[i] += scale * d;
  }
  return static_cast<T>(acc / static_cast<double>(n));
}

template <typename T>
T loss_l1(const TensorT<T>& pred, const TensorT<T>& target, T weight,
          TensorT<T>* pred_grad) {
  require(pred.shape == target.shape, ErrorCode::dimension, "l1: shape mismatch");
  const std::size_t n = pred.element_count();
  double acc = 0.0;
  const T scale = weight * static_cast<T>(1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    T d = pred.data[i] - target.data[i];
    acc += std::abs(static_cast<double>(d));
    if (pred_grad && d != T(0))
      pred_grad->data[i] += d > T(0) ? scale : -scale;
  }
  return static_cast<T>(acc / static_cast<double>(n));
}

namespace {

constexpr int kLossWindow = 11;

// 11x11 Gaussian window, sigma 1.5, normalized to sum 1 (computed in double).
template <typename T>
const std::vector<T>& loss_ssim_window() {
  static const std::vector<T> window = [] {
    std::vector<double> k(kLossWindow);
    double sum = 0.0;
    for (int i = 0; i < kLossWindow; ++i) {
      double d = i - (kLossWindow - 1) / 2.0;
      k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += k[i];
    }
    std::vector<T> w(kLossWindow * kLossWindow);
    for (int y = 0; y < kLossWindow; ++y)
      for (int x = 0; x < kLossWindow; ++x)
        w[y * kLossWindow + x] = static_cast<T>(k[y] * k[x] / (sum * sum));
    return w;
  }();
  return window;
}

}  // namespace

template <typename T>
T loss_ssim(const TensorT<T>& pred, const TensorT<T>& target, T weight,
            TensorT<T>* pred_grad) {
  require(pred.shape == target.shape, ErrorCode::dimension, "ssim loss: shape mismatch");
  check_rank4(pred.shape, "ssim loss");
  require(pred.dim(1) == 1, ErrorCode::dimension, "ssim loss expects single-channel maps");
  const int batch = pred.dim(0), h = pred.dim(2), w = pred.dim(3);
  require(h >= kLossWindow && w >= kLossWindow, ErrorCode::dimension,
          "ssim loss: patches must be at least 11x11");

  // Constants on the [0,1] dynamic range.
  const T c1 = static_cast<T>(0.01 * 0.01);
  const T c2 = static_cast<T>(0.03 * 0.03);
  const auto& win = loss_ssim_window<T>();

  const int wy_count = h - kLossWindow + 1;
  const int wx_count = w - kLossWindow + 1;
  const double window_total =
      static_cast<double>(batch) * wy_count * wx_count;

  double ssim_sum = 0.0;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int n = 0; n < batch; ++n) {
    const T* p = pred.data.data() + static_cast<std::size_t>(n) * plane;
    const T* t = target.data.data() + static_cast<std::size_t>(n) * plane;
    T* g = pred_grad ? pred_grad->data.data() + static_cast<std::size_t>(n) * plane
                     : nullptr;
    for (int wy = 0; wy < wy_count; ++wy) {
      for (int wx = 0; wx < wx_count; ++wx) {
        T mu_p = T(0), mu_t = T(0), m_pp = T(0), m_tt = T(0), m_pt = T(0);
        for (int y = 0; y < kLossWindow; ++y) {
          const T* pr = p + static_cast<std::size_t>(wy + y) * w + wx;
          const T* tr = t + static_cast<std::size_t>(wy + y) * w + wx;
          const T* wr = win.data() + y * kLossWindow;
          for (int x = 0; x < kLossWindow; ++x) {
            mu_p += wr[x] * pr[x];
            mu_t += wr[x] * tr[x];
            m_pp += wr[x] * pr[x] * pr[x];
            m_tt += wr[x] * tr[x] * tr[x];
            m_pt += wr[x] * pr[x] * tr[x];
          }
        }
        const T var_p = m_pp - mu_p * mu_p;
        const T var_t = m_tt - mu_t * mu_t;
        const T cov = m_pt - mu_p * mu_t;
        const T a1 = T(2) * mu_p * mu_t + c1;
        const T a2 = T(2) * cov + c2;
        const T b1 = mu_p * mu_p + mu_t * mu_t + c1;
        const T b2 = var_p + var_t + c2;
        const T d = b1 * b2;
        ssim_sum += static_cast<double>(a1 * a2 / d);

        if (g) {
          const T coef_t = T(2) * a1 / d;                   // multiplies (t_q - mu_t)
          const T coef_p = T(2) * a1 * a2 / (d * b2);       // multiplies (p_q - mu_p)
          const T coef_0 = T(2) * mu_t * a2 / d - T(2) * mu_p * a1 * a2 / (d * b1);
          const T base = coef_0 - coef_t * mu_t + coef_p * mu_p;
          // dL/dp_q = -1/W * sum_windows w(q) [base + coef_t*t_q - coef_p*p_q]
          const T scale = weight * static_cast<T>(-1.0 / window_total);
          for (int y = 0; y < kLossWindow; ++y) {
            T* gr = g + static_cast<std::size_t>(wy + y) * w + wx;
            const T* pr = p + static_cast<std::size_t>(wy + y) * w + wx;
            const T* tr = t + static_cast<std::size_t>(wy + y) * w + wx;
            const T* wr = win.data() + y * kLossWindow;
            for (int x = 0; x < kLossWindow; ++x)
              gr[x] += scale * wr[x] * (base + coef_t * tr[x] - coef_p * pr[x]);
          }
        }
      }
    }
  }
  return static_cast<T>(1.0 - ssim_sum / window_total);
}

template <typename T>
T loss_generator(const TensorT<T>& pred, const TensorT<T>& target, T alpha,
                 TensorT<T>* pred_grad) {
  require(alpha >= T(0) && alpha <= T(1), ErrorCode::invalid_arg,
          "alpha must lie in [0,1]");
  T total = T(0);
  if (alpha > T(0)) total += alpha * loss_ssim(pred, target, alpha, pred_grad);
  if (alpha < T(1))
    total += (T(1) - alpha) * loss_l1(pred, target, T(1) - alpha, pred_grad);
  return total;
}

// ---------------------------------------------------------------------------
// Adam

template <typename T>
void adam_step(std::vector<T>& param, const std::vector<T>& grad, std::vector<T>& m,
               std::vector<T>& v, long t, const AdamConfig& config) {
  require(param.size() == grad.size() && m.size() == param.size() &&
              v.size() == param.size(),
          ErrorCode::dimension, "adam: buffer size mismatch");
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    double g = grad[i];
    double mi = config.beta1 * m[i] + (1.0 - config.beta1) * g;
    double vi = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    param[i] -= static_cast<T>(config.learning_rate * (mi / bc1) /
                               (std::sqrt(vi / bc2) + config.epsilon));
  }
}

template <typename T>
void AdamT<T>::step(const std::vector<ParamRef<T>>& params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].tensor->data.size(), T(0));
      v_[i].assign(params[i].tensor->data.size(), T(0));
    }
  }
  require(m_.size() == params.size(), ErrorCode::state,
          "adam: parameter list changed between steps");
  ++step_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    TensorT<T>* t = params[i].tensor;
    t->ensure_grad();
    adam_step(t->data, t->grad, m_[i], v_[i], step_, config_);
  }
}

// ---------------------------------------------------------------------------
// Finite differences

template <typename T>
GradCheckReport finite_difference_check(const std::vector<ParamRef<T>>& tensors,
                                        const std::function<T()>& eval,
                                        const std::function<T()>& eval_backward,
                                        T step, int max_per_tensor) {
  eval_backward();
  std::vector<std::vector<T>> analytic;
  analytic.reserve(tensors.size());
  double grad_scale = 0.0;
  for (const auto& ref : tensors) {
    analytic.push_back(ref.tensor->grad);
    for (T g : ref.tensor->grad)
      grad_scale = std::max(grad_scale, std::abs(static_cast<double>(g)));
  }
  const double denom = std::max(grad_scale, 1e-6);

  GradCheckReport report;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    TensorT<T>* tensor = tensors[ti].tensor;
    const std::size_t count = tensor->data.size();
    std::size_t stride = 1;
    if (max_per_tensor > 0 && count > static_cast<std::size_t>(max_per_tensor))
      stride = count / static_cast<std::size_t>(max_per_tensor);
    for (std::size_t i = 0; i < count; i += stride) {
      const T old = tensor->data[i];
      tensor->data[i] = old + step;
      const double lp = eval();
      tensor->data[i] = old - step;
      const double lm = eval();
      tensor->data[i] = old;
      const double fd = (lp - lm) / (2.0 * static_cast<double>(step));
      const double err = std::abs(fd - static_cast<double>(analytic[ti][i])) / denom;
      ++report.checked;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = tensors[ti].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Layer sweep

namespace {

// Values bounded away from zero so ReLU kinks and L1 kinks sit farther than
// the finite-difference step.
template <typename T>
void fill_away_from_zero(std::vector<T>& data, CounterRng& rng) {
  for (T& v : data) {
    double u = rng.next_uniform(0.2, 1.2);
    v = static_cast<T>(rng.next_u64() & 1 ? u : -u);
  }
}

template <typename T>
GradCheckReport check_module(ModuleT<T>& module, TensorT<T> input,
                             std::vector<ParamRef<T>> params, CounterRng& rng, T step) {
  // scalar objective: fixed random projection of the output
  std::vector<T> projection;
  auto objective = [&](const TensorT<T>& out) {
    if (projection.empty()) {
      CounterRng proj_rng(rng.next_u64());
      projection.resize(out.data.size());
      for (T& v : projection) v = static_cast<T>(proj_rng.next_uniform(-1.0, 1.0));
    }
    T acc = T(0);
    for (std::size_t i = 0; i < out.data.size(); ++i) acc += out.data[i] * projection[i];
    return acc;
  };

  std::vector<ParamRef<T>> tensors = params;
  tensors.push_back({"input", &input});

  auto eval = [&]() { return objective(module.forward(input, true)); };
  auto eval_backward = [&]() {
    for (auto& p : params) {
      p.tensor->ensure_grad();
      p.tensor->zero_grad();
    }
    TensorT<T> out = module.forward(input, true);
    T loss = objective(out);
    TensorT<T> grad(out.shape);
    grad.data = projection;
    TensorT<T> gi = module.backward(grad);
    input.ensure_grad();
    input.grad = gi.data;
    return loss;
  };
  return finite_difference_check<T>(tensors, eval, eval_backward, step, 64);
}

template <typename T>
GradCheckReport check_loss(int kind, CounterRng& rng, T step) {
  const int h = 14, w = 14;
  TensorT<T> pred({1, 1, h, w});
  TensorT<T> target({1, 1, h, w});
  for (auto& v : pred.data) v = static_cast<T>(rng.next_uniform(0.1, 0.9));
  // keep |pred - target| above the step so the L1 kink is never straddled
  for (std::size_t i = 0; i < target.data.size(); ++i) {
    double off = rng.next_uniform(0.05, 0.3);
    target.data[i] = static_cast<T>(
        std::clamp(static_cast<double>(pred.data[i]) + (rng.next_u64() & 1 ? off : -off),
                   0.0, 1.0));
  }
  std::vector<T> scalar_target(pred.element_count());
  for (auto& v : scalar_target) v = static_cast<T>(rng.next_uniform(1.0, 5.0));

  auto loss_of = [&]() -> T {
    switch (kind) {
      case 0: return loss_mse(pred, scalar_target, T(1));
      case 1: return loss_l1(pred, target, T(1));
      case 2: return loss_ssim(pred, target, T(1));
      default: return loss_generator(pred, target, static_cast<T>(0.84));
    }
  };
  auto eval_backward = [&]() -> T {
    pred.ensure_grad();
    pred.zero_grad();
    TensorT<T> grad(pred.shape);
    T value;
    switch (kind) {
      case 0: value = loss_mse(pred, scalar_target, T(1), &grad); break;
      case 1: value = loss_l1(pred, target, T(1), &grad); break;
      case 2: value = loss_ssim(pred, target, T(1), &grad); break;
      default: value = loss_generator(pred, target, static_cast<T>(0.84), &grad); break;
    }
    pred.grad = grad.data;
    return value;
  };
  std::vector<ParamRef<T>> tensors = {{"pred", &pred}};
  return finite_difference_check<T>(tensors, loss_of, eval_backward, step, 64);
}

}  // namespace

template <typename T>
GradCheckReport layer_gradient_sweep(int configs, std::uint64_t seed, T step) {
  GradCheckReport worst;
  for (int c = 0; c < configs; ++c) {
    CounterRng rng(CounterRng::derive(seed, static_cast<std::uint64_t>(c)));
    GradCheckReport report;
    std::string label;
    switch (c % 10) {
      case 0: case 1: {  // conv with randomized geometry
        int in_c = 1 + static_cast<int>(rng.next_below(3));
        int out_c = 1 + static_cast<int>(rng.next_below(3));
        int kernel = rng.next_u64() & 1 ? 3 : 1;
        ConvGeometry geo;
        geo.stride = 1 + static_cast<int>(rng.next_below(2));
        geo.pad = static_cast<int>(rng.next_below(2));
        geo.dilation = kernel == 3 ? 1 + static_cast<int>(rng.next_below(2)) : 1;
        Conv2dT<T> conv(in_c, out_c, kernel, geo, rng);
        TensorT<T> input({2, in_c, 9, 9});
        fill_away_from_zero(input.data, rng);
        std::vector<ParamRef<T>> params;
        conv.collect_params("conv", params);
        report = check_module<T>(conv, std::move(input), std::move(params), rng, step);
        label = "conv";
        break;
      }
      case 2: {
        int channels = 1 + static_cast<int>(rng.next_below(3));
        BatchNorm2dT<T> bn(channels);
        for (auto& g : bn.gamma().data) g = static_cast<T>(rng.next_uniform(0.5, 1.5));
        for (auto& b : bn.beta().data) b = static_cast<T>(rng.next_uniform(-0.5, 0.5));
        TensorT<T> input({2, channels, 6, 6});
        fill_away_from_zero(input.data, rng);
        std::vector<ParamRef<T>> params;
        bn.collect_params("bn", params);
        report = check_module<T>(bn, std::move(input), std::move(params), rng, step);
        label = "batchnorm";
        break;
      }
      case 3: {
        ActivationT<T> relu(Activation::relu);
        TensorT<T> input({2, 2, 5, 5});
        fill_away_from_zero(input.data, rng);
        report = check_module<T>(relu, std::move(input), {}, rng, step);
        label = "relu";
        break;
      }
      case 4: {
        ActivationT<T> sigmoid(Activation::sigmoid);
        TensorT<T> input({2, 2, 5, 5});
        fill_away_from_zero(input.data, rng);
        report = check_module<T>(sigmoid, std::move(input), {}, rng, step);
        label = "sigmoid";
        break;
      }
      case 5: {
        GlobalAvgPoolT<T> gap;
        TensorT<T> input({2, 3, 6, 6});
        fill_away_from_zero(input.data, rng);
        report = check_module<T>(gap, std::move(input), {}, rng, step);
        label = "gap";
        break;
      }
      case 6: {
        int in_f = 2 + static_cast<int>(rng.next_below(6));
        int out_f = 1 + static_cast<int>(rng.next_below(4));
        LinearT<T> linear(in_f, out_f, rng);
        TensorT<T> input({3, in_f});
        fill_away_from_zero(input.data, rng);
        std::vector<ParamRef<T>> params;
        linear.collect_params("fc", params);
        report = check_module<T>(linear, std::move(input), std::move(params), rng, step);
        label = "linear";
        break;
      }
      case 7: report = check_loss<T>(0, rng, step); label = "loss_mse"; break;
      case 8: report = check_loss<T>(2, rng, step); label = "loss_ssim"; break;
      default: report = check_loss<T>(3, rng, step); label = "loss_generator"; break;
    }
    worst.checked += report.checked;
    if (report.max_rel_error > worst.max_rel_error) {
      worst.max_rel_error = report.max_rel_error;
      worst.worst_param = label + "#" + std::to_string(c) + ":" + report.worst_param;
    }
  }
  return worst;
}

template GradCheckReport layer_gradient_sweep<float>(int, std::uint64_t, float);
template GradCheckReport layer_gradient_sweep<double>(int, std::uint64_t, double);

// ---------------------------------------------------------------------------
// Explicit instantiations: float for training, double for verification.

#define UVQA_INSTANTIATE_NN(T)                                                        \
  template TensorT<T> conv2d<T>(const TensorT<T>&, const TensorT<T>&,                 \
                                const TensorT<T>&, const ConvGeometry&);              \
  template void conv2d_backward<T>(const TensorT<T>&, const TensorT<T>&,              \
                                   const ConvGeometry&, const TensorT<T>&,            \
                                   TensorT<T>*, TensorT<T>*, TensorT<T>*);            \
  template TensorT<T> concat_channels<T>(const TensorT<T>&, const TensorT<T>&);       \
  template void split_channels<T>(const TensorT<T>&, int, TensorT<T>*, TensorT<T>*);  \
  template class Conv2dT<T>;                                                          \
  template class BatchNorm2dT<T>;                                                     \
  template class ActivationT<T>;                                                      \
  template class GlobalAvgPoolT<T>;                                                   \
  template class LinearT<T>;                                                          \
  template class SequentialT<T>;                                                      \
  template class ResidualBlockT<T>;                                                   \
  template T loss_mse<T>(const TensorT<T>&, const std::vector<T>&, T, TensorT<T>*);   \
  template T loss_l1<T>(const TensorT<T>&, const TensorT<T>&, T, TensorT<T>*);        \
  template T loss_ssim<T>(const TensorT<T>&, const TensorT<T>&, T, TensorT<T>*);      \
  template T loss_generator<T>(const TensorT<T>&, const TensorT<T>&, T, TensorT<T>*); \
  template void adam_step<T>(std::vector<T>&, const std::vector<T>&, std::vector<T>&, \
                             std::vector<T>&, long, const AdamConfig&);               \
  template class AdamT<T>;                                                            \
  template GradCheckReport finite_difference_check<T>(                                \
      const std::vector<ParamRef<T>>&, const std::function<T()>&,                     \
      const std::function<T()>&, T, int);

UVQA_INSTANTIATE_NN(float)
UVQA_INSTANTIATE_NN(double)

#undef UVQA_INSTANTIATE_NN

}  // namespace uvqa
