#include "gosr/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace gosr {

namespace {

void expect_ndim(const Tensor& t, int ndim, const std::string& who) {
  if (t.ndim() != ndim)
    throw std::invalid_argument(who + ": expected " + std::to_string(ndim) + "-d input, got " + t.shape_str());
}

}  // namespace

int ParamRegistry::add(const std::string& local_name, Tensor* tensor) {
  entries_.push_back({qualify(local_name), tensor});
  return static_cast<int>(entries_.size()) - 1;
}

std::string ParamRegistry::qualify(const std::string& local) const {
  std::string full;
  for (const auto& p : prefix_) full += p + ".";
  return full + local;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::string name, int in_features, int out_features, bool with_bias)
    : Layer(std::move(name)), in_(in_features), out_(out_features), with_bias_(with_bias),
      weight_({out_features, in_features}), bias_({out_features}) {
  if (in_ <= 0 || out_ <= 0) throw std::invalid_argument("Dense: non-positive dimensions");
}

void Dense::register_params(ParamRegistry& reg) {
  w_idx_ = reg.add("weight", &weight_);
  if (with_bias_) b_idx_ = reg.add("bias", &bias_);
}

void Dense::init(Rng& rng) {
  const double std = std::sqrt(2.0 / in_);
  for (auto& w : weight_.data) w = std * rng.normal();
  bias_.zero();
}

std::vector<int> Dense::output_shape(const std::vector<int>& input) const {
  if (input.size() != 1 || input[0] != in_)
    throw std::invalid_argument("Dense " + name_ + ": input shape " + shape_to_string(input) + " != {" +
                                std::to_string(in_) + "}");
  return {out_};
}

Tensor Dense::forward(const Tensor& x, LayerContext&, bool) const {
  expect_ndim(x, 2, "Dense " + name_);
  const int batch = x.dim(0);
  Tensor y({batch, out_});
  for (int b = 0; b < batch; ++b) {
    const double* xb = x.data.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(in_);
    double* yb = y.data.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(out_);
    for (int o = 0; o < out_; ++o) {
      const double* wrow = weight_.data.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(in_);
      double acc = with_bias_ ? bias_[o] : 0.0;
      for (int i = 0; i < in_; ++i) acc += wrow[i] * xb[i];
      yb[o] = acc;
    }
  }
  return y;
}

Tensor Dense::backward(const Tensor& x, const Tensor& grad_out, const LayerContext&,
                       std::vector<Tensor>& grads) const {
  const int batch = x.dim(0);
  Tensor dx({batch, in_});
  Tensor& dw = grads[static_cast<std::size_t>(w_idx_)];
  for (int b = 0; b < batch; ++b) {
    const double* xb = x.data.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(in_);
    const double* gb = grad_out.data.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(out_);
    double* dxb = dx.data.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(in_);
    for (int o = 0; o < out_; ++o) {
      const double g = gb[o];
      if (g == 0.0) continue;
      const double* wrow = weight_.data.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(in_);
      double* dwrow = dw.data.data() + static_cast<std::size_t>(o) * static_cast<std::size_t>(in_);
      for (int i = 0; i < in_; ++i) {
        dwrow[i] += g * xb[i];
        dxb[i] += g * wrow[i];
      }
    }
    if (with_bias_) {
      Tensor& db = grads[static_cast<std::size_t>(b_idx_)];
      for (int o = 0; o < out_; ++o) db[o] += gb[o];
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int pad,
               bool with_bias)
    : Layer(std::move(name)), in_ch_(in_channels), out_ch_(out_channels), k_(kernel), stride_(stride),
      pad_(pad), with_bias_(with_bias), weight_({out_channels, in_channels, kernel, kernel}),
      bias_({out_channels}) {
  if (in_ch_ <= 0 || out_ch_ <= 0 || k_ <= 0 || stride_ <= 0 || pad_ < 0)
    throw std::invalid_argument("Conv2d: bad configuration");
}

void Conv2d::register_params(ParamRegistry& reg) {
  w_idx_ = reg.add("weight", &weight_);
  if (with_bias_) b_idx_ = reg.add("bias", &bias_);
}

void Conv2d::init(Rng& rng) {
  const double std = std::sqrt(2.0 / (in_ch_ * k_ * k_));
  for (auto& w : weight_.data) w = std * rng.normal();
  bias_.zero();
}

std::vector<int> Conv2d::output_shape(const std::vector<int>& input) const {
  if (input.size() != 3 || input[0] != in_ch_)
    throw std::invalid_argument("Conv2d " + name_ + ": input shape " + shape_to_string(input) +
                                " incompatible with in_channels " + std::to_string(in_ch_));
  const int oh = (input[1] + 2 * pad_ - k_) / stride_ + 1;
  const int ow = (input[2] + 2 * pad_ - k_) / stride_ + 1;
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("Conv2d " + name_ + ": output would be empty");
  return {out_ch_, oh, ow};
}

Tensor Conv2d::forward(const Tensor& x, LayerContext&, bool) const {
  expect_ndim(x, 4, "Conv2d " + name_);
  const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = (h + 2 * pad_ - k_) / stride_ + 1;
  const int ow = (w + 2 * pad_ - k_) / stride_ + 1;
  Tensor y({batch, out_ch_, oh, ow});

  for (int b = 0; b < batch; ++b) {
    const double* xb = x.data.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(in_ch_) * h * w;
    double* yb = y.data.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(out_ch_) * oh * ow;
    for (int oc = 0; oc < out_ch_; ++oc) {
      const double* wc = weight_.data.data() + static_cast<std::size_t>(oc) * static_cast<std::size_t>(in_ch_) * k_ * k_;
      const double b0 = with_bias_ ? bias_[oc] : 0.0;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double acc = b0;
          const int iy0 = oy * stride_ - pad_;
          const int ix0 = ox * stride_ - pad_;
          for (int ic = 0; ic < in_ch_; ++ic) {
            const double* xplane = xb + static_cast<std::size_t>(ic) * h * w;
            const double* wplane = wc + static_cast<std::size_t>(ic) * k_ * k_;
            for (int ky = 0; ky < k_; ++ky) {
              const int iy = iy0 + ky;
              if (iy < 0 || iy >= h) continue;
              const double* xrow = xplane + static_cast<std::size_t>(iy) * w;
              const double* wrow = wplane + static_cast<std::size_t>(ky) * k_;
              for (int kx = 0; kx < k_; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= w) continue;
                acc += wrow[kx] * xrow[ix];
              }
            }
          }
          yb[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox] = acc;
        }
      }
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& grad_out, const LayerContext&,
                        std::vector<Tensor>& grads) const {
  const int batch = x.dim(0), h = x.dim(2), w = x.dim(3);
  const int oh = grad_out.dim(2), ow = grad_out.dim(3);
  Tensor dx(x.shape);
  Tensor& dw = grads[static_cast<std::size_t>(w_idx_)];

  for (int b = 0; b < batch; ++b) {
    const double* xb = x.data.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(in_ch_) * h * w;
    double* dxb = dx.data.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(in_ch_) * h * w;
    const double* gb = grad_out.data.data() + static_cast<std::size_t>(b) * static_cast<std::size_t>(out_ch_) * oh * ow;
    for (int oc = 0; oc < out_ch_; ++oc) {
      const double* wc = weight_.data.data() + static_cast<std::size_t>(oc) * static_cast<std::size_t>(in_ch_) * k_ * k_;
      double* dwc = dw.data.data() + static_cast<std::size_t>(oc) * static_cast<std::size_t>(in_ch_) * k_ * k_;
      double bias_acc = 0.0;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const double g = gb[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox];
          if (g == 0.0) continue;
          bias_acc += g;
          const int iy0 = oy * stride_ - pad_;
          const int ix0 = ox * stride_ - pad_;
          for (int ic = 0; ic < in_ch_; ++ic) {
            const double* xplane = xb + static_cast<std::size_t>(ic) * h * w;
            double* dxplane = dxb + static_cast<std::size_t>(ic) * h * w;
            const double* wplane = wc + static_cast<std::size_t>(ic) * k_ * k_;
            double* dwplane = dwc + static_cast<std::size_t>(ic) * k_ * k_;
            for (int ky = 0; ky < k_; ++ky) {
              const int iy = iy0 + ky;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < k_; ++kx) {
                const int ix = ix0 + kx;
                if (ix < 0 || ix >= w) continue;
                const std::size_t xoff = static_cast<std::size_t>(iy) * w + static_cast<std::size_t>(ix);
                const std::size_t woff = static_cast<std::size_t>(ky) * k_ + static_cast<std::size_t>(kx);
                dwplane[woff] += g * xplane[xoff];
                dxplane[xoff] += g * wplane[woff];
              }
            }
          }
        }
      }
      if (with_bias_) grads[static_cast<std::size_t>(b_idx_)][oc] += bias_acc;
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// ReLU

Tensor ReLU::forward(const Tensor& x, LayerContext&, bool) const {
  Tensor y = x;
  for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor ReLU::backward(const Tensor& x, const Tensor& grad_out, const LayerContext&,
                      std::vector<Tensor>&) const {
  Tensor dx = grad_out;
  for (std::int64_t i = 0; i < dx.size(); ++i)
    if (x[i] <= 0.0) dx[i] = 0.0;
  return dx;
}

// ---------------------------------------------------------------------------
// MaxPool2d

MaxPool2d::MaxPool2d(std::string name, int kernel, int stride) : Layer(std::move(name)), k_(kernel), stride_(stride) {
  if (k_ <= 0 || stride_ <= 0) throw std::invalid_argument("MaxPool2d: bad configuration");
}

std::vector<int> MaxPool2d::output_shape(const std::vector<int>& input) const {
  if (input.size() != 3) throw std::invalid_argument("MaxPool2d " + name_ + ": expected {C,H,W} input");
  const int oh = (input[1] - k_) / stride_ + 1;
  const int ow = (input[2] - k_) / stride_ + 1;
  if (oh <= 0 || ow <= 0) throw std::invalid_argument("MaxPool2d " + name_ + ": output would be empty");
  return {input[0], oh, ow};
}

Tensor MaxPool2d::forward(const Tensor& x, LayerContext& ctx, bool) const {
  expect_ndim(x, 4, "MaxPool2d " + name_);
  const int batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = (h - k_) / stride_ + 1, ow = (w - k_) / stride_ + 1;
  Tensor y({batch, c, oh, ow});
  Tensor argmax({batch, c, oh, ow});  // linear offset into the input plane

  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double* xp = x.data.data() + (static_cast<std::size_t>(b) * c + ch) * h * w;
      double* yp = y.data.data() + (static_cast<std::size_t>(b) * c + ch) * oh * ow;
      double* ap = argmax.data.data() + (static_cast<std::size_t>(b) * c + ch) * oh * ow;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double best = -1e300;
          int best_off = 0;
          for (int ky = 0; ky < k_; ++ky)
            for (int kx = 0; kx < k_; ++kx) {
              const int iy = oy * stride_ + ky, ix = ox * stride_ + kx;
              const int off = iy * w + ix;
              if (xp[off] > best) {
                best = xp[off];
                best_off = off;
              }
            }
          yp[oy * ow + ox] = best;
          ap[oy * ow + ox] = best_off;
        }
    }
  ctx.saved = {std::move(argmax)};
  return y;
}

Tensor MaxPool2d::backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                           std::vector<Tensor>&) const {
  const Tensor& argmax = ctx.saved.at(0);
  const int batch = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::int64_t plane_out = grad_out.size() / (static_cast<std::int64_t>(batch) * c);
  Tensor dx(x.shape);
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      double* dxp = dx.data.data() + (static_cast<std::size_t>(b) * c + ch) * h * w;
      const double* gp = grad_out.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane_out;
      const double* ap = argmax.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane_out;
      for (std::int64_t i = 0; i < plane_out; ++i) dxp[static_cast<int>(ap[i])] += gp[i];
    }
  return dx;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool

std::vector<int> GlobalAvgPool::output_shape(const std::vector<int>& input) const {
  if (input.size() != 3) throw std::invalid_argument("GlobalAvgPool " + name_ + ": expected {C,H,W} input");
  return {input[0]};
}

Tensor GlobalAvgPool::forward(const Tensor& x, LayerContext&, bool) const {
  expect_ndim(x, 4, "GlobalAvgPool " + name_);
  const int batch = x.dim(0), c = x.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  Tensor y({batch, c});
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double* xp = x.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      double acc = 0.0;
      for (std::int64_t i = 0; i < plane; ++i) acc += xp[i];
      y[static_cast<std::int64_t>(b) * c + ch] = acc / static_cast<double>(plane);
    }
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& x, const Tensor& grad_out, const LayerContext&,
                               std::vector<Tensor>&) const {
  const int batch = x.dim(0), c = x.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  Tensor dx(x.shape);
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double g = grad_out[static_cast<std::int64_t>(b) * c + ch] / static_cast<double>(plane);
      double* dxp = dx.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      for (std::int64_t i = 0; i < plane; ++i) dxp[i] = g;
    }
  return dx;
}

// ---------------------------------------------------------------------------
// Flatten

std::vector<int> Flatten::output_shape(const std::vector<int>& input) const {
  int n = 1;
  for (int d : input) n *= d;
  return {n};
}

Tensor Flatten::forward(const Tensor& x, LayerContext&, bool) const {
  Tensor y = x;
  const int batch = x.dim(0);
  y.shape = {batch, static_cast<int>(x.size() / batch)};
  return y;
}

Tensor Flatten::backward(const Tensor& x, const Tensor& grad_out, const LayerContext&,
                         std::vector<Tensor>&) const {
  Tensor dx = grad_out;
  dx.shape = x.shape;
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, int channels, double momentum, double eps)
    : Layer(std::move(name)), channels_(channels), momentum_(momentum), eps_(eps), gamma_({channels}),
      beta_({channels}), running_mean_({channels}), running_var_({channels}) {
  if (channels_ <= 0) throw std::invalid_argument("BatchNorm2d: non-positive channel count");
}

void BatchNorm2d::register_params(ParamRegistry& reg) {
  g_idx_ = reg.add("gamma", &gamma_);
  b_idx_ = reg.add("beta", &beta_);
}

void BatchNorm2d::register_buffers(BufferRegistry& reg) {
  reg.add("running_mean", &running_mean_);
  reg.add("running_var", &running_var_);
}

void BatchNorm2d::init(Rng&) {
  gamma_.fill(1.0);
  beta_.zero();
  running_mean_.zero();
  running_var_.fill(1.0);
}

Tensor BatchNorm2d::forward(const Tensor& x, LayerContext& ctx, bool training) const {
  expect_ndim(x, 4, "BatchNorm2d " + name_);
  const int batch = x.dim(0), c = x.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  const std::int64_t per_channel = static_cast<std::int64_t>(batch) * plane;

  Tensor mean({c}), invstd({c});
  if (training) {
    for (int ch = 0; ch < c; ++ch) {
      double m = 0.0;
      for (int b = 0; b < batch; ++b) {
        const double* xp = x.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::int64_t i = 0; i < plane; ++i) m += xp[i];
      }
      m /= static_cast<double>(per_channel);
      double v = 0.0;
      for (int b = 0; b < batch; ++b) {
        const double* xp = x.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
          const double d = xp[i] - m;
          v += d * d;
        }
      }
      v /= static_cast<double>(per_channel);
      mean[ch] = m;
      invstd[ch] = 1.0 / std::sqrt(v + eps_);
      running_mean_[ch] = (1.0 - momentum_) * running_mean_[ch] + momentum_ * m;
      running_var_[ch] = (1.0 - momentum_) * running_var_[ch] + momentum_ * v;
    }
  } else {
    for (int ch = 0; ch < c; ++ch) {
      mean[ch] = running_mean_[ch];
      invstd[ch] = 1.0 / std::sqrt(running_var_[ch] + eps_);
    }
  }

  Tensor y(x.shape);
  Tensor xhat(x.shape);
  for (int b = 0; b < batch; ++b)
    for (int ch = 0; ch < c; ++ch) {
      const double m = mean[ch], is = invstd[ch], g = gamma_[ch], bt = beta_[ch];
      const double* xp = x.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      double* hp = xhat.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      double* yp = y.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        const double h = (xp[i] - m) * is;
        hp[i] = h;
        yp[i] = g * h + bt;
      }
    }
  ctx.training = training;
  ctx.saved = {std::move(xhat), std::move(invstd)};
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                             std::vector<Tensor>& grads) const {
  const Tensor& xhat = ctx.saved.at(0);
  const Tensor& invstd = ctx.saved.at(1);
  const int batch = x.dim(0), c = x.dim(1);
  const std::int64_t plane = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  const double m_count = static_cast<double>(static_cast<std::int64_t>(batch) * plane);

  Tensor& dgamma = grads[static_cast<std::size_t>(g_idx_)];
  Tensor& dbeta = grads[static_cast<std::size_t>(b_idx_)];
  Tensor dx(x.shape);

  for (int ch = 0; ch < c; ++ch) {
    double sum_g = 0.0, sum_gh = 0.0;
    for (int b = 0; b < batch; ++b) {
      const double* gp = grad_out.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      const double* hp = xhat.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
      for (std::int64_t i = 0; i < plane; ++i) {
        sum_g += gp[i];
        sum_gh += gp[i] * hp[i];
      }
    }
    dgamma[ch] += sum_gh;
    dbeta[ch] += sum_g;

    const double g = gamma_[ch], is = invstd[ch];
    if (ctx.training) {
      // d/dx of batch-statistics normalization.
      for (int b = 0; b < batch; ++b) {
        const double* gp = grad_out.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        const double* hp = xhat.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        double* dxp = dx.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::int64_t i = 0; i < plane; ++i)
          dxp[i] = g * is / m_count * (m_count * gp[i] - sum_g - hp[i] * sum_gh);
      }
    } else {
      // Eval mode is an affine map with frozen statistics.
      for (int b = 0; b < batch; ++b) {
        const double* gp = grad_out.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        double* dxp = dx.data.data() + (static_cast<std::size_t>(b) * c + ch) * plane;
        for (std::int64_t i = 0; i < plane; ++i) dxp[i] = g * is * gp[i];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// BasicBlock

BasicBlock::BasicBlock(std::string name, int in_channels, int out_channels, int stride)
    : Layer(std::move(name)) {
  conv1_ = std::make_unique<Conv2d>("conv1", in_channels, out_channels, 3, stride, 1, false);
  bn1_ = std::make_unique<BatchNorm2d>("bn1", out_channels);
  conv2_ = std::make_unique<Conv2d>("conv2", out_channels, out_channels, 3, 1, 1, false);
  bn2_ = std::make_unique<BatchNorm2d>("bn2", out_channels);
  if (stride != 1 || in_channels != out_channels) {
    ds_conv_ = std::make_unique<Conv2d>("downsample", in_channels, out_channels, 1, stride, 0, false);
    ds_bn_ = std::make_unique<BatchNorm2d>("downsample_bn", out_channels);
  }
}

void BasicBlock::register_params(ParamRegistry& reg) {
  auto sub = [&reg](Layer& l) {
    reg.push_prefix(l.name());
    l.register_params(reg);
    reg.pop_prefix();
  };
  sub(*conv1_);
  sub(*bn1_);
  sub(*conv2_);
  sub(*bn2_);
  if (has_downsample()) {
    sub(*ds_conv_);
    sub(*ds_bn_);
  }
}

void BasicBlock::register_buffers(BufferRegistry& reg) {
  auto sub = [&reg](Layer& l) {
    reg.push_prefix(l.name());
    l.register_buffers(reg);
    reg.pop_prefix();
  };
  sub(*bn1_);
  sub(*bn2_);
  if (has_downsample()) sub(*ds_bn_);
}

void BasicBlock::init(Rng& rng) {
  conv1_->init(rng);
  bn1_->init(rng);
  conv2_->init(rng);
  bn2_->init(rng);
  if (has_downsample()) {
    ds_conv_->init(rng);
    ds_bn_->init(rng);
  }
}

std::vector<int> BasicBlock::output_shape(const std::vector<int>& input) const {
  auto shape = bn1_->output_shape(conv1_->output_shape(input));
  shape = bn2_->output_shape(conv2_->output_shape(shape));
  if (has_downsample()) {
    auto skip = ds_bn_->output_shape(ds_conv_->output_shape(input));
    if (skip != shape) throw std::logic_error("BasicBlock " + name_ + ": branch shapes disagree");
  }
  return shape;
}

Tensor BasicBlock::forward(const Tensor& x, LayerContext& ctx, bool training) const {
  ctx.children.assign(6, LayerContext{});
  Tensor a = conv1_->forward(x, ctx.children[0], training);
  Tensor pre1 = bn1_->forward(a, ctx.children[1], training);
  Tensor c = pre1;
  for (auto& v : c.data) v = v > 0.0 ? v : 0.0;
  Tensor d = conv2_->forward(c, ctx.children[2], training);
  Tensor e = bn2_->forward(d, ctx.children[3], training);

  Tensor skip;
  Tensor f;
  if (has_downsample()) {
    f = ds_conv_->forward(x, ctx.children[4], training);
    skip = ds_bn_->forward(f, ctx.children[5], training);
  } else {
    skip = x;
  }

  Tensor sum = e;
  for (std::int64_t i = 0; i < sum.size(); ++i) sum[i] += skip[i];
  Tensor y = sum;
  for (auto& v : y.data) v = v > 0.0 ? v : 0.0;

  ctx.saved = {std::move(a), std::move(pre1), std::move(c), std::move(d), std::move(sum)};
  if (has_downsample()) ctx.saved.push_back(std::move(f));
  return y;
}

Tensor BasicBlock::backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                            std::vector<Tensor>& grads) const {
  const Tensor& a = ctx.saved.at(0);
  const Tensor& pre1 = ctx.saved.at(1);
  const Tensor& c = ctx.saved.at(2);
  const Tensor& d = ctx.saved.at(3);
  const Tensor& sum = ctx.saved.at(4);

  Tensor dsum = grad_out;
  for (std::int64_t i = 0; i < dsum.size(); ++i)
    if (sum[i] <= 0.0) dsum[i] = 0.0;

  Tensor dd = bn2_->backward(d, dsum, ctx.children[3], grads);
  Tensor dc = conv2_->backward(c, dd, ctx.children[2], grads);
  for (std::int64_t i = 0; i < dc.size(); ++i)
    if (pre1[i] <= 0.0) dc[i] = 0.0;
  Tensor da = bn1_->backward(a, dc, ctx.children[1], grads);
  Tensor dx = conv1_->backward(x, da, ctx.children[0], grads);

  if (has_downsample()) {
    const Tensor& f = ctx.saved.at(5);
    Tensor df = ds_bn_->backward(f, dsum, ctx.children[5], grads);
    Tensor dskip = ds_conv_->backward(x, df, ctx.children[4], grads);
    for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] += dskip[i];
  } else {
    for (std::int64_t i = 0; i < dx.size(); ++i) dx[i] += dsum[i];
  }
  return dx;
}

}  // namespace gosr
