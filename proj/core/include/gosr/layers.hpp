#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gosr/rng.hpp"
#include "gosr/tensor.hpp"

namespace gosr {

struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
};

/// Collects named parameter tensors in definition order and assigns each a
/// stable global index. The index order is the dimension order of gradient
/// representations, so it must never depend on anything but the
/// architecture definition.
class ParamRegistry {
 public:
  int add(const std::string& local_name, Tensor* tensor);
  void push_prefix(const std::string& prefix) { prefix_.push_back(prefix); }
  void pop_prefix() { prefix_.pop_back(); }
  const std::vector<ParamRef>& entries() const { return entries_; }

 private:
  std::string qualify(const std::string& local) const;
  std::vector<std::string> prefix_;
  std::vector<ParamRef> entries_;
};

using BufferRegistry = ParamRegistry;  // non-trainable state (e.g. running stats)

/// Per-layer state saved by forward for the matching backward call.
struct LayerContext {
  std::vector<Tensor> saved;
  std::vector<LayerContext> children;
  bool training = false;
};

/// Batched layer. Inputs and outputs carry a leading batch dimension.
/// forward(..., training=false) is pure and safe to call concurrently on a
/// shared layer; training=true may update internal buffers and is a single
/// logical thread of control.
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }

  virtual void register_params(ParamRegistry&) {}
  virtual void register_buffers(BufferRegistry&) {}
  virtual void init(Rng&) {}

  /// Per-sample output shape (no batch dimension).
  virtual std::vector<int> output_shape(const std::vector<int>& input) const = 0;

  virtual Tensor forward(const Tensor& x, LayerContext& ctx, bool training) const = 0;

  /// Accumulates parameter gradients into `grads` (indexed by the global
  /// parameter index assigned at registration) and returns the gradient
  /// with respect to x.
  virtual Tensor backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                          std::vector<Tensor>& grads) const = 0;

 protected:
  std::string name_;
};

class Dense : public Layer {
 public:
  Dense(std::string name, int in_features, int out_features, bool with_bias = true);

  void register_params(ParamRegistry& reg) override;
  void init(Rng& rng) override;
  std::vector<int> output_shape(const std::vector<int>& input) const override;
  Tensor forward(const Tensor& x, LayerContext& ctx, bool training) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                  std::vector<Tensor>& grads) const override;

 private:
  int in_, out_;
  bool with_bias_;
  Tensor weight_;  // {out,in}
  Tensor bias_;    // {out}
  int w_idx_ = -1, b_idx_ = -1;
};

class Conv2d : public Layer {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int pad,
         bool with_bias = true);

  void register_params(ParamRegistry& reg) override;
  void init(Rng& rng) override;
  std::vector<int> output_shape(const std::vector<int>& input) const override;
  Tensor forward(const Tensor& x, LayerContext& ctx, bool training) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                  std::vector<Tensor>& grads) const override;

 private:
  int in_ch_, out_ch_, k_, stride_, pad_;
  bool with_bias_;
  Tensor weight_;  // {out,in,k,k}
  Tensor bias_;    // {out}
  int w_idx_ = -1, b_idx_ = -1;
};

class ReLU : public Layer {
 public:
  explicit ReLU(std::string name) : Layer(std::move(name)) {}
  std::vector<int> output_shape(const std::vector<int>& input) const override { return input; }
  Tensor forward(const Tensor& x, LayerContext& ctx, bool training) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                  std::vector<Tensor>& grads) const override;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(std::string name, int kernel, int stride);
  std::vector<int> output_shape(const std::vector<int>& input) const override;
  Tensor forward(const Tensor& x, LayerContext& ctx, bool training) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                  std::vector<Tensor>& grads) const override;

 private:
  int k_, stride_;
};

class GlobalAvgPool : public Layer {
 public:
  explicit GlobalAvgPool(std::string name) : Layer(std::move(name)) {}
  std::vector<int> output_shape(const std::vector<int>& input) const override;
  Tensor forward(const Tensor& x, LayerContext& ctx, bool training) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                  std::vector<Tensor>& grads) const override;
};

class Flatten : public Layer {
 public:
  explicit Flatten(std::string name) : Layer(std::move(name)) {}
  std::vector<int> output_shape(const std::vector<int>& input) const override;
  Tensor forward(const Tensor& x, LayerContext& ctx, bool training) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                  std::vector<Tensor>& grads) const override;
};

/// Per-channel batch normalization over {B,C,H,W}. Training mode uses batch
/// statistics and updates the running buffers; eval mode is a fixed affine
/// map through the running statistics (pure, so gradients stay well defined
/// for single-sample extraction passes).
class BatchNorm2d : public Layer {
 public:
  BatchNorm2d(std::string name, int channels, double momentum = 0.1, double eps = 1e-5);

  void register_params(ParamRegistry& reg) override;
  void register_buffers(BufferRegistry& reg) override;
  void init(Rng& rng) override;
  std::vector<int> output_shape(const std::vector<int>& input) const override { return input; }
  Tensor forward(const Tensor& x, LayerContext& ctx, bool training) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                  std::vector<Tensor>& grads) const override;

 private:
  int channels_;
  double momentum_, eps_;
  Tensor gamma_, beta_;
  mutable Tensor running_mean_, running_var_;  // written only when training
  int g_idx_ = -1, b_idx_ = -1;
};

/// Two 3x3 conv+bn stages with a skip connection, 1x1 conv+bn downsample
/// when the shape changes.
class BasicBlock : public Layer {
 public:
  BasicBlock(std::string name, int in_channels, int out_channels, int stride);

  void register_params(ParamRegistry& reg) override;
  void register_buffers(BufferRegistry& reg) override;
  void init(Rng& rng) override;
  std::vector<int> output_shape(const std::vector<int>& input) const override;
  Tensor forward(const Tensor& x, LayerContext& ctx, bool training) const override;
  Tensor backward(const Tensor& x, const Tensor& grad_out, const LayerContext& ctx,
                  std::vector<Tensor>& grads) const override;

 private:
  bool has_downsample() const { return ds_conv_ != nullptr; }
  std::unique_ptr<Conv2d> conv1_, conv2_, ds_conv_;
  std::unique_ptr<BatchNorm2d> bn1_, bn2_, ds_bn_;
};

}  // namespace gosr
