#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gosr/layers.hpp"

namespace gosr {

struct NetContext {
  Tensor input_batch;                    // copy of the batch forward consumed
  std::vector<Tensor> activations;       // activations[i] = output of layer i
  std::vector<LayerContext> layer_ctx;
};

/// A sequential stack of layers with a flat, ordered parameter-set list.
/// Parameters are registered in definition order; that order is the
/// contract for everything downstream (gradient features, checkpoints).
class Network {
 public:
  Network() = default;
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  void add(std::unique_ptr<Layer> layer);

  /// Registers parameters/buffers and computes the shape chain. Must be
  /// called exactly once, after all layers are added.
  void finalize(std::vector<int> input_shape);

  void init_params(std::uint64_t seed);

  const std::vector<ParamRef>& params() const { return params_; }
  const std::vector<ParamRef>& buffers() const { return buffers_; }
  int num_param_sets() const { return static_cast<int>(params_.size()); }
  std::int64_t total_parameters() const;
  std::vector<std::pair<std::string, std::vector<int>>> parameter_sets() const;

  const std::vector<int>& input_shape() const { return input_shape_; }
  const std::vector<int>& output_shape() const { return output_shape_; }

  /// Forward over a batch {B, ...}. training=false is pure; training=true
  /// may update layer buffers and must not run concurrently.
  Tensor forward(const Tensor& batch, NetContext& ctx, bool training) const;

  /// Backpropagates d(loss)/d(logits), accumulating into param_grads
  /// (which must have one zeroed tensor per parameter set).
  void backward(const Tensor& grad_logits, const NetContext& ctx, std::vector<Tensor>& param_grads) const;

  Tensor infer(const Tensor& batch) const;

  std::vector<Tensor> make_grad_store() const;

  /// Parameter + buffer blob (versioned, little-endian).
  std::vector<std::uint8_t> serialize() const;
  void deserialize(const std::vector<std::uint8_t>& blob);

 private:
  void check_batch(const Tensor& batch) const;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<ParamRef> params_;
  std::vector<ParamRef> buffers_;
  std::vector<int> input_shape_;
  std::vector<int> output_shape_;
  bool finalized_ = false;
};

// Classification loss heads -------------------------------------------------

/// Row-wise softmax of logits {B,N}.
Tensor softmax_rows(const Tensor& logits);

/// Mean cross-entropy over the batch; fills dlogits with the gradient.
double cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits = nullptr);

/// Fraction of rows whose argmax equals the label.
double argmax_accuracy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace gosr
