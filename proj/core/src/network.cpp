#include "gosr/network.hpp"

#include <cmath>
#include <stdexcept>

#include "gosr/common.hpp"

namespace gosr {

namespace {
constexpr std::uint32_t kBlobMagic = 0x47534E31;  // "GSN1"
}

void Network::add(std::unique_ptr<Layer> layer) {
  if (finalized_) throw std::logic_error("Network::add after finalize");
  layers_.push_back(std::move(layer));
}

void Network::finalize(std::vector<int> input_shape) {
  if (finalized_) throw std::logic_error("Network::finalize called twice");
  if (layers_.empty()) throw std::logic_error("Network::finalize on empty network");
  input_shape_ = std::move(input_shape);

  ParamRegistry params, buffers;
  std::vector<int> shape = input_shape_;
  for (auto& layer : layers_) {
    params.push_prefix(layer->name());
    layer->register_params(params);
    params.pop_prefix();
    buffers.push_prefix(layer->name());
    layer->register_buffers(buffers);
    buffers.pop_prefix();
    shape = layer->output_shape(shape);
  }
  params_ = params.entries();
  buffers_ = buffers.entries();
  output_shape_ = shape;
  finalized_ = true;
}

void Network::init_params(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& layer : layers_) layer->init(rng);
}

std::int64_t Network::total_parameters() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.tensor->size();
  return n;
}

std::vector<std::pair<std::string, std::vector<int>>> Network::parameter_sets() const {
  std::vector<std::pair<std::string, std::vector<int>>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.name, p.tensor->shape);
  return out;
}

void Network::check_batch(const Tensor& batch) const {
  if (batch.ndim() != static_cast<int>(input_shape_.size()) + 1)
    throw std::invalid_argument("network input must be a batch over " + shape_to_string(input_shape_) +
                                ", got " + batch.shape_str());
  for (std::size_t i = 0; i < input_shape_.size(); ++i)
    if (batch.dim(static_cast<int>(i) + 1) != input_shape_[i])
      throw std::invalid_argument("network input shape mismatch: expected per-sample " +
                                  shape_to_string(input_shape_) + ", got batch " + batch.shape_str());
}

Tensor Network::forward(const Tensor& batch, NetContext& ctx, bool training) const {
  if (!finalized_) throw std::logic_error("Network::forward before finalize");
  check_batch(batch);
  ctx.input_batch = batch;
  ctx.activations.clear();
  ctx.activations.reserve(layers_.size());
  ctx.layer_ctx.assign(layers_.size(), LayerContext{});
  const Tensor* current = &ctx.input_batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    ctx.activations.push_back(layers_[i]->forward(*current, ctx.layer_ctx[i], training));
    current = &ctx.activations.back();
  }
  return ctx.activations.back();
}

void Network::backward(const Tensor& grad_logits, const NetContext& ctx, std::vector<Tensor>& param_grads) const {
  if (ctx.activations.size() != layers_.size())
    throw std::logic_error("Network::backward without a matching forward");
  if (param_grads.size() != params_.size())
    throw std::logic_error("Network::backward: grad store has wrong size");

  Tensor grad = grad_logits;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const Tensor& input = i == 0 ? ctx.input_batch : ctx.activations[i - 1];
    grad = layers_[i]->backward(input, grad, ctx.layer_ctx[i], param_grads);
  }
}

Tensor Network::infer(const Tensor& batch) const {
  NetContext ctx;
  return forward(batch, ctx, false);
}

std::vector<Tensor> Network::make_grad_store() const {
  std::vector<Tensor> grads;
  grads.reserve(params_.size());
  for (const auto& p : params_) grads.emplace_back(p.tensor->shape);
  return grads;
}

std::vector<std::uint8_t> Network::serialize() const {
  BinWriter w;
  w.u32(kBlobMagic);
  w.u32(1);  // version
  auto write_group = [&w](const std::vector<ParamRef>& group) {
    w.u64(group.size());
    for (const auto& p : group) {
      w.str(p.name);
      w.ints(p.tensor->shape);
      w.doubles(p.tensor->data);
    }
  };
  write_group(params_);
  write_group(buffers_);
  return w.bytes();
}

void Network::deserialize(const std::vector<std::uint8_t>& blob) {
  BinReader r(blob);
  if (r.u32() != kBlobMagic) throw std::runtime_error("parameter blob: bad magic");
  if (r.u32() != 1) throw std::runtime_error("parameter blob: unsupported version");
  auto read_group = [&r](const std::vector<ParamRef>& group, const char* what) {
    std::uint64_t n = r.u64();
    if (n != group.size())
      throw std::runtime_error(std::string("parameter blob: ") + what + " count mismatch");
    for (const auto& p : group) {
      std::string name = r.str();
      std::vector<int> shape = r.ints();
      std::vector<double> data = r.doubles();
      if (name != p.name || shape != p.tensor->shape)
        throw std::runtime_error("parameter blob does not match architecture at " + p.name);
      if (static_cast<std::int64_t>(data.size()) != p.tensor->size())
        throw std::runtime_error("parameter blob: bad payload for " + p.name);
      p.tensor->data = std::move(data);
    }
  };
  read_group(params_, "parameter");
  read_group(buffers_, "buffer");
  if (!r.at_end()) throw std::runtime_error("parameter blob: trailing bytes");
}

// ---------------------------------------------------------------------------

Tensor softmax_rows(const Tensor& logits) {
  if (logits.ndim() != 2) throw std::invalid_argument("softmax_rows: expected {B,N}");
  const int batch = logits.dim(0), n = logits.dim(1);
  Tensor probs(logits.shape);
  for (int b = 0; b < batch; ++b) {
    const double* z = logits.data.data() + static_cast<std::size_t>(b) * n;
    double* p = probs.data.data() + static_cast<std::size_t>(b) * n;
    double zmax = z[0];
    for (int i = 1; i < n; ++i) zmax = std::max(zmax, z[i]);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      p[i] = std::exp(z[i] - zmax);
      sum += p[i];
    }
    for (int i = 0; i < n; ++i) p[i] /= sum;
  }
  return probs;
}

double cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels, Tensor* dlogits) {
  const int batch = logits.dim(0), n = logits.dim(1);
  if (static_cast<int>(labels.size()) != batch)
    throw std::invalid_argument("cross_entropy_loss: label count mismatch");
  Tensor probs = softmax_rows(logits);
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= n) throw std::invalid_argument("cross_entropy_loss: label out of range");
    loss -= std::log(std::max(probs[static_cast<std::int64_t>(b) * n + y], 1e-300));
  }
  loss /= batch;
  if (dlogits) {
    *dlogits = probs;
    for (int b = 0; b < batch; ++b) {
      const int y = labels[static_cast<std::size_t>(b)];
      (*dlogits)[static_cast<std::int64_t>(b) * n + y] -= 1.0;
    }
    for (auto& v : dlogits->data) v /= batch;
  }
  return loss;
}

double argmax_accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const int batch = logits.dim(0), n = logits.dim(1);
  if (static_cast<int>(labels.size()) != batch)
    throw std::invalid_argument("argmax_accuracy: label count mismatch");
  int correct = 0;
  for (int b = 0; b < batch; ++b) {
    const double* z = logits.data.data() + static_cast<std::size_t>(b) * n;
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (z[i] > z[best]) best = i;
    if (best == labels[static_cast<std::size_t>(b)]) ++correct;
  }
  return batch == 0 ? 0.0 : static_cast<double>(correct) / batch;
}

}  // namespace gosr
