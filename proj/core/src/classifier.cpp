#include "gosr/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "gosr/common.hpp"
#include "gosr/rng.hpp"
#include "gosr/sha256.hpp"

using nlohmann::json;

namespace gosr {

namespace {

void check_labels(const LabeledDataset& data, int num_classes) {
  std::set<int> seen;
  for (const auto& s : data.samples) {
    if (s.label < 0 || s.label >= num_classes)
      throw std::invalid_argument("train_classifier: label " + std::to_string(s.label) + " outside 0.." +
                                  std::to_string(num_classes - 1) + " (sample " + s.id + ")");
    seen.insert(s.label);
  }
  if (static_cast<int>(seen.size()) < 2)
    throw std::invalid_argument("train_classifier: need at least two classes present in the data");
}

Tensor batch_from_indices(const LabeledDataset& data, const std::vector<std::int64_t>& idx, std::size_t begin,
                          std::size_t end) {
  const auto& first = data.samples.front().image;
  std::vector<int> shape = {static_cast<int>(end - begin)};
  shape.insert(shape.end(), first.shape.begin(), first.shape.end());
  Tensor batch(shape);
  const std::int64_t stride = first.size();
  for (std::size_t i = begin; i < end; ++i) {
    const Tensor& img = data.samples[static_cast<std::size_t>(idx[i])].image;
    std::copy(img.data.begin(), img.data.end(),
              batch.data.begin() + static_cast<std::ptrdiff_t>((i - begin) * static_cast<std::size_t>(stride)));
  }
  return batch;
}

}  // namespace

Tensor stack_images(const LabeledDataset& data, const std::vector<std::int64_t>& indices) {
  if (data.empty()) throw std::invalid_argument("stack_images: empty dataset");
  std::vector<std::int64_t> idx = indices;
  if (idx.empty()) {
    idx.resize(data.size());
    std::iota(idx.begin(), idx.end(), 0);
  }
  return batch_from_indices(data, idx, 0, idx.size());
}

std::vector<int> collect_labels(const LabeledDataset& data, const std::vector<std::int64_t>& indices) {
  std::vector<int> out;
  if (indices.empty()) {
    out.reserve(data.size());
    for (const auto& s : data.samples) out.push_back(s.label);
  } else {
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(data.samples[static_cast<std::size_t>(i)].label);
  }
  return out;
}

ClassifierCheckpoint train_classifier(const LabeledDataset& train_data, const BackboneSpec& spec,
                                      const TrainHyper& hyper) {
  if (train_data.empty()) throw std::invalid_argument("train_classifier: empty dataset");
  if (static_cast<int>(train_data.class_ids.size()) != spec.num_classes)
    throw std::invalid_argument("train_classifier: dataset has " + std::to_string(train_data.class_ids.size()) +
                                " classes but spec.num_classes = " + std::to_string(spec.num_classes));
  check_labels(train_data, spec.num_classes);
  if (hyper.epochs < 0 || hyper.batch_size <= 0 || hyper.learning_rate <= 0.0)
    throw std::invalid_argument("train_classifier: bad hyperparameters");

  auto net = build_backbone(spec);

  Rng rng(hyper.seed);
  Rng holdout_rng = rng.fork(1);
  Rng shuffle_rng = rng.fork(2);

  // Seeded holdout for validation accuracy reporting.
  std::vector<std::int64_t> order(train_data.size());
  std::iota(order.begin(), order.end(), 0);
  holdout_rng.shuffle(order);
  std::size_t val_count = static_cast<std::size_t>(std::floor(hyper.val_fraction * static_cast<double>(order.size())));
  if (val_count >= order.size()) val_count = order.size() - 1;
  std::vector<std::int64_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(val_count));
  std::vector<std::int64_t> fit_idx(order.begin() + static_cast<std::ptrdiff_t>(val_count), order.end());
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(fit_idx.begin(), fit_idx.end());

  std::vector<Tensor> velocity = net->make_grad_store();
  std::vector<Tensor> grads = net->make_grad_store();
  double lr = hyper.learning_rate;

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    if (std::find(hyper.lr_decay_epochs.begin(), hyper.lr_decay_epochs.end(), epoch) != hyper.lr_decay_epochs.end())
      lr *= hyper.lr_decay;
    shuffle_rng.shuffle(fit_idx);
    for (std::size_t start = 0; start < fit_idx.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
      const std::size_t stop = std::min(fit_idx.size(), start + static_cast<std::size_t>(hyper.batch_size));
      Tensor batch = batch_from_indices(train_data, fit_idx, start, stop);
      std::vector<int> labels;
      labels.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i)
        labels.push_back(train_data.samples[static_cast<std::size_t>(fit_idx[i])].label);

      NetContext ctx;
      Tensor logits = net->forward(batch, ctx, true);
      Tensor dlogits;
      double loss = cross_entropy_loss(logits, labels, &dlogits);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_classifier: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch offset " + std::to_string(start));
      for (auto& g : grads) g.zero();
      net->backward(dlogits, ctx, grads);

      const auto& params = net->params();
      for (std::size_t p = 0; p < params.size(); ++p) {
        Tensor& v = velocity[p];
        Tensor& w = *params[p].tensor;
        const Tensor& g = grads[p];
        for (std::int64_t i = 0; i < w.size(); ++i) {
          v[i] = hyper.momentum * v[i] - lr * g[i];
          w[i] += v[i];
        }
      }
    }
  }

  ClassifierCheckpoint ckpt;
  ckpt.spec = spec;
  ckpt.meta.epochs = hyper.epochs;
  ckpt.meta.seed = hyper.seed;

  // Final metrics in eval mode over the original (unshuffled) index sets.
  {
    Tensor fit_logits = net->infer(batch_from_indices(train_data, fit_idx, 0, fit_idx.size()));
    std::vector<int> fit_labels;
    for (auto i : fit_idx) fit_labels.push_back(train_data.samples[static_cast<std::size_t>(i)].label);
    ckpt.meta.final_train_accuracy = argmax_accuracy(fit_logits, fit_labels);
    ckpt.meta.final_train_loss = cross_entropy_loss(fit_logits, fit_labels);
    if (!val_idx.empty()) {
      Tensor val_logits = net->infer(batch_from_indices(train_data, val_idx, 0, val_idx.size()));
      std::vector<int> val_labels;
      for (auto i : val_idx) val_labels.push_back(train_data.samples[static_cast<std::size_t>(i)].label);
      ckpt.meta.final_val_accuracy = argmax_accuracy(val_logits, val_labels);
    }
  }

  if (!train_data.label_mapping.empty()) ckpt.class_mapping = train_data.label_mapping;
  else
    for (int c : train_data.class_ids) ckpt.class_mapping[c] = c;

  ckpt.param_hash = sha256_hex(net->serialize());
  ckpt.net = std::shared_ptr<const Network>(std::move(net));
  return ckpt;
}

Tensor predict(const ClassifierCheckpoint& ckpt, const Tensor& images) {
  if (!ckpt.net) throw std::logic_error("predict: empty checkpoint");
  return softmax_rows(ckpt.net->infer(images));
}

std::vector<std::pair<std::string, std::vector<int>>> parameter_sets(const ClassifierCheckpoint& ckpt) {
  if (!ckpt.net) throw std::logic_error("parameter_sets: empty checkpoint");
  return ckpt.net->parameter_sets();
}

namespace {

json spec_to_json(const BackboneSpec& spec) {
  json j;
  j["architecture"] = spec.architecture;
  j["channels"] = spec.channels;
  j["height"] = spec.height;
  j["width"] = spec.width;
  j["num_classes"] = spec.num_classes;
  j["init_seed"] = spec.init_seed;
  j["mlp"] = {{"hidden", spec.mlp.hidden}, {"with_bias", spec.mlp.with_bias}};
  j["small_cnn"] = {{"conv1_channels", spec.small_cnn.conv1_channels},
                    {"conv2_channels", spec.small_cnn.conv2_channels},
                    {"fc_width", spec.small_cnn.fc_width}};
  return j;
}

BackboneSpec spec_from_json(const json& j) {
  BackboneSpec spec;
  spec.architecture = j.at("architecture").get<std::string>();
  spec.channels = j.at("channels").get<int>();
  spec.height = j.at("height").get<int>();
  spec.width = j.at("width").get<int>();
  spec.num_classes = j.at("num_classes").get<int>();
  spec.init_seed = j.at("init_seed").get<std::uint64_t>();
  if (j.contains("mlp")) {
    spec.mlp.hidden = j["mlp"].at("hidden").get<std::vector<int>>();
    spec.mlp.with_bias = j["mlp"].at("with_bias").get<bool>();
  }
  if (j.contains("small_cnn")) {
    spec.small_cnn.conv1_channels = j["small_cnn"].at("conv1_channels").get<int>();
    spec.small_cnn.conv2_channels = j["small_cnn"].at("conv2_channels").get<int>();
    spec.small_cnn.fc_width = j["small_cnn"].at("fc_width").get<int>();
  }
  return spec;
}

}  // namespace

std::string classifier_manifest_text(const ClassifierCheckpoint& ckpt) {
  json j;
  j["kind"] = "classifier_checkpoint";
  j["version"] = 1;
  j["backbone"] = spec_to_json(ckpt.spec);
  json sets = json::array();
  for (const auto& [name, shape] : ckpt.net->parameter_sets()) sets.push_back({{"name", name}, {"shape", shape}});
  j["parameter_sets"] = sets;
  j["num_parameter_sets"] = ckpt.net->num_param_sets();
  j["total_parameters"] = ckpt.net->total_parameters();
  json mapping = json::array();
  for (const auto& [orig, contiguous] : ckpt.class_mapping) mapping.push_back({{"original", orig}, {"mapped", contiguous}});
  j["class_mapping"] = mapping;
  j["training"] = {{"epochs", ckpt.meta.epochs},
                   {"seed", ckpt.meta.seed},
                   {"optimizer", ckpt.meta.optimizer},
                   {"final_train_loss", ckpt.meta.final_train_loss},
                   {"final_train_accuracy", ckpt.meta.final_train_accuracy},
                   {"final_val_accuracy", ckpt.meta.final_val_accuracy}};
  j["param_blob_sha256"] = ckpt.param_hash;
  return j.dump(2) + "\n";
}

void save_classifier(const ClassifierCheckpoint& ckpt, const std::filesystem::path& blob_path,
                     const std::filesystem::path& manifest_path) {
  if (!ckpt.net) throw std::logic_error("save_classifier: empty checkpoint");
  write_binary_file(blob_path, ckpt.net->serialize());
  write_text_file(manifest_path, classifier_manifest_text(ckpt));
}

ClassifierCheckpoint load_classifier(const std::filesystem::path& blob_path,
                                     const std::filesystem::path& manifest_path) {
  json j = json::parse(read_text_file(manifest_path));
  if (j.value("kind", "") != "classifier_checkpoint")
    throw std::runtime_error("not a classifier manifest: " + manifest_path.string());

  ClassifierCheckpoint ckpt;
  ckpt.spec = spec_from_json(j.at("backbone"));
  auto blob = read_binary_file(blob_path);
  const std::string expected = j.at("param_blob_sha256").get<std::string>();
  const std::string actual = sha256_hex(blob);
  if (actual != expected)
    throw std::runtime_error("classifier blob hash mismatch for " + blob_path.string() + " (manifest " + expected +
                             ", file " + actual + ")");
  auto net = build_backbone(ckpt.spec);
  net->deserialize(blob);
  ckpt.param_hash = actual;
  for (const auto& entry : j.at("class_mapping"))
    ckpt.class_mapping[entry.at("original").get<int>()] = entry.at("mapped").get<int>();
  const auto& t = j.at("training");
  ckpt.meta.epochs = t.at("epochs").get<int>();
  ckpt.meta.seed = t.at("seed").get<std::uint64_t>();
  ckpt.meta.optimizer = t.at("optimizer").get<std::string>();
  ckpt.meta.final_train_loss = t.at("final_train_loss").get<double>();
  ckpt.meta.final_train_accuracy = t.at("final_train_accuracy").get<double>();
  ckpt.meta.final_val_accuracy = t.at("final_val_accuracy").get<double>();
  ckpt.net = std::shared_ptr<const Network>(std::move(net));
  return ckpt;
}

}  // namespace gosr
