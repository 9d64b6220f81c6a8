#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gosr/backbones.hpp"
#include "gosr/dataset.hpp"
#include "gosr/network.hpp"

namespace gosr {

struct TrainHyper {
  int epochs = 5;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int batch_size = 32;
  double lr_decay = 0.1;
  std::vector<int> lr_decay_epochs;  // epochs (1-based) at which lr is multiplied by lr_decay
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct TrainingMeta {
  int epochs = 0;
  std::uint64_t seed = 0;
  double final_train_loss = 0.0;
  double final_train_accuracy = 0.0;
  double final_val_accuracy = 0.0;
  std::string optimizer = "sgd_momentum";
};

struct ClassifierCheckpoint {
  BackboneSpec spec;
  std::shared_ptr<const Network> net;  // immutable after training
  std::map<int, int> class_mapping;    // original id -> contiguous id
  TrainingMeta meta;
  std::string param_hash;  // sha256 of the serialized parameter blob

  int num_classes() const { return spec.num_classes; }
};

/// Supervised closed-set training. Labels must already be contiguous
/// 0..N-1 with N == spec.num_classes. Deterministic given the seed.
ClassifierCheckpoint train_classifier(const LabeledDataset& train_data, const BackboneSpec& spec,
                                      const TrainHyper& hyper);

/// Per-class probability rows {B,N} (softmax of the logits).
Tensor predict(const ClassifierCheckpoint& ckpt, const Tensor& images);

/// Ordered (name, shape) list; defines the gradient feature dimensions.
std::vector<std::pair<std::string, std::vector<int>>> parameter_sets(const ClassifierCheckpoint& ckpt);

/// Stacks dataset samples into a {B,C,H,W} batch (all samples when
/// indices is empty).
Tensor stack_images(const LabeledDataset& data, const std::vector<std::int64_t>& indices = {});
std::vector<int> collect_labels(const LabeledDataset& data, const std::vector<std::int64_t>& indices = {});

void save_classifier(const ClassifierCheckpoint& ckpt, const std::filesystem::path& blob_path,
                     const std::filesystem::path& manifest_path);
ClassifierCheckpoint load_classifier(const std::filesystem::path& blob_path,
                                     const std::filesystem::path& manifest_path);

/// Manifest JSON text for a checkpoint (deterministic serialization).
std::string classifier_manifest_text(const ClassifierCheckpoint& ckpt);

}  // namespace gosr
