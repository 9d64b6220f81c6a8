#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gosr/classifier.hpp"
#include "gosr/dataset.hpp"

namespace gosr {

/// Binary target vector of length N with n ones, n != 1. An ordinary
/// one-hot label is rejected; everything else in 0..N is allowed. For
/// 0 < n < N the ones occupy the lowest-index positions.
struct ConfoundingLabel {
  std::vector<double> values;
  int ones_count = 0;
  int size() const { return static_cast<int>(values.size()); }
};

ConfoundingLabel make_confounding_label(int num_classes, int ones_count);

/// One row of the gradient feature space: per parameter set, the squared
/// L2 norm of the loss gradient (unsquared norms available as an ablation).
struct GradientRepresentation {
  std::vector<double> features;
  std::string sample_ref;
  int ones_count = 0;
  std::string checkpoint_hash;
};

struct ExtractOptions {
  bool squared = true;  // squared L2 norms (default) or plain norms
  int workers = 1;      // batch extraction fan-out
};

/// Sigmoid-per-logit binary cross-entropy against the confounding label,
/// averaged over the N entries. Probabilities are clamped to
/// [1e-7, 1-1e-7] so the loss stays finite.
double confounding_loss(const Network& net, const Tensor& image, const ConfoundingLabel& label);

/// Backpropagates the confounding loss for one image and returns the
/// per-parameter-set gradient norms in parameter_sets order. Never
/// modifies the checkpoint.
GradientRepresentation extract_representation(const ClassifierCheckpoint& ckpt, const Tensor& image,
                                              const ConfoundingLabel& label, const ExtractOptions& options = {});

/// Central-difference estimate of the same representation, enumerating
/// every parameter. Verification tool: O(total parameters) forward passes,
/// so only viable for tiny models.
GradientRepresentation finite_difference_oracle(const ClassifierCheckpoint& ckpt, const Tensor& image,
                                                const ConfoundingLabel& label, double epsilon,
                                                const ExtractOptions& options = {});

struct FeatureProvenance {
  std::string checkpoint_hash;
  std::string split_hash;  // empty when no split is involved
  int ones_count = 0;
  int num_classes = 0;
  int num_sets = 0;
  bool squared = true;

  bool operator==(const FeatureProvenance&) const = default;
  std::string describe() const;
};

/// Rows of gradient representations over one dataset, all sharing one
/// checkpoint and one P.
struct FeatureTable {
  std::vector<std::string> sample_ids;
  std::vector<int> role_labels;            // 1 known, 0 unknown, -1 untagged
  std::vector<std::vector<double>> rows;   // row length = provenance.num_sets
  FeatureProvenance provenance;

  std::size_t size() const { return rows.size(); }
  int width() const { return provenance.num_sets; }
  bool has_roles() const;

  /// Mean of each feature over rows with the given role label.
  std::vector<double> role_mean(int role) const;
};

/// One row per sample in dataset order (independent single-sample backward
/// passes; fan-out preserves order). role_labels may be empty or one tag
/// per sample. When cache_path_base is given, "<base>.csv" and
/// "<base>.bin" are written, and an existing cache with matching
/// provenance is reused instead of recomputing.
FeatureTable extract_batch(const ClassifierCheckpoint& ckpt, const LabeledDataset& dataset,
                           const ConfoundingLabel& label, const std::vector<int>& role_labels = {},
                           const std::optional<std::filesystem::path>& cache_path_base = std::nullopt,
                           const ExtractOptions& options = {}, const std::string& split_hash = "");

// Cache files ---------------------------------------------------------------
// Text (CSV) is the interoperability contract; the binary twin is faster.

void save_feature_table_csv(const FeatureTable& table, const std::filesystem::path& path);
void save_feature_table_bin(const FeatureTable& table, const std::filesystem::path& path);
FeatureTable load_feature_table_csv(const std::filesystem::path& path);
FeatureTable load_feature_table_bin(const std::filesystem::path& path);

/// Loads a table and verifies its provenance; throws on mismatch instead
/// of returning stale features.
FeatureTable load_feature_table_checked(const std::filesystem::path& path, const FeatureProvenance& expected);

}  // namespace gosr
