#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gosr/gradient.hpp"
#include "gosr/tensor.hpp"

namespace gosr {

/// Per-dimension feature standardization. Gradient norms span orders of
/// magnitude, so the default applies log(1+x) before z-scoring; "none"
/// keeps the raw features (ablation path).
struct Standardizer {
  std::string kind = "log1p_zscore";  // log1p_zscore | zscore | none
  std::vector<double> shift;
  std::vector<double> scale;  // strictly positive; zero-variance dims get 1

  int width() const { return static_cast<int>(shift.size()); }
  std::vector<double> apply(const std::vector<double>& features) const;
};

Standardizer fit_standardizer(const std::vector<std::vector<double>>& rows, const std::string& kind = "log1p_zscore");
Standardizer fit_standardizer(const FeatureTable& table, const std::string& kind = "log1p_zscore");

struct DetectorHyper {
  int hidden_width = 64;
  int epochs = 60;
  double learning_rate = 0.05;
  double momentum = 0.9;
  int batch_size = 32;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;
  std::string standardize = "log1p_zscore";
};

struct DetectorMeta {
  std::uint64_t seed = 0;
  int epochs = 0;
  double val_accuracy = 0.0;
  double val_auroc = 0.0;
  std::int64_t known_rows = 0;
  std::int64_t unknown_rows = 0;
  std::string feature_checkpoint_hash;  // checkpoint that produced training features
  std::string test_checkpoint_hash;     // checkpoint the detector is meant to score against
  int ones_count = 0;    // concrete n used for the training features
  int ones_policy = -1;  // -1: n tracks the classifier's N; >= 0: fixed n
  bool squared = true;   // feature convention the detector was trained on
};

/// Two fully-connected layers over standardized gradient features. The
/// sigmoid output is a known-score in [0,1]; the positive class is
/// "known". feature_indices selects which of the P input dimensions the
/// detector consumes (empty = all); dimensions whose parameter shapes
/// differ between the feature-producing and the test-time classifier are
/// excluded there by the pipeline.
struct DetectorCheckpoint {
  Standardizer standardizer;
  Tensor w1, b1;  // {H,D}, {H}
  Tensor w2, b2;  // {1,H}, {1}
  double threshold = 0.5;
  int full_width = 0;                // P of the source feature space
  std::vector<int> feature_indices;  // ascending subset of 0..P-1; empty = all
  DetectorMeta meta;

  int input_width() const { return feature_indices.empty() ? full_width : static_cast<int>(feature_indices.size()); }
  std::vector<double> select(const std::vector<double>& features) const;
};

DetectorCheckpoint train_detector(const FeatureTable& known_rows, const FeatureTable& unknown_rows,
                                  const DetectorHyper& hyper, std::vector<int> feature_indices = {});

/// Known-score in [0,1] for one full-width feature vector.
double score(const DetectorCheckpoint& det, const std::vector<double>& features);
double score(const DetectorCheckpoint& det, const GradientRepresentation& rep);

/// Threshold rule: known iff score >= tau (boundary counts as known).
bool decide_known(double known_score, double tau);

void save_detector(const DetectorCheckpoint& det, const std::filesystem::path& blob_path,
                   const std::filesystem::path& manifest_path);
DetectorCheckpoint load_detector(const std::filesystem::path& blob_path,
                                 const std::filesystem::path& manifest_path);

}  // namespace gosr
