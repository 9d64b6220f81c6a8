#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gosr/classifier.hpp"
#include "gosr/dataset.hpp"
#include "gosr/detector.hpp"
#include "gosr/metrics.hpp"

namespace gosr {

/// Final recognition outcome for one image. final_class lives in 0..N
/// where class N is the unknown sentinel; the closed-set prediction is
/// preserved exactly when the known-score clears the threshold.
struct OpenSetPrediction {
  int final_class = 0;
  int closed_set_class = 0;
  double known_score = 0.0;
  double threshold_used = 0.5;
};

/// The two-case routing rule: keep the closed-set class when the score
/// says known (score >= tau), otherwise emit the sentinel.
int route_final_class(int closed_set_class, double known_score, double tau, int sentinel);

/// Pluggable source of known-scores, so detector scores, softmax-baseline
/// scores, and constant stubs run through identical routing and metrics.
class KnownScorer {
 public:
  virtual ~KnownScorer() = default;
  virtual std::string name() const = 0;
  virtual double score_sample(const ClassifierCheckpoint& ckpt, const Tensor& image,
                              const std::vector<double>& probs_row) const = 0;
};

class DetectorScorer : public KnownScorer {
 public:
  DetectorScorer(const DetectorCheckpoint& det, int num_classes);
  std::string name() const override { return "gradient_detector"; }
  double score_sample(const ClassifierCheckpoint& ckpt, const Tensor& image,
                      const std::vector<double>& probs_row) const override;

 private:
  const DetectorCheckpoint& det_;
  ConfoundingLabel label_;
  ExtractOptions options_;
};

class SoftmaxScorer : public KnownScorer {
 public:
  std::string name() const override { return "softmax"; }
  double score_sample(const ClassifierCheckpoint&, const Tensor&,
                      const std::vector<double>& probs_row) const override;
};

class ConstScorer : public KnownScorer {
 public:
  explicit ConstScorer(double value) : value_(value) {}
  std::string name() const override { return "const"; }
  double score_sample(const ClassifierCheckpoint&, const Tensor&, const std::vector<double>&) const override {
    return value_;
  }

 private:
  double value_;
};

/// Routes a batch through classifier + detector. Refuses a detector whose
/// recorded test-time classifier hash differs from the given checkpoint.
std::vector<OpenSetPrediction> open_set_predict(const ClassifierCheckpoint& ckpt, const DetectorCheckpoint& det,
                                                double tau, const Tensor& images);

/// Same routing with an arbitrary score source (no provenance check).
std::vector<OpenSetPrediction> open_set_predict_with(const ClassifierCheckpoint& ckpt, const KnownScorer& scorer,
                                                     double tau, const Tensor& images);

// Experiment configuration ---------------------------------------------------

struct ExperimentConfig {
  std::string mode = "identification";  // identification | classification
  DataSourceSpec train_source;
  DataSourceSpec test_source;
  std::optional<DataSourceSpec> outlier_source;  // classification mode

  int num_known = 6;
  int num_inner_known = 4;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};

  BackboneSpec backbone;       // init_seed is overridden per stage seed
  TrainHyper classifier_hyper;
  DetectorHyper detector_hyper;

  int ones_count = -1;  // -1 means n = N (all ones)
  bool squared = true;

  double tau = 0.5;
  std::string ratio;  // e.g. "1:1"; empty = keep full test sets
  std::vector<std::string> baselines = {"softmax"};
  int workers = 1;

  void validate() const;
  /// Canonical JSON echo; hashing this pins the run directory.
  std::string to_json_text() const;
  static ExperimentConfig from_json_text(const std::string& text);
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;

  double auroc = 0.0;
  double openset_accuracy = 0.0;
  double closed_set_accuracy = 0.0;   // classifier accuracy on known test samples
  double always_known_accuracy = 0.0;  // stub baseline on the same testbed
  std::optional<double> softmax_auroc;
  std::optional<double> softmax_openset_accuracy;
  double detector_val_accuracy = 0.0;
  double detector_val_auroc = 0.0;

  std::map<std::string, std::string> artifact_hashes;
  std::vector<std::string> excluded_feature_sets;  // head dims dropped by shape mismatch
};

struct ExperimentResult {
  std::string mode;
  std::string config_text;  // effective config echo
  std::string config_hash;
  int ones_count_used = 0;
  double tau = 0.5;
  std::vector<SeedResult> seeds;
  bool partial = false;

  double mean_auroc = 0.0, stddev_auroc = 0.0;
  double mean_openset_accuracy = 0.0, stddev_openset_accuracy = 0.0;
  std::optional<double> mean_softmax_auroc;
  std::optional<double> mean_softmax_openset_accuracy;

  void aggregate();  // recomputes means/stddevs from non-failed seeds
};

}  // namespace gosr
