#pragma once

#include <vector>

#include "gosr/classifier.hpp"

namespace gosr {

/// Scores with binary ground truth (1 = known, 0 = unknown).
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> truth;
};

/// Probability that a uniformly random known outranks a uniformly random
/// unknown, ties counted one half. Rank-statistic (Mann-Whitney) form;
/// requires both classes present.
double auroc(const ScoredSet& set);

/// Fraction of final-class predictions exactly matching N+1 truth labels.
double openset_accuracy(const std::vector<int>& predicted_classes, const std::vector<int>& truth_labels);

/// Maximum softmax probability per image; a drop-in known-score baseline.
std::vector<double> softmax_baseline_scores(const ClassifierCheckpoint& ckpt, const Tensor& images);

}  // namespace gosr
