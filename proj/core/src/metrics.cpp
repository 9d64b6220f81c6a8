#include "gosr/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace gosr {

double auroc(const ScoredSet& set) {
  const std::size_t n = set.scores.size();
  if (set.truth.size() != n) throw std::invalid_argument("auroc: scores/truth length mismatch");
  std::int64_t n_pos = 0, n_neg = 0;
  for (int t : set.truth) {
    if (t == 1) ++n_pos;
    else if (t == 0) ++n_neg;
    else throw std::invalid_argument("auroc: truth labels must be 0 or 1");
  }
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auroc: both classes must be present");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });

  // Mid-ranks over tie groups; rank sum of the positive class.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && set.scores[order[j + 1]] == set.scores[order[i]]) ++j;
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k)
      if (set.truth[order[k]] == 1) rank_sum_pos += mid_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double openset_accuracy(const std::vector<int>& predicted_classes, const std::vector<int>& truth_labels) {
  if (predicted_classes.size() != truth_labels.size())
    throw std::invalid_argument("openset_accuracy: length mismatch");
  if (predicted_classes.empty()) throw std::invalid_argument("openset_accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted_classes.size(); ++i)
    if (predicted_classes[i] == truth_labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predicted_classes.size());
}

std::vector<double> softmax_baseline_scores(const ClassifierCheckpoint& ckpt, const Tensor& images) {
  Tensor probs = predict(ckpt, images);
  const int batch = probs.dim(0), n = probs.dim(1);
  std::vector<double> scores(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    double best = 0.0;
    for (int i = 0; i < n; ++i) best = std::max(best, probs[static_cast<std::int64_t>(b) * n + i]);
    scores[static_cast<std::size_t>(b)] = best;
  }
  return scores;
}

}  // namespace gosr
