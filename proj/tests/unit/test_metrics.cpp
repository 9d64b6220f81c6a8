#include <doctest.h>

#include <algorithm>

#include "gosr/metrics.hpp"
#include "test_support.hpp"

using namespace gosr;

TEST_CASE("auroc trivial cases") {
  ScoredSet perfect{{1.0, 1.0, 0.0, 0.0}, {1, 1, 0, 0}};
  CHECK(auroc(perfect) == 1.0);

  ScoredSet tied{{0.7, 0.7, 0.7, 0.7, 0.7}, {1, 0, 1, 0, 1}};
  CHECK(auroc(tied) == 0.5);

  ScoredSet inverted{{0.0, 1.0}, {1, 0}};
  CHECK(auroc(inverted) == 0.0);
}

TEST_CASE("auroc rejects degenerate inputs") {
  CHECK_THROWS_AS(auroc(ScoredSet{{1.0, 2.0}, {1, 1}}), std::invalid_argument);
  CHECK_THROWS_AS(auroc(ScoredSet{{1.0}, {1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(auroc(ScoredSet{{1.0, 2.0}, {1, 2}}), std::invalid_argument);
}

TEST_CASE("auroc equals the pairwise oracle exactly on random instances") {
  Rng rng(777);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 10 + static_cast<int>(rng.below(191));
    ScoredSet set;
    set.scores.reserve(static_cast<std::size_t>(n));
    set.truth.reserve(static_cast<std::size_t>(n));
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      // coarse quantization forces plenty of ties
      set.scores.push_back(static_cast<double>(rng.below(12)) / 11.0);
      int t = rng.uniform() < 0.45 ? 1 : 0;
      set.truth.push_back(t);
      (t ? has1 : has0) = true;
    }
    if (!has0) set.truth[0] = 0;
    if (!has1) set.truth[static_cast<std::size_t>(n) - 1] = 1;

    const double fast = auroc(set);
    const double slow = gosr_test::pairwise_auroc_oracle(set);
    CHECK(fast == slow);  // exact: both are ratios of half-integer counts
  }
}

TEST_CASE("auroc is invariant under strictly increasing transforms") {
  Rng rng(101);
  ScoredSet set;
  for (int i = 0; i < 300; ++i) {
    set.scores.push_back(rng.normal());
    set.truth.push_back(i % 3 == 0 ? 1 : 0);
  }
  const double base = auroc(set);

  ScoredSet affine = set;
  for (auto& s : affine.scores) s = 3.0 * s + 11.0;
  CHECK(auroc(affine) == base);

  ScoredSet expd = set;
  for (auto& s : expd.scores) s = std::exp(s);
  CHECK(auroc(expd) == base);
}

TEST_CASE("auroc flips under label swap") {
  Rng rng(55);
  ScoredSet set;
  for (int i = 0; i < 120; ++i) {
    set.scores.push_back(static_cast<double>(rng.below(7)));
    set.truth.push_back(static_cast<int>(rng.below(2)));
  }
  bool has0 = std::count(set.truth.begin(), set.truth.end(), 0) > 0;
  bool has1 = std::count(set.truth.begin(), set.truth.end(), 1) > 0;
  REQUIRE(has0);
  REQUIRE(has1);
  ScoredSet swapped = set;
  for (auto& t : swapped.truth) t = 1 - t;
  CHECK(auroc(swapped) == doctest::Approx(1.0 - auroc(set)).epsilon(1e-12));
}

TEST_CASE("openset accuracy counting") {
  CHECK(openset_accuracy({1, 2, 3}, {1, 2, 3}) == 1.0);
  CHECK(openset_accuracy({0, 0}, {0, 1}) == 0.5);
  std::vector<int> pred = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> truth = {0, 1, 2, 3, 4, 5, 6, 9, 9, 8};  // 7 matches
  CHECK(openset_accuracy(pred, truth) == doctest::Approx(0.7));
  CHECK_THROWS_AS(openset_accuracy({1}, {1, 2}), std::invalid_argument);
}

TEST_CASE("openset accuracy is permutation invariant") {
  Rng rng(9);
  std::vector<int> pred, truth;
  for (int i = 0; i < 200; ++i) {
    pred.push_back(static_cast<int>(rng.below(5)));
    truth.push_back(static_cast<int>(rng.below(5)));
  }
  const double base = openset_accuracy(pred, truth);
  std::vector<std::size_t> order(pred.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> pred2, truth2;
  for (auto i : order) {
    pred2.push_back(pred[i]);
    truth2.push_back(truth[i]);
  }
  CHECK(openset_accuracy(pred2, truth2) == base);
}

TEST_CASE("softmax baseline scores") {
  // Zeroed parameters give uniform softmax: max prob is exactly 1/N.
  ClassifierCheckpoint ckpt = gosr_test::tiny_mlp_checkpoint(4, {6}, 5, 3);
  for (auto& p : const_cast<Network&>(*ckpt.net).params()) p.tensor->zero();
  Rng rng(4);
  Tensor batch({2, 1, 1, 4});
  for (auto& v : batch.data) v = rng.uniform();
  auto scores = softmax_baseline_scores(ckpt, batch);
  REQUIRE(scores.size() == 2);
  CHECK(scores[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(scores[1] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("softmax baseline saturates with a dominant logit") {
  ClassifierCheckpoint ckpt = gosr_test::tiny_mlp_checkpoint(2, {}, 3, 5, /*with_bias=*/true);
  // hand-pick weights: one logit dominated by a large weight
  auto params = const_cast<Network&>(*ckpt.net).params();
  params[0].tensor->zero();
  params[0].tensor->data[0] = 50.0;  // logit0 = 50 * x0
  params[1].tensor->zero();
  Tensor batch({1, 1, 1, 2}, {1.0, 0.0});
  auto scores = softmax_baseline_scores(ckpt, batch);
  CHECK(scores[0] > 0.999);
}
