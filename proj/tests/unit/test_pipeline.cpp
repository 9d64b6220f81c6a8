#include <doctest.h>

#include "gosr/common.hpp"
#include "gosr/pipeline.hpp"
#include "test_support.hpp"

using namespace gosr;

TEST_CASE("routing rule over a synthetic (score, tau) grid") {
  const int sentinel = 6;
  for (int si = 0; si <= 20; ++si) {
    for (int ti = 1; ti < 20; ++ti) {
      const double score = si / 20.0;
      const double tau = ti / 20.0;
      const int closed = si % sentinel;
      const int got = route_final_class(closed, score, tau, sentinel);
      if (score >= tau) CHECK(got == closed);
      else CHECK(got == sentinel);
      CHECK(got >= 0);
      CHECK(got <= sentinel);
    }
  }
  // boundary: score exactly tau stays known
  CHECK(route_final_class(3, 0.95, 0.95, 6) == 3);
}

namespace {

struct Fixture {
  ClassifierCheckpoint ckpt;
  Tensor images;
  std::vector<int> labels;

  Fixture() : ckpt(gosr_test::tiny_mlp_checkpoint(9, {12}, 3, 5)) {
    LabeledDataset data = gosr_test::tiny_blobs(3, 6, 3);
    BackboneSpec spec = ckpt.spec;
    TrainHyper hyper;
    hyper.epochs = 3;
    hyper.learning_rate = 0.2;
    hyper.seed = 1;
    spec.height = 3;
    spec.width = 3;
    spec.channels = 1;
    ckpt = train_classifier(data, spec, hyper);
    images = stack_images(data);
    labels = collect_labels(data);
  }
};

}  // namespace

TEST_CASE("always-known stub preserves the closed-set prediction") {
  Fixture f;
  ConstScorer known(1.0);
  auto preds = open_set_predict_with(f.ckpt, known, 0.5, f.images);
  REQUIRE(preds.size() == f.labels.size());
  Tensor probs = predict(f.ckpt, f.images);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    CHECK(preds[i].final_class == preds[i].closed_set_class);
    CHECK(preds[i].known_score == 1.0);
    const double* row = probs.data.data() + i * 3;
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (row[c] > row[best]) best = c;
    CHECK(preds[i].closed_set_class == best);
  }
}

TEST_CASE("always-unknown stub routes everything to the sentinel") {
  Fixture f;
  ConstScorer unknown(0.0);
  auto preds = open_set_predict_with(f.ckpt, unknown, 0.5, f.images);
  for (const auto& p : preds) CHECK(p.final_class == 3);
}

TEST_CASE("tau extremes reduce to closed-set behaviour or full rejection") {
  Fixture f;
  SoftmaxScorer scorer;
  auto low = open_set_predict_with(f.ckpt, scorer, 1e-9, f.images);
  for (const auto& p : low) CHECK(p.final_class == p.closed_set_class);
  auto high = open_set_predict_with(f.ckpt, scorer, 1.0 - 1e-12, f.images);
  for (const auto& p : high) CHECK(p.final_class == 3);
}

TEST_CASE("detector provenance mismatch is refused") {
  Fixture f;
  DetectorCheckpoint det;
  det.full_width = 4;
  det.w1 = Tensor({2, 4});
  det.b1 = Tensor({2});
  det.w2 = Tensor({1, 2});
  det.b2 = Tensor({1});
  det.standardizer.kind = "none";
  det.standardizer.shift.assign(4, 0.0);
  det.standardizer.scale.assign(4, 1.0);
  det.meta.test_checkpoint_hash = "somebody-else";
  CHECK_THROWS_WITH_AS(open_set_predict(f.ckpt, det, 0.5, f.images), doctest::Contains("trained against"),
                       std::runtime_error);
}

TEST_CASE("invalid tau is rejected") {
  Fixture f;
  ConstScorer s(1.0);
  CHECK_THROWS_AS(open_set_predict_with(f.ckpt, s, 0.0, f.images), std::invalid_argument);
  CHECK_THROWS_AS(open_set_predict_with(f.ckpt, s, 1.0, f.images), std::invalid_argument);
}

TEST_CASE("config round trip and validation") {
  ExperimentConfig cfg;
  cfg.mode = "identification";
  cfg.train_source.kind = "synthetic_blobs";
  cfg.train_source.classes = 10;
  cfg.test_source = cfg.train_source;
  cfg.test_source.split = "test";
  cfg.num_known = 6;
  cfg.num_inner_known = 4;
  cfg.validate();

  std::string text = cfg.to_json_text();
  ExperimentConfig parsed = ExperimentConfig::from_json_text(text);
  CHECK(parsed.mode == cfg.mode);
  CHECK(parsed.num_known == 6);
  CHECK(parsed.seeds == cfg.seeds);
  CHECK(parsed.to_json_text() == text);  // canonical echo is stable

  SUBCASE("identification needs same-dataset unknowns") {
    ExperimentConfig bad = cfg;
    bad.num_known = 10;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
  SUBCASE("classification needs outliers") {
    ExperimentConfig bad = cfg;
    bad.mode = "classification";
    bad.num_known = 10;
    bad.num_inner_known = 6;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.outlier_source = cfg.train_source;
    bad.outlier_source->kind = "uniform_noise";
    CHECK_NOTHROW(bad.validate());
  }
  SUBCASE("tau bounds") {
    ExperimentConfig bad = cfg;
    bad.tau = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
  SUBCASE("one-hot ones count is rejected") {
    ExperimentConfig bad = cfg;
    bad.ones_count = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
  SUBCASE("bad json is a config error") {
    CHECK_THROWS_AS(ExperimentConfig::from_json_text("{nope"), ConfigError);
  }
}

TEST_CASE("result aggregation marks partial runs") {
  ExperimentResult result;
  result.seeds.resize(3);
  result.seeds[0].auroc = 0.8;
  result.seeds[0].openset_accuracy = 0.7;
  result.seeds[1].auroc = 0.9;
  result.seeds[1].openset_accuracy = 0.8;
  result.seeds[2].failed = true;
  result.aggregate();
  CHECK(result.partial);
  CHECK(result.mean_auroc == doctest::Approx(0.85));
  CHECK(result.stddev_auroc == doctest::Approx(std::sqrt(0.005)).epsilon(1e-9));
  CHECK(result.mean_openset_accuracy == doctest::Approx(0.75));
}
