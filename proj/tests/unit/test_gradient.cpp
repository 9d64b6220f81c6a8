#include <doctest.h>

#include "gosr/common.hpp"
#include "gosr/gradient.hpp"
#include "gosr/sha256.hpp"
#include "test_support.hpp"

using namespace gosr;
using gosr_test::TempDir;

TEST_CASE("confounding label construction") {
  ConfoundingLabel all = make_confounding_label(10, 10);
  CHECK(all.values == std::vector<double>(10, 1.0));
  ConfoundingLabel none = make_confounding_label(4, 0);
  CHECK(none.values == std::vector<double>(4, 0.0));
  ConfoundingLabel two = make_confounding_label(5, 2);
  CHECK(two.values == std::vector<double>{1, 1, 0, 0, 0});

  CHECK_THROWS_AS(make_confounding_label(5, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_confounding_label(5, 6), std::invalid_argument);
  CHECK_THROWS_AS(make_confounding_label(5, -2), std::invalid_argument);
}

TEST_CASE("closed form: single linear parameter set, two weights") {
  // One scalar input, two classes, no bias: logits z_i = w_i * x.
  // All-ones label: J = -(1/2) [ln s(z_0) + ln s(z_1)],
  // dJ/dw_i = (s(z_i) - 1) * x / 2, feature = sum_i (dJ/dw_i)^2.
  ClassifierCheckpoint ckpt = gosr_test::tiny_mlp_checkpoint(1, {}, 2, 0, /*with_bias=*/false);
  auto params = ckpt.net->parameter_sets();
  REQUIRE(params.size() == 1);
  REQUIRE(params[0].second == std::vector<int>{2, 1});

  // Pin the weights to hand-picked values.
  const double w0 = 0.3, w1 = -0.7, x = 0.5;
  const_cast<Network&>(*ckpt.net).params()[0].tensor->data = {w0, w1};

  Tensor image({1, 1, 1}, {x});
  ConfoundingLabel label = make_confounding_label(2, 2);
  GradientRepresentation rep = extract_representation(ckpt, image, label);
  REQUIRE(rep.features.size() == 1);

  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  const double g0 = (sigmoid(w0 * x) - 1.0) * x / 2.0;
  const double g1 = (sigmoid(w1 * x) - 1.0) * x / 2.0;
  const double expected = g0 * g0 + g1 * g1;
  CHECK(rep.features[0] == doctest::Approx(expected).epsilon(1e-12));

  SUBCASE("unsquared ablation returns the plain norm") {
    ExtractOptions opt;
    opt.squared = false;
    GradientRepresentation plain = extract_representation(ckpt, image, label, opt);
    CHECK(plain.features[0] == doctest::Approx(std::sqrt(expected)).epsilon(1e-12));
  }

  SUBCASE("oracle agrees with the closed form") {
    GradientRepresentation fd = finite_difference_oracle(ckpt, image, label, 1e-5);
    CHECK(fd.features[0] == doctest::Approx(expected).epsilon(1e-7));
  }
}

TEST_CASE("degenerate constant-output model") {
  // All-zero parameters and a zero image: every sigmoid is 1/2. Only the
  // output bias set sees a gradient: each logit gets (1/2 - 1)/N.
  ClassifierCheckpoint ckpt = gosr_test::tiny_mlp_checkpoint(8, {16}, 4, 0);
  for (auto& p : const_cast<Network&>(*ckpt.net).params()) p.tensor->zero();

  Tensor image({1, 1, 8});
  ConfoundingLabel label = make_confounding_label(4, 4);
  GradientRepresentation rep = extract_representation(ckpt, image, label);
  REQUIRE(rep.features.size() == 4);

  const double per_logit = (0.5 - 1.0) / 4.0;
  const double expected_bias = 4.0 * per_logit * per_logit;  // 0.0625
  CHECK(rep.features[0] == doctest::Approx(0.0));            // fc1.weight
  CHECK(rep.features[1] == doctest::Approx(0.0));            // fc1.bias (relu'(0) = 0)
  CHECK(rep.features[2] == doctest::Approx(0.0));            // fc2.weight (zero activations)
  CHECK(rep.features[3] == doctest::Approx(expected_bias).epsilon(1e-12));

  GradientRepresentation fd = finite_difference_oracle(ckpt, image, label, 1e-5);
  CHECK(fd.features[3] == doctest::Approx(expected_bias).epsilon(1e-6));
  CHECK(fd.features[2] == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("extraction is pure and repeatable") {
  ClassifierCheckpoint ckpt = gosr_test::tiny_mlp_checkpoint(6, {8}, 3, 42);
  Rng rng(1);
  Tensor image = gosr_test::random_image({1, 1, 6}, rng);
  ConfoundingLabel label = make_confounding_label(3, 3);

  const std::string before = sha256_hex(ckpt.net->serialize());
  GradientRepresentation a = extract_representation(ckpt, image, label);
  GradientRepresentation b = extract_representation(ckpt, image, label);
  CHECK(sha256_hex(ckpt.net->serialize()) == before);
  CHECK(a.features == b.features);
  for (double f : a.features) CHECK(f >= 0.0);
  CHECK(a.features.size() == static_cast<std::size_t>(ckpt.net->num_param_sets()));

  SUBCASE("oracle leaves the checkpoint untouched too") {
    finite_difference_oracle(ckpt, image, label, 1e-4);
    CHECK(sha256_hex(ckpt.net->serialize()) == before);
  }

  SUBCASE("label length must match the head") {
    ConfoundingLabel wrong = make_confounding_label(5, 5);
    CHECK_THROWS_AS(extract_representation(ckpt, image, wrong), std::invalid_argument);
  }

  SUBCASE("oracle rejects non-positive epsilon") {
    CHECK_THROWS_AS(finite_difference_oracle(ckpt, image, label, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(finite_difference_oracle(ckpt, image, label, -1e-5), std::invalid_argument);
  }
}

TEST_CASE("oracle equivalence property over random tiny models") {
  // A faster mirror of the acceptance criterion (10 trials instead of 50).
  int trials = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int input = 3 + static_cast<int>(seed % 4);
    const int hidden = 4 + static_cast<int>(seed % 3);
    const int classes = 2 + static_cast<int>(seed % 3);
    ClassifierCheckpoint ckpt = gosr_test::tiny_mlp_checkpoint(input, {hidden}, classes, seed * 31 + 1);
    REQUIRE(ckpt.net->total_parameters() <= 500);

    Rng rng(seed * 7 + 3);
    Tensor image = gosr_test::random_image({1, 1, input}, rng);
    const int n = classes == 2 ? 2 : classes - (seed % 2);
    ConfoundingLabel label = make_confounding_label(classes, n == 1 ? 0 : n);

    GradientRepresentation an = extract_representation(ckpt, image, label);
    GradientRepresentation fd = finite_difference_oracle(ckpt, image, label, 1e-4);
    for (std::size_t k = 0; k < an.features.size(); ++k) {
      if (an.features[k] <= 1e-12 && fd.features[k] <= 1e-12) continue;
      const double rel = std::abs(an.features[k] - fd.features[k]) /
                         std::max({std::abs(an.features[k]), std::abs(fd.features[k]), 1e-12});
      CHECK(rel < 1e-4);
    }
    ++trials;
  }
  CHECK(trials == 10);
}

TEST_CASE("batch extraction and the feature cache") {
  TempDir dir("cache");
  LabeledDataset data = gosr_test::tiny_blobs(3, 8, 6);
  BackboneSpec spec;
  spec.architecture = "mlp";
  spec.channels = 1;
  spec.height = 6;
  spec.width = 6;
  spec.num_classes = 3;
  spec.mlp.hidden = {8};
  TrainHyper hyper;
  hyper.epochs = 1;
  ClassifierCheckpoint ckpt = train_classifier(data, spec, hyper);

  ConfoundingLabel label = make_confounding_label(3, 3);
  std::vector<int> roles(data.size());
  for (std::size_t i = 0; i < roles.size(); ++i) roles[i] = data.samples[i].label == 0 ? 0 : 1;

  auto base = dir.path() / "train";
  FeatureTable table = extract_batch(ckpt, data, label, roles, base, {}, "splithash");
  CHECK(table.size() == data.size());
  CHECK(table.width() == ckpt.net->num_param_sets());
  CHECK(table.provenance.checkpoint_hash == ckpt.param_hash);
  CHECK(table.sample_ids.front() == data.samples.front().id);
  int known = 0, unknown = 0;
  for (int r : table.role_labels) (r == 1 ? known : unknown)++;
  CHECK(known == 16);
  CHECK(unknown == 8);

  auto csv = base;
  csv += ".csv";
  auto bin = base;
  bin += ".bin";
  REQUIRE(std::filesystem::exists(csv));
  REQUIRE(std::filesystem::exists(bin));

  SUBCASE("cache rewrite is byte-identical") {
    auto csv_bytes = read_binary_file(csv);
    auto bin_bytes = read_binary_file(bin);
    save_feature_table_csv(table, csv);
    save_feature_table_bin(table, bin);
    CHECK(read_binary_file(csv) == csv_bytes);
    CHECK(read_binary_file(bin) == bin_bytes);
  }

  SUBCASE("csv and bin loaders agree") {
    FeatureTable from_csv = load_feature_table_csv(csv);
    FeatureTable from_bin = load_feature_table_bin(bin);
    CHECK(from_csv.rows == table.rows);
    CHECK(from_bin.rows == table.rows);
    CHECK(from_csv.provenance == table.provenance);
    CHECK(from_bin.sample_ids == table.sample_ids);
    CHECK(from_csv.role_labels == table.role_labels);
  }

  SUBCASE("matching provenance reuses the cache") {
    FeatureTable again = extract_batch(ckpt, data, label, roles, base, {}, "splithash");
    CHECK(again.rows == table.rows);
  }

  SUBCASE("provenance mismatch is refused") {
    FeatureProvenance wrong = table.provenance;
    wrong.split_hash = "other";
    CHECK_THROWS_WITH_AS(load_feature_table_checked(bin, wrong), doctest::Contains("stale"), std::runtime_error);
    FeatureProvenance right = table.provenance;
    CHECK_NOTHROW(load_feature_table_checked(bin, right));
  }

  SUBCASE("role means split by role") {
    auto mean_known = table.role_mean(1);
    auto mean_unknown = table.role_mean(0);
    CHECK(mean_known.size() == static_cast<std::size_t>(table.width()));
    CHECK(mean_unknown.size() == mean_known.size());
    CHECK_THROWS_AS(table.role_mean(7), std::invalid_argument);
  }

  SUBCASE("worker fan-out preserves row order") {
    ExtractOptions opt;
    opt.workers = 4;
    FeatureTable parallel = extract_batch(ckpt, data, label, roles, std::nullopt, opt, "splithash");
    CHECK(parallel.rows == table.rows);
    CHECK(parallel.sample_ids == table.sample_ids);
  }
}
