#include <doctest.h>

#include "gosr/classifier.hpp"
#include "gosr/common.hpp"
#include "gosr/sha256.hpp"
#include "test_support.hpp"

using namespace gosr;
using gosr_test::TempDir;

namespace {

BackboneSpec blob_mlp_spec(int classes, int size = 8) {
  BackboneSpec spec;
  spec.architecture = "mlp";
  spec.channels = 1;
  spec.height = size;
  spec.width = size;
  spec.num_classes = classes;
  spec.mlp.hidden = {16};
  return spec;
}

}  // namespace

TEST_CASE("zero-epoch checkpoint behaves like chance") {
  LabeledDataset data = gosr_test::tiny_blobs(5, 40);
  BackboneSpec spec = blob_mlp_spec(5);
  TrainHyper hyper;
  hyper.epochs = 0;
  hyper.seed = 3;
  ClassifierCheckpoint ckpt = train_classifier(data, spec, hyper);
  Tensor probs = predict(ckpt, stack_images(data));
  double acc = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double* row = probs.data.data() + i * 5;
    int best = 0;
    for (int c = 1; c < 5; ++c)
      if (row[c] > row[best]) best = c;
    if (best == data.samples[i].label) acc += 1;
  }
  acc /= static_cast<double>(data.size());
  CHECK(acc == doctest::Approx(1.0 / 5).epsilon(0.5));  // within +/- 0.1 absolute
  CHECK(std::abs(acc - 0.2) <= 0.1);
}

TEST_CASE("blob classifier trains to high accuracy") {
  LabeledDataset data = gosr_test::tiny_blobs(10, 30);
  BackboneSpec spec = blob_mlp_spec(10);
  TrainHyper hyper;
  hyper.epochs = 5;
  hyper.learning_rate = 0.1;
  hyper.seed = 0;
  ClassifierCheckpoint ckpt = train_classifier(data, spec, hyper);
  CHECK(ckpt.meta.final_train_accuracy >= 0.95);

  SUBCASE("trained argmax matches labels on most of the train set") {
    Tensor probs = predict(ckpt, stack_images(data));
    std::vector<int> labels = collect_labels(data);
    int hit = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double* row = probs.data.data() + i * 10;
      int best = 0;
      for (int c = 1; c < 10; ++c)
        if (row[c] > row[best]) best = c;
      if (best == labels[i]) ++hit;
    }
    CHECK(static_cast<double>(hit) / static_cast<double>(data.size()) >= 0.95);
  }

  SUBCASE("determinism: same seed, same parameters") {
    ClassifierCheckpoint again = train_classifier(data, spec, hyper);
    CHECK(again.param_hash == ckpt.param_hash);
    CHECK(again.meta.final_train_accuracy == ckpt.meta.final_train_accuracy);
  }
}

TEST_CASE("probability rows are normalized for any input") {
  BackboneSpec spec = blob_mlp_spec(4);
  TrainHyper hyper;
  hyper.epochs = 0;
  ClassifierCheckpoint ckpt = train_classifier(gosr_test::tiny_blobs(4, 10), spec, hyper);

  Tensor extreme({3, 1, 8, 8});
  for (std::int64_t i = 0; i < extreme.size(); ++i) extreme[i] = (i % 2) ? 1e6 : -1e6;
  Tensor probs = predict(ckpt, extreme);
  CHECK(probs.shape == std::vector<int>{3, 4});
  for (int b = 0; b < 3; ++b) {
    double sum = 0;
    for (int c = 0; c < 4; ++c) {
      const double p = probs[static_cast<std::int64_t>(b) * 4 + c];
      CHECK(p >= 0.0);
      sum += p;
    }
    CHECK(std::abs(sum - 1.0) < 1e-5);
  }
}

TEST_CASE("label/spec mismatch is rejected") {
  LabeledDataset ten = gosr_test::tiny_blobs(10, 5);
  BackboneSpec spec = blob_mlp_spec(6);
  TrainHyper hyper;
  CHECK_THROWS_AS(train_classifier(ten, spec, hyper), std::invalid_argument);
}

TEST_CASE("prediction shape mismatch is rejected") {
  BackboneSpec spec = blob_mlp_spec(4);
  TrainHyper hyper;
  hyper.epochs = 0;
  ClassifierCheckpoint ckpt = train_classifier(gosr_test::tiny_blobs(4, 10), spec, hyper);
  Tensor wrong({2, 1, 4, 4});
  CHECK_THROWS_AS(predict(ckpt, wrong), std::invalid_argument);
}

TEST_CASE("parameter_sets matches the backbone definition order") {
  ClassifierCheckpoint ckpt = gosr_test::tiny_mlp_checkpoint(8, {16}, 4, 17);
  auto sets = parameter_sets(ckpt);
  REQUIRE(sets.size() == 4);
  CHECK(sets[0].first == "fc1.weight");
  CHECK(sets[1].first == "fc1.bias");
  CHECK(sets[2].first == "fc2.weight");
  CHECK(sets[3].first == "fc2.bias");
  CHECK(sets[2].second == std::vector<int>{4, 16});
}

TEST_CASE("small_cnn has the frozen parameter-set count") {
  BackboneSpec spec;
  spec.architecture = "small_cnn";
  spec.channels = 1;
  spec.height = 8;
  spec.width = 8;
  spec.num_classes = 4;
  auto net = build_backbone(spec);
  CHECK(net->num_param_sets() == 8);  // 2 conv + 2 dense, weight+bias each
  auto sets = net->parameter_sets();
  CHECK(sets[0].first == "conv1.weight");
  CHECK(sets[7].first == "fc2.bias");
}

TEST_CASE("checkpoint save/load round trip") {
  TempDir dir("ckpt");
  LabeledDataset data = gosr_test::tiny_blobs(4, 15);
  BackboneSpec spec = blob_mlp_spec(4);
  TrainHyper hyper;
  hyper.epochs = 2;
  hyper.seed = 9;
  ClassifierCheckpoint ckpt = train_classifier(data, spec, hyper);

  auto blob_path = dir.path() / "model.bin";
  auto manifest_path = dir.path() / "model.json";
  save_classifier(ckpt, blob_path, manifest_path);
  ClassifierCheckpoint loaded = load_classifier(blob_path, manifest_path);

  CHECK(loaded.param_hash == ckpt.param_hash);
  CHECK(loaded.class_mapping == ckpt.class_mapping);
  CHECK(parameter_sets(loaded) == parameter_sets(ckpt));
  CHECK(loaded.meta.final_train_accuracy == ckpt.meta.final_train_accuracy);

  Tensor batch = stack_images(data, {0, 5, 11});
  Tensor before = predict(ckpt, batch);
  Tensor after = predict(loaded, batch);
  for (std::int64_t i = 0; i < before.size(); ++i) CHECK(std::abs(before[i] - after[i]) <= 1e-6);

  SUBCASE("corrupt blob is detected") {
    auto bytes = read_binary_file(blob_path);
    bytes[bytes.size() / 2] ^= 0xff;
    write_binary_file(blob_path, bytes);
    CHECK_THROWS_AS(load_classifier(blob_path, manifest_path), std::runtime_error);
  }
}

TEST_CASE("non-finite loss aborts with a diagnostic") {
  LabeledDataset data = gosr_test::tiny_blobs(4, 15);
  data.samples[3].image[5] = std::numeric_limits<double>::quiet_NaN();
  BackboneSpec spec = blob_mlp_spec(4);
  spec.mlp.hidden = {};  // no relu between the NaN and the logits
  TrainHyper hyper;
  hyper.epochs = 2;
  hyper.val_fraction = 0.0;
  CHECK_THROWS_WITH_AS(train_classifier(data, spec, hyper), doctest::Contains("non-finite"), std::runtime_error);
}
