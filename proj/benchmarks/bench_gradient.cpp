#include <benchmark/benchmark.h>

#include "gosr/backbones.hpp"
#include "gosr/gradient.hpp"
#include "gosr/rng.hpp"

namespace {

gosr::ClassifierCheckpoint make_checkpoint(const std::string& arch, int size, int classes) {
  gosr::BackboneSpec spec;
  spec.architecture = arch;
  spec.channels = 3;
  spec.height = size;
  spec.width = size;
  spec.num_classes = classes;
  spec.init_seed = 7;
  gosr::ClassifierCheckpoint ckpt;
  ckpt.spec = spec;
  ckpt.param_hash = "bench";
  ckpt.net = std::shared_ptr<const gosr::Network>(gosr::build_backbone(spec));
  for (int c = 0; c < classes; ++c) ckpt.class_mapping[c] = c;
  return ckpt;
}

gosr::Tensor make_image(int size) {
  gosr::Rng rng(3);
  gosr::Tensor img({3, size, size});
  for (auto& v : img.data) v = rng.uniform();
  return img;
}

void BM_SmallCnnForward(benchmark::State& state) {
  auto ckpt = make_checkpoint("small_cnn", 32, 10);
  gosr::Tensor batch({1, 3, 32, 32});
  gosr::Rng rng(4);
  for (auto& v : batch.data) v = rng.uniform();
  for (auto _ : state) {
    benchmark::DoNotOptimize(ckpt.net->infer(batch));
  }
}
BENCHMARK(BM_SmallCnnForward);

void BM_ExtractRepresentation(benchmark::State& state) {
  auto ckpt = make_checkpoint("small_cnn", 32, 10);
  gosr::Tensor image = make_image(32);
  gosr::ConfoundingLabel label = gosr::make_confounding_label(10, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gosr::extract_representation(ckpt, image, label));
  }
}
BENCHMARK(BM_ExtractRepresentation);

void BM_ExtractBatchWorkers(benchmark::State& state) {
  auto ckpt = make_checkpoint("small_cnn", 32, 10);
  gosr::LabeledDataset ds;
  ds.name = "bench";
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  ds.class_ids = {0};
  for (int i = 0; i < 32; ++i) {
    gosr::Sample s;
    s.image = make_image(32);
    s.label = 0;
    s.original_label = 0;
    s.id = "bench:" + std::to_string(i);
    ds.samples.push_back(std::move(s));
  }
  gosr::ConfoundingLabel label = gosr::make_confounding_label(10, 10);
  gosr::ExtractOptions opt;
  opt.workers = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gosr::extract_batch(ckpt, ds, label, {}, std::nullopt, opt));
  }
}
BENCHMARK(BM_ExtractBatchWorkers)->Arg(1)->Arg(2)->Arg(4);

void BM_FiniteDifferenceOracleTinyMlp(benchmark::State& state) {
  gosr::BackboneSpec spec;
  spec.architecture = "mlp";
  spec.channels = 1;
  spec.height = 1;
  spec.width = 8;
  spec.num_classes = 4;
  spec.init_seed = 9;
  spec.mlp.hidden = {12};
  gosr::ClassifierCheckpoint ckpt;
  ckpt.spec = spec;
  ckpt.param_hash = "bench";
  ckpt.net = std::shared_ptr<const gosr::Network>(gosr::build_backbone(spec));
  gosr::Rng rng(5);
  gosr::Tensor image({1, 1, 8});
  for (auto& v : image.data) v = rng.uniform();
  auto label = gosr::make_confounding_label(4, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gosr::finite_difference_oracle(ckpt, image, label, 1e-4));
  }
}
BENCHMARK(BM_FiniteDifferenceOracleTinyMlp);

}  // namespace
