#include <doctest.h>

#include <fstream>

#include "gosr/common.hpp"
#include "gosr/dataset.hpp"
#include "gosr/image_io.hpp"
#include "test_support.hpp"

using namespace gosr;
using gosr_test::TempDir;

TEST_CASE("synthetic blobs: construction by definition") {
  DataSourceSpec spec;
  spec.kind = "synthetic_blobs";
  spec.classes = 10;
  spec.per_class = 100;
  spec.seed = 0;
  LabeledDataset ds = load_dataset(spec);
  CHECK(ds.size() == 1000);
  CHECK(ds.class_ids.size() == 10);
  CHECK(ds.class_ids.front() == 0);
  CHECK(ds.class_ids.back() == 9);
  auto hist = ds.label_histogram();
  for (int c = 0; c < 10; ++c) CHECK(hist[c] == 100);
  for (double v : ds.samples[0].image.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("synthetic blobs: bit-identical across loads") {
  DataSourceSpec spec;
  spec.kind = "synthetic_blobs";
  spec.classes = 4;
  spec.per_class = 10;
  spec.height = 8;
  spec.width = 8;
  spec.channels = 1;
  spec.seed = 5;
  LabeledDataset a = load_dataset(spec);
  LabeledDataset b = load_dataset(spec);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.samples[i].id == b.samples[i].id);
    CHECK(a.samples[i].label == b.samples[i].label);
    CHECK(a.samples[i].image.data == b.samples[i].image.data);
  }
}

TEST_CASE("synthetic blobs: train and test share means but not noise") {
  DataSourceSpec spec;
  spec.kind = "synthetic_blobs";
  spec.classes = 2;
  spec.per_class = 50;
  spec.height = 6;
  spec.width = 6;
  spec.channels = 1;
  spec.seed = 3;
  spec.split = "train";
  LabeledDataset train = load_dataset(spec);
  spec.split = "test";
  LabeledDataset test = load_dataset(spec);
  CHECK(train.samples[0].image.data != test.samples[0].image.data);

  // Per-class pixel means should agree across splits (shared blob centers).
  auto class_mean = [](const LabeledDataset& ds, int label) {
    double sum = 0;
    std::int64_t count = 0;
    for (const auto& s : ds.samples) {
      if (s.label != label) continue;
      for (double v : s.image.data) sum += v;
      count += s.image.size();
    }
    return sum / static_cast<double>(count);
  };
  for (int c = 0; c < 2; ++c) CHECK(class_mean(train, c) == doctest::Approx(class_mean(test, c)).epsilon(0.05));
}

TEST_CASE("uniform noise source") {
  DataSourceSpec spec;
  spec.kind = "uniform_noise";
  spec.per_class = 25;
  spec.height = 8;
  spec.width = 8;
  spec.channels = 3;
  LabeledDataset ds = load_dataset(spec);
  CHECK(ds.size() == 25);
  CHECK(ds.class_ids == std::vector<int>{0});
  for (const auto& s : ds.samples) CHECK(s.label == 0);
}

TEST_CASE("unknown source kind") {
  DataSourceSpec spec;
  spec.kind = "mystery";
  CHECK_THROWS_AS(load_dataset(spec), ConfigError);
}

namespace {

// Standard binary records: label byte + 3072 planar RGB bytes.
void write_fake_cifar(const std::filesystem::path& file, int records, int label_base) {
  std::ofstream out(file, std::ios::binary);
  for (int r = 0; r < records; ++r) {
    unsigned char label = static_cast<unsigned char>((label_base + r) % 10);
    out.put(static_cast<char>(label));
    for (int i = 0; i < 3072; ++i) out.put(static_cast<char>((i + r) % 256));
  }
}

}  // namespace

TEST_CASE("cifar10 binary layout loader") {
  TempDir dir("cifar");
  auto root = dir.path() / "cifar-10-batches-bin";
  std::filesystem::create_directories(root);
  for (int b = 1; b <= 5; ++b) write_fake_cifar(root / ("data_batch_" + std::to_string(b) + ".bin"), 20, b);
  write_fake_cifar(root / "test_batch.bin", 30, 0);

  DataSourceSpec spec;
  spec.kind = "cifar10";
  spec.path = dir.path().string();
  spec.split = "train";
  LabeledDataset train = load_dataset(spec);
  CHECK(train.size() == 100);
  CHECK(train.channels == 3);
  CHECK(train.height == 32);
  CHECK(train.samples[0].label == 1);
  CHECK(train.samples[0].image[0] == doctest::Approx(0.0));
  CHECK(train.samples[0].image[1] == doctest::Approx(1.0 / 255.0));

  spec.split = "test";
  LabeledDataset test = load_dataset(spec);
  CHECK(test.size() == 30);

  SUBCASE("missing file") {
    DataSourceSpec bad = spec;
    bad.path = (dir.path() / "nowhere").string();
    CHECK_THROWS_AS(load_dataset(bad), ConfigError);
  }
  SUBCASE("trailing partial record is corrupt") {
    std::ofstream app(root / "test_batch.bin", std::ios::binary | std::ios::app);
    app.put(0x01);
    app.close();
    CHECK_THROWS_AS(load_dataset(spec), std::runtime_error);
  }
}

TEST_CASE("ppm roundtrip and image_dir loader") {
  TempDir dir("imgdir");
  auto make_class = [&](const std::string& name, int count, int w, int h) {
    std::filesystem::create_directories(dir.path() / name);
    for (int i = 0; i < count; ++i) {
      std::vector<std::uint8_t> rgb(static_cast<std::size_t>(w) * h * 3);
      for (std::size_t p = 0; p < rgb.size(); ++p) rgb[p] = static_cast<std::uint8_t>((p + static_cast<std::size_t>(i)) % 256);
      write_ppm(dir.path() / name / ("img" + std::to_string(i) + ".ppm"), rgb, w, h);
    }
  };
  make_class("cat", 3, 8, 6);
  make_class("dog", 2, 8, 6);

  DataSourceSpec spec;
  spec.kind = "image_dir";
  spec.path = dir.path().string();
  LabeledDataset ds = load_dataset(spec);
  CHECK(ds.size() == 5);
  CHECK(ds.class_ids == std::vector<int>{0, 1});
  CHECK(ds.height == 6);
  CHECK(ds.width == 8);
  // sorted dirs: cat=0, dog=1
  CHECK(ds.samples[0].label == 0);
  CHECK(ds.samples[4].label == 1);

  SUBCASE("pixel values survive the planar conversion") {
    Tensor img = read_pnm(dir.path() / "cat" / "img0.ppm");
    // first interleaved pixel: r=0,g=1,b=2 at (y=0,x=0)
    CHECK(img[0] == doctest::Approx(0.0 / 255));
    CHECK(img[6 * 8] == doctest::Approx(1.0 / 255));
    CHECK(img[2 * 6 * 8] == doctest::Approx(2.0 / 255));
  }

  SUBCASE("resolution mismatch is refused") {
    make_class("elk", 1, 4, 4);
    CHECK_THROWS_AS(load_dataset(spec), ConfigError);
  }

  SUBCASE("expected resolution is enforced") {
    LoadOptions opt;
    opt.expect_height = 32;
    CHECK_THROWS_AS(load_dataset(spec, opt), ConfigError);
  }
}
