#include "gosr/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "gosr/common.hpp"
#include "gosr/image_io.hpp"
#include "gosr/rng.hpp"

namespace fs = std::filesystem;

namespace gosr {

void LabeledDataset::validate() const {
  std::set<int> ids(class_ids.begin(), class_ids.end());
  for (const auto& s : samples) {
    if (!ids.count(s.label))
      throw std::runtime_error("dataset " + name + ": sample " + s.id + " has label " +
                               std::to_string(s.label) + " outside class_ids");
    if (s.image.ndim() != 3 || s.image.dim(0) != channels || s.image.dim(1) != height || s.image.dim(2) != width)
      throw std::runtime_error("dataset " + name + ": sample " + s.id + " has shape " + s.image.shape_str() +
                               ", expected " + shape_to_string({channels, height, width}));
  }
}

std::map<int, std::size_t> LabeledDataset::label_histogram() const {
  std::map<int, std::size_t> hist;
  for (const auto& s : samples) hist[s.label]++;
  return hist;
}

namespace {

void check_resolution(const LabeledDataset& ds, const LoadOptions& opt) {
  if (opt.expect_channels && ds.channels != opt.expect_channels)
    throw ConfigError("dataset " + ds.name + ": channel count " + std::to_string(ds.channels) +
                      " does not match required " + std::to_string(opt.expect_channels));
  if (opt.expect_height && ds.height != opt.expect_height)
    throw ConfigError("dataset " + ds.name + ": height " + std::to_string(ds.height) +
                      " does not match required " + std::to_string(opt.expect_height));
  if (opt.expect_width && ds.width != opt.expect_width)
    throw ConfigError("dataset " + ds.name + ": width " + std::to_string(ds.width) +
                      " does not match required " + std::to_string(opt.expect_width));
}

LabeledDataset load_synthetic_blobs(const DataSourceSpec& spec) {
  if (spec.classes < 1 || spec.per_class < 1)
    throw ConfigError("synthetic_blobs: classes and per_class must be positive");
  LabeledDataset ds;
  ds.name = spec.display_name();
  ds.split_tag = spec.split;
  ds.channels = spec.channels;
  ds.height = spec.height;
  ds.width = spec.width;
  const std::int64_t pixels = static_cast<std::int64_t>(spec.channels) * spec.height * spec.width;

  Rng base(spec.seed);
  // Class means depend only on the seed; the per-sample noise stream also
  // depends on the split tag. One seed therefore defines the class layout,
  // and train/test splits draw disjoint noise around shared means.
  Rng mean_rng = base.fork(1);
  std::vector<Tensor> means;
  means.reserve(static_cast<std::size_t>(spec.classes));
  if (!(spec.blob_mean_lo < spec.blob_mean_hi))
    throw ConfigError("synthetic_blobs: blob mean range is empty");
  for (int c = 0; c < spec.classes; ++c) {
    Tensor mu({spec.channels, spec.height, spec.width});
    for (std::int64_t i = 0; i < pixels; ++i) mu[i] = mean_rng.uniform(spec.blob_mean_lo, spec.blob_mean_hi);
    means.push_back(std::move(mu));
  }

  const std::uint64_t split_stream = spec.split == "train" ? 2 : (spec.split == "test" ? 3 : 4);
  Rng sample_rng = base.fork(split_stream);
  int index = 0;
  for (int c = 0; c < spec.classes; ++c) {
    ds.class_ids.push_back(c);
    for (int k = 0; k < spec.per_class; ++k) {
      Sample s;
      s.label = c;
      s.original_label = c;
      s.id = ds.name + ":" + std::to_string(index++);
      s.image = Tensor({spec.channels, spec.height, spec.width});
      double sigma = spec.noise_sigma;
      if (spec.noise_sigma_hi > spec.noise_sigma)
        sigma = sample_rng.uniform(spec.noise_sigma, spec.noise_sigma_hi);
      for (std::int64_t i = 0; i < pixels; ++i) {
        double v = means[static_cast<std::size_t>(c)][i] + sigma * sample_rng.normal();
        s.image[i] = std::clamp(v, 0.0, 1.0);
      }
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

LabeledDataset load_uniform_noise(const DataSourceSpec& spec) {
  if (spec.per_class < 1) throw ConfigError("uniform_noise: per_class must be positive");
  LabeledDataset ds;
  ds.name = spec.display_name();
  ds.split_tag = spec.split;
  ds.channels = spec.channels;
  ds.height = spec.height;
  ds.width = spec.width;
  ds.class_ids = {0};
  const std::int64_t pixels = static_cast<std::int64_t>(spec.channels) * spec.height * spec.width;
  Rng rng = Rng(spec.seed).fork(spec.split == "train" ? 2 : 3);
  for (int k = 0; k < spec.per_class; ++k) {
    Sample s;
    s.label = 0;
    s.original_label = 0;
    s.id = ds.name + ":" + std::to_string(k);
    s.image = Tensor({spec.channels, spec.height, spec.width});
    for (std::int64_t i = 0; i < pixels; ++i) s.image[i] = rng.uniform();
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

// Standard CIFAR-10 binary layout: each record is 1 label byte followed by
// a 32x32 RGB image stored planar (1024 R, 1024 G, 1024 B).
void read_cifar_batch(const fs::path& file, LabeledDataset& ds, int& index) {
  constexpr std::int64_t kImageBytes = 3 * 32 * 32;
  constexpr std::int64_t kRecord = 1 + kImageBytes;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cifar10: cannot open " + file.string());
  std::vector<char> buf(static_cast<std::size_t>(kRecord));
  while (in.read(buf.data(), kRecord)) {
    Sample s;
    s.label = static_cast<unsigned char>(buf[0]);
    if (s.label < 0 || s.label > 9) throw std::runtime_error("cifar10: corrupt label in " + file.string());
    s.original_label = s.label;
    s.id = ds.name + ":" + std::to_string(index++);
    s.image = Tensor({3, 32, 32});
    for (std::int64_t i = 0; i < kImageBytes; ++i)
      s.image[i] = static_cast<unsigned char>(buf[static_cast<std::size_t>(1 + i)]) / 255.0;
    ds.samples.push_back(std::move(s));
  }
  if (in.gcount() != 0) throw std::runtime_error("cifar10: trailing partial record in " + file.string());
}

LabeledDataset load_cifar10(const DataSourceSpec& spec) {
  if (spec.path.empty()) throw ConfigError("cifar10: path is required");
  fs::path root(spec.path);
  if (fs::is_directory(root / "cifar-10-batches-bin")) root /= "cifar-10-batches-bin";
  LabeledDataset ds;
  ds.name = spec.name.empty() ? "cifar10" : spec.name;
  ds.split_tag = spec.split;
  ds.channels = 3;
  ds.height = 32;
  ds.width = 32;
  for (int c = 0; c < 10; ++c) ds.class_ids.push_back(c);
  int index = 0;
  if (spec.split == "train") {
    for (int i = 1; i <= 5; ++i) read_cifar_batch(root / ("data_batch_" + std::to_string(i) + ".bin"), ds, index);
  } else if (spec.split == "test") {
    read_cifar_batch(root / "test_batch.bin", ds, index);
  } else {
    throw ConfigError("cifar10: split must be train or test, got " + spec.split);
  }
  if (ds.empty()) throw std::runtime_error("cifar10: no samples loaded from " + root.string());
  return ds;
}

LabeledDataset load_image_dir(const DataSourceSpec& spec) {
  if (spec.path.empty()) throw ConfigError("image_dir: path is required");
  fs::path root(spec.path);
  if (!fs::is_directory(root)) throw ConfigError("image_dir: not a directory: " + root.string());

  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw ConfigError("image_dir: no class subdirectories in " + root.string());

  LabeledDataset ds;
  ds.name = spec.name.empty() ? root.filename().string() : spec.name;
  ds.split_tag = spec.split;
  int index = 0;
  for (std::size_t c = 0; c < class_dirs.size(); ++c) {
    ds.class_ids.push_back(static_cast<int>(c));
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[c])) {
      auto ext = e.path().extension().string();
      if (e.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Sample s;
      s.label = static_cast<int>(c);
      s.original_label = s.label;
      s.id = ds.name + ":" + std::to_string(index++);
      s.image = read_pnm(f);
      if (ds.channels == 0) {
        ds.channels = s.image.dim(0);
        ds.height = s.image.dim(1);
        ds.width = s.image.dim(2);
      } else if (s.image.dim(0) != ds.channels || s.image.dim(1) != ds.height || s.image.dim(2) != ds.width) {
        throw ConfigError("image_dir: resolution mismatch at " + f.string() + " (" + s.image.shape_str() +
                          " vs " + shape_to_string({ds.channels, ds.height, ds.width}) + ")");
      }
      ds.samples.push_back(std::move(s));
    }
  }
  if (ds.empty()) throw std::runtime_error("image_dir: no images under " + root.string());
  return ds;
}

}  // namespace

LabeledDataset load_dataset(const DataSourceSpec& spec, const LoadOptions& options) {
  LabeledDataset ds;
  if (spec.kind == "synthetic_blobs") ds = load_synthetic_blobs(spec);
  else if (spec.kind == "uniform_noise") ds = load_uniform_noise(spec);
  else if (spec.kind == "cifar10") ds = load_cifar10(spec);
  else if (spec.kind == "image_dir") ds = load_image_dir(spec);
  else throw ConfigError("unknown dataset source kind: " + spec.kind);

  if (ds.empty()) throw std::runtime_error("dataset " + ds.name + " is empty");
  check_resolution(ds, options);
  ds.validate();
  return ds;
}

}  // namespace gosr
