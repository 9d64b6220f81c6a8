#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gosr/tensor.hpp"

namespace gosr {

struct Sample {
  Tensor image;  // {C,H,W}, values in [0,1]
  int label = 0;
  int original_label = 0;  // label before any remapping
  std::string id;          // "<dataset>:<index>", stable across loads
};

struct LabeledDataset {
  std::string name;
  std::vector<Sample> samples;
  std::vector<int> class_ids;  // ascending
  std::string split_tag;       // "train" or "test"
  std::map<int, int> label_mapping;  // original -> contiguous; empty when unmapped
  int channels = 0, height = 0, width = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  /// Checks that every sample label is a member of class_ids and that
  /// image shapes agree with the declared resolution.
  void validate() const;

  /// Per-class sample counts keyed by (possibly remapped) label.
  std::map<int, std::size_t> label_histogram() const;
};

/// Where a dataset comes from. kind selects the loader:
///   synthetic_blobs  seeded Gaussian class blobs in pixel space
///   uniform_noise    seeded uniform-noise images (single class 0)
///   cifar10          standard binary layout under `path`
///   image_dir        path/<class_name>/*.ppm|*.pgm, classes by sorted dir name
struct DataSourceSpec {
  std::string kind = "synthetic_blobs";
  std::string path;
  std::string split = "train";  // cifar10: selects batch files; others: tag only
  int classes = 10;
  int per_class = 100;
  int channels = 3, height = 32, width = 32;
  double noise_sigma = 0.15;
  // when > noise_sigma, each sample draws its own noise level uniformly
  // from [noise_sigma, noise_sigma_hi]; mixed difficulty spreads the
  // classifier's confidence the way natural data does
  double noise_sigma_hi = 0.0;
  // blob centers are drawn uniformly per pixel from this range; narrowing
  // it packs the classes closer together and makes the task harder
  double blob_mean_lo = 0.15, blob_mean_hi = 0.85;
  std::uint64_t seed = 0;
  std::string name;  // optional display name; defaults to kind

  std::string display_name() const { return name.empty() ? kind : name; }
};

struct LoadOptions {
  // When nonzero, loaded images must match this resolution exactly.
  int expect_channels = 0, expect_height = 0, expect_width = 0;
};

LabeledDataset load_dataset(const DataSourceSpec& spec, const LoadOptions& options = {});

}  // namespace gosr
