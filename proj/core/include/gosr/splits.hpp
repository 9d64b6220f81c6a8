#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gosr/dataset.hpp"

namespace gosr {

/// Seeded partition of class labels into knowns/unknowns plus the inner
/// "knowns"/"unknowns" split of the known classes used to train the
/// unknown detector without real unknown data.
struct ClassSplit {
  std::vector<int> known_classes;    // K, ascending
  std::vector<int> unknown_classes;  // U, ascending (may be empty)
  std::vector<int> inner_known;      // K_K, ascending
  std::vector<int> inner_unknown;    // K_U, ascending
  std::uint64_t seed = 0;

  /// Set-algebra invariants: K disjoint from U, K_K/K_U partition K.
  void validate() const;
};

ClassSplit generate_class_split(const std::vector<int>& class_ids, int num_known, int num_inner_known,
                                std::uint64_t seed);

enum class PartitionRole {
  ClosedTrain,           // samples of K, labels remapped to 0..N-1
  DetectorTrainKnown,    // samples of K_K, labels remapped to 0..|K_K|-1
  DetectorTrainUnknown,  // samples of K_U, original labels
  KnownTest,             // samples of K, labels remapped to 0..N-1
  UnknownTest,           // samples of U, original labels
};

std::string role_name(PartitionRole role);
PartitionRole role_from_name(const std::string& name);

/// Filters `dataset` down to the classes the role selects from `split`.
/// Classifier-facing roles get labels remapped to contiguous ids in
/// ascending original-id order; the original label is kept on each sample
/// and the mapping is recorded on the returned dataset.
LabeledDataset partition_dataset(const LabeledDataset& dataset, const ClassSplit& split, PartitionRole role);

struct OpenSetTestBed {
  LabeledDataset known_part;    // labels already contiguous 0..N-1
  LabeledDataset unknown_part;  // every label replaced with sentinel N
  int sentinel = 0;             // equals number of known classes N
  std::int64_t known_count = 0;
  std::int64_t unknown_count = 0;

  void validate() const;
};

struct Ratio {
  std::int64_t known = 1;
  std::int64_t unknown = 1;
};

/// Combines known and unknown test sets. When target_ratio is given the
/// larger side is subsampled (seeded, order-preserving); upsampling is
/// refused.
OpenSetTestBed make_openset_testbed(const LabeledDataset& known_test, const LabeledDataset& unknown_test,
                                    std::optional<Ratio> target_ratio = std::nullopt, std::uint64_t seed = 0);

Ratio parse_ratio(const std::string& text);  // "1:1"

}  // namespace gosr
