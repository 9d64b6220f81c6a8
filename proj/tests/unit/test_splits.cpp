#include <doctest.h>

#include <set>

#include "gosr/common.hpp"
#include "gosr/sha256.hpp"
#include "gosr/splits.hpp"
#include "test_support.hpp"

using namespace gosr;

namespace {
const std::vector<int> kTen = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
}

TEST_CASE("generate_class_split sizes for the 6/4 with 4/2 inner layout") {
  ClassSplit s = generate_class_split(kTen, 6, 4, 0);
  CHECK(s.known_classes.size() == 6);
  CHECK(s.unknown_classes.size() == 4);
  CHECK(s.inner_known.size() == 4);
  CHECK(s.inner_unknown.size() == 2);
  s.validate();
}

TEST_CASE("full-known split leaves no unknowns") {
  ClassSplit s = generate_class_split(kTen, 10, 6, 3);
  CHECK(s.unknown_classes.empty());
  CHECK(s.known_classes == kTen);
  CHECK(s.inner_known.size() == 6);
  CHECK(s.inner_unknown.size() == 4);
}

TEST_CASE("split fixtures are frozen per seed") {
  // Values produced once by the reference shuffler; determinism contract.
  ClassSplit s0 = generate_class_split(kTen, 6, 4, 0);
  ClassSplit s1 = generate_class_split(kTen, 6, 4, 1);
  CHECK(s0.known_classes == std::vector<int>{1, 2, 4, 5, 6, 7});
  CHECK(s0.inner_known == std::vector<int>{1, 2, 4, 7});
  CHECK(s1.known_classes == std::vector<int>{0, 2, 3, 5, 8, 9});
  bool differ = s0.known_classes != s1.known_classes || s0.inner_known != s1.inner_known;
  CHECK(differ);
  // identical inputs: identical split
  ClassSplit again = generate_class_split(kTen, 6, 4, 0);
  CHECK(again.known_classes == s0.known_classes);
  CHECK(again.inner_unknown == s0.inner_unknown);
}

TEST_CASE("split preconditions") {
  CHECK_THROWS_AS(generate_class_split(kTen, 11, 4, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_class_split(kTen, 6, 6, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_class_split(kTen, 6, 0, 0), std::invalid_argument);
  CHECK_THROWS_AS(generate_class_split({1, 1, 2}, 2, 1, 0), std::invalid_argument);
}

TEST_CASE("set algebra holds over many seeds") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    ClassSplit s = generate_class_split(kTen, 6, 4, seed);
    CHECK_NOTHROW(s.validate());
  }
}

TEST_CASE("partition_dataset filters and remaps") {
  LabeledDataset ds = gosr_test::tiny_blobs(10, 6);
  ClassSplit split = generate_class_split(kTen, 6, 4, 0);

  LabeledDataset closed = partition_dataset(ds, split, PartitionRole::ClosedTrain);
  CHECK(closed.size() == 36);
  CHECK(closed.class_ids.size() == 6);
  std::set<int> kept(split.known_classes.begin(), split.known_classes.end());
  for (const auto& s : closed.samples) {
    CHECK(kept.count(s.original_label) == 1);
    CHECK(s.label == closed.label_mapping.at(s.original_label));
  }

  LabeledDataset dk = partition_dataset(ds, split, PartitionRole::DetectorTrainKnown);
  LabeledDataset du = partition_dataset(ds, split, PartitionRole::DetectorTrainUnknown);
  CHECK(dk.size() + du.size() == closed.size());
  CHECK(du.label_mapping.empty());
  for (const auto& s : du.samples) CHECK(s.label == s.original_label);

  SUBCASE("partition is idempotent") {
    LabeledDataset again = partition_dataset(ds, split, PartitionRole::ClosedTrain);
    CHECK(again.size() == closed.size());
    for (std::size_t i = 0; i < again.size(); ++i) {
      CHECK(again.samples[i].id == closed.samples[i].id);
      CHECK(again.samples[i].label == closed.samples[i].label);
    }
  }

  SUBCASE("empty role errors") {
    ClassSplit all_known = generate_class_split(kTen, 10, 6, 3);
    CHECK_THROWS_AS(partition_dataset(ds, all_known, PartitionRole::UnknownTest), ConfigError);
  }
}

TEST_CASE("role names round trip") {
  for (auto role : {PartitionRole::ClosedTrain, PartitionRole::DetectorTrainKnown,
                    PartitionRole::DetectorTrainUnknown, PartitionRole::KnownTest, PartitionRole::UnknownTest})
    CHECK(role_from_name(role_name(role)) == role);
  CHECK_THROWS_AS(role_from_name("nope"), ConfigError);
}

TEST_CASE("testbed at natural ratio") {
  LabeledDataset test = gosr_test::tiny_blobs(10, 10, 8, 1, 7, "test");
  ClassSplit split = generate_class_split(kTen, 6, 4, 0);
  LabeledDataset known = partition_dataset(test, split, PartitionRole::KnownTest);
  LabeledDataset unknown = partition_dataset(test, split, PartitionRole::UnknownTest);

  OpenSetTestBed bed = make_openset_testbed(known, unknown);
  CHECK(bed.sentinel == 6);
  CHECK(bed.known_count == 60);
  CHECK(bed.unknown_count == 40);
  for (const auto& s : bed.unknown_part.samples) CHECK(s.label == 6);
}

TEST_CASE("testbed ratio subsampling is seeded and frozen") {
  LabeledDataset test = gosr_test::tiny_blobs(10, 10, 8, 1, 7, "test");
  ClassSplit split = generate_class_split(kTen, 6, 4, 0);
  LabeledDataset known = partition_dataset(test, split, PartitionRole::KnownTest);
  LabeledDataset unknown = partition_dataset(test, split, PartitionRole::UnknownTest);

  OpenSetTestBed bed = make_openset_testbed(known, unknown, Ratio{1, 1}, 99);
  CHECK(bed.known_count == 40);
  CHECK(bed.unknown_count == 40);

  // order-preserving subsample
  for (std::size_t i = 1; i < bed.known_part.samples.size(); ++i)
    CHECK(bed.known_part.samples[i].id > bed.known_part.samples[i - 1].id);

  // frozen fixture: hash of the selected known sample ids
  std::string joined;
  for (const auto& s : bed.known_part.samples) joined += s.id + ";";
  CHECK(sha256_hex(joined) == "27843874c666b46bf186454bc942f65ca8ebd93b2cc97276dc9eeb75d9a9314b");

  OpenSetTestBed again = make_openset_testbed(known, unknown, Ratio{1, 1}, 99);
  std::string joined2;
  for (const auto& s : again.known_part.samples) joined2 += s.id + ";";
  CHECK(joined2 == joined);
}

TEST_CASE("testbed edge cases") {
  LabeledDataset test = gosr_test::tiny_blobs(10, 10, 8, 1, 7, "test");
  ClassSplit split = generate_class_split(kTen, 6, 4, 0);
  LabeledDataset known = partition_dataset(test, split, PartitionRole::KnownTest);
  LabeledDataset unknown = partition_dataset(test, split, PartitionRole::UnknownTest);

  LabeledDataset empty = known;
  empty.samples.clear();
  CHECK_THROWS_AS(make_openset_testbed(known, empty), std::invalid_argument);

  // 100:1 needs 4000 knowns against 40 unknowns; refuse upsampling
  CHECK_THROWS_AS(make_openset_testbed(known, unknown, Ratio{100, 1}, 0), ConfigError);

  CHECK(parse_ratio("1:1").known == 1);
  CHECK(parse_ratio("3:2").unknown == 2);
  CHECK_THROWS_AS(parse_ratio("11"), ConfigError);
  CHECK_THROWS_AS(parse_ratio("a:b"), ConfigError);
}
