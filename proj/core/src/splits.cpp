#include "gosr/splits.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "gosr/common.hpp"
#include "gosr/rng.hpp"

namespace gosr {

void ClassSplit::validate() const {
  auto sorted = [](const std::vector<int>& v) { return std::is_sorted(v.begin(), v.end()); };
  if (!sorted(known_classes) || !sorted(unknown_classes) || !sorted(inner_known) || !sorted(inner_unknown))
    throw std::runtime_error("class split sets must be stored ascending");

  std::set<int> k(known_classes.begin(), known_classes.end());
  std::set<int> u(unknown_classes.begin(), unknown_classes.end());
  for (int c : u)
    if (k.count(c)) throw std::runtime_error("class split: known and unknown sets overlap at " + std::to_string(c));

  std::set<int> kk(inner_known.begin(), inner_known.end());
  std::set<int> ku(inner_unknown.begin(), inner_unknown.end());
  for (int c : ku)
    if (kk.count(c)) throw std::runtime_error("class split: inner sets overlap at " + std::to_string(c));
  std::set<int> inner_union;
  inner_union.insert(kk.begin(), kk.end());
  inner_union.insert(ku.begin(), ku.end());
  if (inner_union != k) throw std::runtime_error("class split: inner sets do not partition the known set");
}

ClassSplit generate_class_split(const std::vector<int>& class_ids, int num_known, int num_inner_known,
                                std::uint64_t seed) {
  const int total = static_cast<int>(class_ids.size());
  if (num_known < 1 || num_known > total)
    throw std::invalid_argument("generate_class_split: num_known out of range");
  if (num_inner_known < 1 || num_inner_known >= num_known)
    throw std::invalid_argument("generate_class_split: need 1 <= num_inner_known < num_known");
  {
    std::set<int> uniq(class_ids.begin(), class_ids.end());
    if (static_cast<int>(uniq.size()) != total)
      throw std::invalid_argument("generate_class_split: duplicate class ids");
  }

  std::vector<int> shuffled = class_ids;
  Rng rng(seed);
  rng.shuffle(shuffled);

  ClassSplit split;
  split.seed = seed;
  split.known_classes.assign(shuffled.begin(), shuffled.begin() + num_known);
  split.unknown_classes.assign(shuffled.begin() + num_known, shuffled.end());
  // The shuffle is uniform, so taking the prefix of the known block as the
  // inner knowns is a uniform subset of K.
  split.inner_known.assign(shuffled.begin(), shuffled.begin() + num_inner_known);
  split.inner_unknown.assign(shuffled.begin() + num_inner_known, shuffled.begin() + num_known);

  auto sort_all = [](std::vector<int>& v) { std::sort(v.begin(), v.end()); };
  sort_all(split.known_classes);
  sort_all(split.unknown_classes);
  sort_all(split.inner_known);
  sort_all(split.inner_unknown);
  split.validate();
  return split;
}

std::string role_name(PartitionRole role) {
  switch (role) {
    case PartitionRole::ClosedTrain: return "closed_train";
    case PartitionRole::DetectorTrainKnown: return "detector_train_known";
    case PartitionRole::DetectorTrainUnknown: return "detector_train_unknown";
    case PartitionRole::KnownTest: return "known_test";
    case PartitionRole::UnknownTest: return "unknown_test";
  }
  throw std::logic_error("unreachable role");
}

PartitionRole role_from_name(const std::string& name) {
  if (name == "closed_train") return PartitionRole::ClosedTrain;
  if (name == "detector_train_known") return PartitionRole::DetectorTrainKnown;
  if (name == "detector_train_unknown") return PartitionRole::DetectorTrainUnknown;
  if (name == "known_test") return PartitionRole::KnownTest;
  if (name == "unknown_test") return PartitionRole::UnknownTest;
  throw ConfigError("unknown partition role: " + name);
}

namespace {

const std::vector<int>& role_class_set(const ClassSplit& split, PartitionRole role) {
  switch (role) {
    case PartitionRole::ClosedTrain:
    case PartitionRole::KnownTest: return split.known_classes;
    case PartitionRole::DetectorTrainKnown: return split.inner_known;
    case PartitionRole::DetectorTrainUnknown: return split.inner_unknown;
    case PartitionRole::UnknownTest: return split.unknown_classes;
  }
  throw std::logic_error("unreachable role");
}

bool role_remaps(PartitionRole role) {
  return role == PartitionRole::ClosedTrain || role == PartitionRole::KnownTest ||
         role == PartitionRole::DetectorTrainKnown;
}

}  // namespace

LabeledDataset partition_dataset(const LabeledDataset& dataset, const ClassSplit& split, PartitionRole role) {
  const std::vector<int>& classes = role_class_set(split, role);
  if (classes.empty())
    throw ConfigError("partition_dataset: role " + role_name(role) + " has an empty class set in this split");

  std::map<int, int> remap;  // ascending original id -> contiguous
  for (std::size_t i = 0; i < classes.size(); ++i) remap[classes[i]] = static_cast<int>(i);

  LabeledDataset out;
  out.name = dataset.name + "/" + role_name(role);
  out.split_tag = dataset.split_tag;
  out.channels = dataset.channels;
  out.height = dataset.height;
  out.width = dataset.width;
  const bool remapped = role_remaps(role);
  for (const auto& s : dataset.samples) {
    auto it = remap.find(s.original_label);
    if (it == remap.end()) continue;
    Sample copy = s;
    copy.original_label = s.original_label;
    copy.label = remapped ? it->second : s.original_label;
    out.samples.push_back(std::move(copy));
  }
  if (out.samples.empty())
    throw std::runtime_error("partition_dataset: role " + role_name(role) + " selected no samples from " +
                             dataset.name);
  if (remapped) {
    out.label_mapping = remap;
    for (std::size_t i = 0; i < classes.size(); ++i) out.class_ids.push_back(static_cast<int>(i));
  } else {
    out.class_ids = classes;
  }
  return out;
}

void OpenSetTestBed::validate() const {
  if (sentinel != static_cast<int>(known_part.class_ids.size()))
    throw std::runtime_error("testbed: sentinel does not equal the number of known classes");
  for (const auto& s : known_part.samples)
    if (s.label < 0 || s.label >= sentinel)
      throw std::runtime_error("testbed: known sample " + s.id + " outside 0..N-1");
  for (const auto& s : unknown_part.samples)
    if (s.label != sentinel) throw std::runtime_error("testbed: unknown sample " + s.id + " not sentinel-labeled");
  if (static_cast<std::int64_t>(known_part.samples.size()) != known_count ||
      static_cast<std::int64_t>(unknown_part.samples.size()) != unknown_count)
    throw std::runtime_error("testbed: recorded counts out of date");
}

namespace {

LabeledDataset subsample(const LabeledDataset& ds, std::int64_t keep, Rng& rng) {
  if (keep == static_cast<std::int64_t>(ds.samples.size())) return ds;
  auto indices = rng.sample_indices(static_cast<std::int64_t>(ds.samples.size()), keep);
  LabeledDataset out = ds;
  out.samples.clear();
  out.samples.reserve(static_cast<std::size_t>(keep));
  for (auto i : indices) out.samples.push_back(ds.samples[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

OpenSetTestBed make_openset_testbed(const LabeledDataset& known_test, const LabeledDataset& unknown_test,
                                    std::optional<Ratio> target_ratio, std::uint64_t seed) {
  if (known_test.empty()) throw std::invalid_argument("make_openset_testbed: known part is empty");
  if (unknown_test.empty()) throw std::invalid_argument("make_openset_testbed: unknown part is empty");

  OpenSetTestBed bed;
  bed.known_part = known_test;
  bed.unknown_part = unknown_test;
  bed.sentinel = static_cast<int>(known_test.class_ids.size());

  if (target_ratio) {
    Ratio r = *target_ratio;
    if (r.known <= 0 || r.unknown <= 0) throw std::invalid_argument("make_openset_testbed: ratio must be positive");
    const std::int64_t g = std::gcd(r.known, r.unknown);
    r.known /= g;
    r.unknown /= g;
    const std::int64_t t = std::min(static_cast<std::int64_t>(known_test.size()) / r.known,
                                    static_cast<std::int64_t>(unknown_test.size()) / r.unknown);
    if (t == 0)
      throw ConfigError("make_openset_testbed: ratio " + std::to_string(r.known) + ":" + std::to_string(r.unknown) +
                        " is unattainable without upsampling (" + std::to_string(known_test.size()) + " known, " +
                        std::to_string(unknown_test.size()) + " unknown)");
    Rng rng(seed);
    Rng known_rng = rng.fork(1);
    Rng unknown_rng = rng.fork(2);
    bed.known_part = subsample(known_test, t * r.known, known_rng);
    bed.unknown_part = subsample(unknown_test, t * r.unknown, unknown_rng);
  }

  // Replace unknown labels with the sentinel; keep originals on the samples.
  for (auto& s : bed.unknown_part.samples) s.label = bed.sentinel;
  bed.unknown_part.class_ids = {bed.sentinel};
  bed.unknown_part.label_mapping.clear();

  bed.known_count = static_cast<std::int64_t>(bed.known_part.samples.size());
  bed.unknown_count = static_cast<std::int64_t>(bed.unknown_part.samples.size());
  bed.validate();
  return bed;
}

Ratio parse_ratio(const std::string& text) {
  auto pos = text.find(':');
  if (pos == std::string::npos) throw ConfigError("ratio must look like \"1:1\", got " + text);
  try {
    Ratio r;
    r.known = std::stoll(text.substr(0, pos));
    r.unknown = std::stoll(text.substr(pos + 1));
    if (r.known <= 0 || r.unknown <= 0) throw ConfigError("ratio parts must be positive: " + text);
    return r;
  } catch (const std::invalid_argument&) {
    throw ConfigError("ratio must look like \"1:1\", got " + text);
  } catch (const std::out_of_range&) {
    throw ConfigError("ratio out of range: " + text);
  }
}

}  // namespace gosr
