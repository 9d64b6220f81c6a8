#include "gosr/stages.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "gosr/common.hpp"
#include "gosr/plots.hpp"
#include "gosr/report.hpp"
#include "gosr/sha256.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace gosr {

namespace {

void say(const StageLog& log, const std::string& msg) {
  if (log) log(msg);
}

int resolve_ones_count(const ExperimentConfig& cfg, int num_classes) {
  if (cfg.ones_count < 0) return num_classes;
  if (cfg.ones_count > num_classes)
    throw ConfigError("gradients.ones_count = " + std::to_string(cfg.ones_count) +
                      " exceeds the classifier's class count " + std::to_string(num_classes));
  return cfg.ones_count;
}

ClassSplit expected_split(const ExperimentConfig& cfg, const ExperimentData& data, std::uint64_t seed) {
  return generate_class_split(data.train.class_ids, cfg.num_known, cfg.num_inner_known, seed);
}

json split_to_json(const ClassSplit& split) {
  json j;
  j["kind"] = "split_manifest";
  j["seed"] = split.seed;
  j["known_classes"] = split.known_classes;
  j["unknown_classes"] = split.unknown_classes;
  j["inner_known"] = split.inner_known;
  j["inner_unknown"] = split.inner_unknown;
  return j;
}

ClassSplit split_from_json(const json& j) {
  ClassSplit s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.known_classes = j.at("known_classes").get<std::vector<int>>();
  s.unknown_classes = j.at("unknown_classes").get<std::vector<int>>();
  s.inner_known = j.at("inner_known").get<std::vector<int>>();
  s.inner_unknown = j.at("inner_unknown").get<std::vector<int>>();
  return s;
}

void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    throw ConfigError("missing artifact " + path.string() + "; run `" + producer + "` first");
}

ClassSplit load_split(const RunDirectory& run, std::uint64_t seed) {
  const fs::path path = run.split_manifest(seed);
  require_artifact(path, "split");
  ClassSplit split = split_from_json(json::parse(read_text_file(path)));
  split.validate();
  return split;
}

json remap_to_json(const std::map<int, int>& remap) {
  json arr = json::array();
  for (const auto& [orig, mapped] : remap) arr.push_back({{"original", orig}, {"mapped", mapped}});
  return arr;
}

std::map<int, int> ascending_remap(const std::vector<int>& classes) {
  std::map<int, int> remap;
  for (std::size_t i = 0; i < classes.size(); ++i) remap[classes[i]] = static_cast<int>(i);
  return remap;
}

/// K_train with role tags: 1 for inner-known classes, 0 for inner-unknown,
/// original labels preserved.
std::pair<LabeledDataset, std::vector<int>> detector_feature_set(const LabeledDataset& train,
                                                                 const ClassSplit& split) {
  std::set<int> kk(split.inner_known.begin(), split.inner_known.end());
  std::set<int> ku(split.inner_unknown.begin(), split.inner_unknown.end());
  LabeledDataset out;
  out.name = train.name + "/detector_features";
  out.split_tag = train.split_tag;
  out.channels = train.channels;
  out.height = train.height;
  out.width = train.width;
  out.class_ids = split.known_classes;
  std::vector<int> roles;
  for (const auto& s : train.samples) {
    int role;
    if (kk.count(s.original_label)) role = 1;
    else if (ku.count(s.original_label)) role = 0;
    else continue;
    Sample copy = s;
    copy.label = s.original_label;
    out.samples.push_back(std::move(copy));
    roles.push_back(role);
  }
  if (out.samples.empty()) throw std::runtime_error("detector feature set is empty");
  return {std::move(out), std::move(roles)};
}

/// Testbed flattened for extraction: knowns first then unknowns, roles 1/0.
std::pair<LabeledDataset, std::vector<int>> testbed_dataset(const OpenSetTestBed& bed) {
  LabeledDataset out;
  out.name = "testbed";
  out.split_tag = "test";
  out.channels = bed.known_part.channels;
  out.height = bed.known_part.height;
  out.width = bed.known_part.width;
  for (int c = 0; c <= bed.sentinel; ++c) out.class_ids.push_back(c);
  std::vector<int> roles;
  out.samples.reserve(bed.known_part.samples.size() + bed.unknown_part.samples.size());
  for (const auto& s : bed.known_part.samples) {
    out.samples.push_back(s);
    roles.push_back(1);
  }
  for (const auto& s : bed.unknown_part.samples) {
    out.samples.push_back(s);
    roles.push_back(0);
  }
  return {std::move(out), std::move(roles)};
}

BackboneSpec backbone_for(const ExperimentConfig& cfg, const LabeledDataset& train, int num_classes,
                          std::uint64_t init_seed) {
  BackboneSpec spec = cfg.backbone;
  spec.channels = train.channels;
  spec.height = train.height;
  spec.width = train.width;
  spec.num_classes = num_classes;
  spec.init_seed = init_seed;
  return spec;
}

struct ClassifierPlan {
  std::string which;  // "inner" | "full"
  PartitionRole role;
  std::uint64_t seed_offset;
};

const ClassifierPlan kClassifierPlans[2] = {
    {"inner", PartitionRole::DetectorTrainKnown, stage_seed::kInnerClassifier},
    {"full", PartitionRole::ClosedTrain, stage_seed::kFullClassifier},
};

json load_manifest(const fs::path& path) { return json::parse(read_text_file(path)); }

std::vector<std::pair<std::string, std::vector<int>>> param_sets_from_manifest(const json& manifest) {
  std::vector<std::pair<std::string, std::vector<int>>> out;
  for (const auto& e : manifest.at("parameter_sets"))
    out.emplace_back(e.at("name").get<std::string>(), e.at("shape").get<std::vector<int>>());
  return out;
}

std::map<int, int> mapping_from_manifest(const json& manifest) {
  std::map<int, int> out;
  for (const auto& e : manifest.at("class_mapping")) out[e.at("original").get<int>()] = e.at("mapped").get<int>();
  return out;
}

FeatureProvenance expected_provenance(const std::string& ckpt_hash, const std::string& split_hash, int n, int N,
                                      int P, bool squared) {
  FeatureProvenance p;
  p.checkpoint_hash = ckpt_hash;
  p.split_hash = split_hash;
  p.ones_count = n;
  p.num_classes = N;
  p.num_sets = P;
  p.squared = squared;
  return p;
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  ExperimentData data;
  data.train = load_dataset(cfg.train_source);
  LoadOptions match;
  match.expect_channels = data.train.channels;
  match.expect_height = data.train.height;
  match.expect_width = data.train.width;
  data.test = load_dataset(cfg.test_source, match);
  if (data.test.class_ids != data.train.class_ids)
    throw ConfigError("train and test datasets disagree on class ids");
  if (cfg.mode == "classification") {
    if (!cfg.outlier_source) throw ConfigError("classification mode requires data.outlier_test");
    data.outliers = load_dataset(*cfg.outlier_source, match);
  }
  return data;
}

OpenSetTestBed build_testbed(const ExperimentConfig& cfg, const ExperimentData& data, const ClassSplit& split,
                             std::uint64_t seed) {
  LabeledDataset known = partition_dataset(data.test, split, PartitionRole::KnownTest);
  LabeledDataset unknown;
  if (cfg.mode == "identification") {
    unknown = partition_dataset(data.test, split, PartitionRole::UnknownTest);
  } else {
    unknown = *data.outliers;
  }
  std::optional<Ratio> ratio;
  if (!cfg.ratio.empty()) ratio = parse_ratio(cfg.ratio);
  return make_openset_testbed(known, unknown, ratio, seed + stage_seed::kTestbed);
}

void stage_split(const ExperimentConfig& cfg, const ExperimentData& data, const RunDirectory& run,
                 std::uint64_t seed, const StageLog& log) {
  const fs::path path = run.split_manifest(seed);
  ClassSplit split = expected_split(cfg, data, seed);

  json manifest = split_to_json(split);
  manifest["train_dataset"] = data.train.name;
  manifest["test_dataset"] = data.test.name;
  manifest["remap"] = {{"closed_train", remap_to_json(ascending_remap(split.known_classes))},
                       {"detector_train_known", remap_to_json(ascending_remap(split.inner_known))}};
  json counts;
  auto count_role = [&](const LabeledDataset& ds, const std::vector<int>& classes) {
    std::set<int> keep(classes.begin(), classes.end());
    std::size_t n = 0;
    for (const auto& s : ds.samples)
      if (keep.count(s.original_label)) ++n;
    return n;
  };
  counts["closed_train"] = count_role(data.train, split.known_classes);
  counts["detector_train_known"] = count_role(data.train, split.inner_known);
  counts["detector_train_unknown"] = count_role(data.train, split.inner_unknown);
  counts["known_test"] = count_role(data.test, split.known_classes);
  if (cfg.mode == "identification") counts["unknown_test"] = count_role(data.test, split.unknown_classes);
  else counts["unknown_test"] = data.outliers ? data.outliers->samples.size() : 0;
  manifest["counts"] = counts;
  const std::string text = manifest.dump(2) + "\n";

  if (fs::exists(path)) {
    if (read_text_file(path) == text) {
      say(log, "split seed " + std::to_string(seed) + ": up to date");
      return;
    }
    throw ConfigError("split manifest " + path.string() +
                      " does not match this config/seed; delete it to regenerate");
  }
  write_text_file(path, text);
  say(log, "split seed " + std::to_string(seed) + ": wrote " + path.string());
}

void stage_train_classifiers(const ExperimentConfig& cfg, const ExperimentData& data, const RunDirectory& run,
                             std::uint64_t seed, const StageLog& log) {
  ClassSplit split = load_split(run, seed);

  for (const auto& plan : kClassifierPlans) {
    const fs::path blob = run.classifier_blob(seed, plan.which);
    const fs::path manifest_path = run.classifier_manifest(seed, plan.which);
    LabeledDataset part = partition_dataset(data.train, split, plan.role);
    const std::uint64_t stage = seed + plan.seed_offset;

    if (fs::exists(manifest_path) && fs::exists(blob)) {
      json manifest = load_manifest(manifest_path);
      const bool fresh = manifest.at("backbone").at("init_seed").get<std::uint64_t>() == stage &&
                         manifest.at("backbone").at("num_classes").get<int>() ==
                             static_cast<int>(part.class_ids.size()) &&
                         mapping_from_manifest(manifest) == part.label_mapping &&
                         manifest.at("param_blob_sha256").get<std::string>() == sha256_file(blob);
      if (fresh) {
        say(log, plan.which + " classifier seed " + std::to_string(seed) + ": up to date");
        continue;
      }
      throw ConfigError("stale classifier artifact " + manifest_path.string() +
                        " (does not match the current split); delete it to retrain");
    }

    BackboneSpec spec = backbone_for(cfg, data.train, static_cast<int>(part.class_ids.size()), stage);
    TrainHyper hyper = cfg.classifier_hyper;
    hyper.seed = stage;
    ClassifierCheckpoint ckpt = train_classifier(part, spec, hyper);
    save_classifier(ckpt, blob, manifest_path);
    say(log, plan.which + " classifier seed " + std::to_string(seed) + ": train_acc " +
                 format_double(ckpt.meta.final_train_accuracy) + ", val_acc " +
                 format_double(ckpt.meta.final_val_accuracy));
  }
}

void stage_extract(const ExperimentConfig& cfg, const ExperimentData& data, const RunDirectory& run,
                   std::uint64_t seed, int extract_workers, const StageLog& log) {
  ClassSplit split = load_split(run, seed);
  const std::string split_hash = sha256_file(run.split_manifest(seed));

  struct Job {
    std::string which;           // "train" | "test"
    std::string classifier;     // "inner" | "full"
  };
  const Job jobs[2] = {{"train", "inner"}, {"test", "full"}};

  for (const auto& job : jobs) {
    const fs::path ckpt_blob = run.classifier_blob(seed, job.classifier);
    const fs::path ckpt_manifest = run.classifier_manifest(seed, job.classifier);
    require_artifact(ckpt_manifest, "train-classifier");
    require_artifact(ckpt_blob, "train-classifier");

    LabeledDataset subject;
    std::vector<int> roles;
    if (job.which == "train") {
      std::tie(subject, roles) = detector_feature_set(data.train, split);
    } else {
      OpenSetTestBed bed = build_testbed(cfg, data, split, seed);
      std::tie(subject, roles) = testbed_dataset(bed);
    }

    json manifest = load_manifest(ckpt_manifest);
    const std::string ckpt_hash = manifest.at("param_blob_sha256").get<std::string>();
    const int num_classes = manifest.at("backbone").at("num_classes").get<int>();
    const int num_sets = manifest.at("num_parameter_sets").get<int>();
    const int n = resolve_ones_count(cfg, num_classes);
    const FeatureProvenance want =
        expected_provenance(ckpt_hash, split_hash, n, num_classes, num_sets, cfg.squared);

    const fs::path base = run.feature_base(seed, job.which);
    fs::path bin = base;
    bin += ".bin";
    if (fs::exists(bin)) {
      FeatureTable cached = load_feature_table_bin(bin);
      if (cached.provenance == want && cached.size() == subject.size()) {
        say(log, job.which + " features seed " + std::to_string(seed) + ": up to date");
        continue;
      }
      throw ConfigError("stale feature cache " + bin.string() + " (provenance mismatch); delete it to re-extract");
    }

    ClassifierCheckpoint ckpt = load_classifier(ckpt_blob, ckpt_manifest);
    ConfoundingLabel label = make_confounding_label(num_classes, n);
    ExtractOptions options;
    options.squared = cfg.squared;
    options.workers = extract_workers;
    extract_batch(ckpt, subject, label, roles, base, options, split_hash);
    say(log, job.which + " features seed " + std::to_string(seed) + ": " + std::to_string(subject.size()) +
                 " rows x " + std::to_string(num_sets));
  }
}

void stage_train_detector(const ExperimentConfig& cfg, const ExperimentData&, const RunDirectory& run,
                          std::uint64_t seed, const StageLog& log) {
  const std::string split_hash = sha256_file(run.split_manifest(seed));
  const fs::path inner_manifest_path = run.classifier_manifest(seed, "inner");
  const fs::path full_manifest_path = run.classifier_manifest(seed, "full");
  require_artifact(inner_manifest_path, "train-classifier");
  require_artifact(full_manifest_path, "train-classifier");
  json inner_manifest = load_manifest(inner_manifest_path);
  json full_manifest = load_manifest(full_manifest_path);
  const std::string inner_hash = inner_manifest.at("param_blob_sha256").get<std::string>();
  const std::string full_hash = full_manifest.at("param_blob_sha256").get<std::string>();

  const fs::path blob = run.detector_blob(seed);
  const fs::path manifest_path = run.detector_manifest(seed);
  const std::uint64_t stage = seed + stage_seed::kDetector;
  if (fs::exists(blob) && fs::exists(manifest_path)) {
    json manifest = load_manifest(manifest_path);
    const bool fresh = manifest.at("training").at("seed").get<std::uint64_t>() == stage &&
                       manifest.at("feature_checkpoint_hash").get<std::string>() == inner_hash &&
                       manifest.at("test_checkpoint_hash").get<std::string>() == full_hash;
    if (fresh) {
      say(log, "detector seed " + std::to_string(seed) + ": up to date");
      return;
    }
    throw ConfigError("stale detector artifact " + manifest_path.string() + "; delete it to retrain");
  }

  fs::path features_bin = run.feature_base(seed, "train");
  features_bin += ".bin";
  require_artifact(features_bin, "extract");
  const int inner_classes = inner_manifest.at("backbone").at("num_classes").get<int>();
  const int num_sets = inner_manifest.at("num_parameter_sets").get<int>();
  FeatureTable table = load_feature_table_checked(
      features_bin, expected_provenance(inner_hash, split_hash, resolve_ones_count(cfg, inner_classes),
                                        inner_classes, num_sets, cfg.squared));

  FeatureTable known_rows, unknown_rows;
  known_rows.provenance = table.provenance;
  unknown_rows.provenance = table.provenance;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    FeatureTable& dst = table.role_labels[i] == 1 ? known_rows : unknown_rows;
    dst.rows.push_back(table.rows[i]);
    dst.sample_ids.push_back(table.sample_ids[i]);
    dst.role_labels.push_back(table.role_labels[i]);
  }

  // Head parameter sets change shape with the class count; those feature
  // dimensions mean different things under the inner and the full
  // classifier, so the detector only consumes shape-stable dimensions.
  auto inner_sets = param_sets_from_manifest(inner_manifest);
  auto full_sets = param_sets_from_manifest(full_manifest);
  if (inner_sets.size() != full_sets.size())
    throw std::runtime_error("classifier parameter-set counts disagree between inner and full checkpoints");
  std::vector<int> keep;
  for (std::size_t i = 0; i < inner_sets.size(); ++i) {
    if (inner_sets[i].first != full_sets[i].first)
      throw std::runtime_error("parameter-set order disagrees between inner and full checkpoints at index " +
                               std::to_string(i));
    if (inner_sets[i].second == full_sets[i].second) keep.push_back(static_cast<int>(i));
  }
  if (keep.empty()) throw std::runtime_error("no shape-stable feature dimensions between classifiers");

  DetectorHyper hyper = cfg.detector_hyper;
  hyper.seed = stage;
  DetectorCheckpoint det = train_detector(known_rows, unknown_rows, hyper,
                                          keep.size() == inner_sets.size() ? std::vector<int>{} : keep);
  det.threshold = cfg.tau;
  det.meta.test_checkpoint_hash = full_hash;
  det.meta.ones_policy = cfg.ones_count;
  save_detector(det, blob, manifest_path);
  say(log, "detector seed " + std::to_string(seed) + ": val_acc " + format_double(det.meta.val_accuracy) +
               ", val_auroc " + format_double(det.meta.val_auroc));
}

SeedResult stage_evaluate(const ExperimentConfig& cfg, const ExperimentData& data, const RunDirectory& run,
                          std::uint64_t seed, const StageLog& log) {
  SeedResult result;
  result.seed = seed;

  ClassSplit split = load_split(run, seed);
  const std::string split_hash = sha256_file(run.split_manifest(seed));
  const fs::path full_blob = run.classifier_blob(seed, "full");
  const fs::path full_manifest_path = run.classifier_manifest(seed, "full");
  require_artifact(full_manifest_path, "train-classifier");
  require_artifact(run.detector_manifest(seed), "train-detector");
  fs::path test_bin = run.feature_base(seed, "test");
  test_bin += ".bin";
  require_artifact(test_bin, "extract");

  ClassifierCheckpoint full = load_classifier(full_blob, full_manifest_path);
  DetectorCheckpoint det = load_detector(run.detector_blob(seed), run.detector_manifest(seed));
  if (det.meta.test_checkpoint_hash != full.param_hash)
    throw std::runtime_error("detector " + run.detector_manifest(seed).string() +
                             " was trained against a different full classifier; rerun train-detector");

  const int n = resolve_ones_count(cfg, full.num_classes());
  FeatureTable table = load_feature_table_checked(
      test_bin, expected_provenance(full.param_hash, split_hash, n, full.num_classes(),
                                    full.net->num_param_sets(), cfg.squared));

  OpenSetTestBed bed = build_testbed(cfg, data, split, seed);
  auto [subject, roles] = testbed_dataset(bed);
  if (subject.size() != table.size())
    throw std::runtime_error("test feature table size does not match the testbed; re-extract");
  for (std::size_t i = 0; i < subject.samples.size(); ++i)
    if (subject.samples[i].id != table.sample_ids[i])
      throw std::runtime_error("test feature table order does not match the testbed; re-extract");

  // Detector scores over cached features.
  ScoredSet scored;
  scored.scores.reserve(table.size());
  scored.truth = roles;
  for (const auto& row : table.rows) scored.scores.push_back(score(det, row));
  result.auroc = auroc(scored);

  // Closed-set predictions for routing.
  Tensor images = stack_images(subject);
  Tensor probs = predict(full, images);
  const int num_classes = full.num_classes();
  std::vector<int> closed(subject.size());
  for (std::size_t i = 0; i < subject.size(); ++i) {
    const double* row = probs.data.data() + static_cast<std::size_t>(i) * num_classes;
    int best = 0;
    for (int c = 1; c < num_classes; ++c)
      if (row[c] > row[best]) best = c;
    closed[i] = best;
  }
  std::vector<int> truths = collect_labels(subject);

  std::vector<int> final_classes(subject.size());
  std::vector<int> always_known(subject.size());
  for (std::size_t i = 0; i < subject.size(); ++i) {
    final_classes[i] = route_final_class(closed[i], scored.scores[i], cfg.tau, bed.sentinel);
    always_known[i] = closed[i];
  }
  result.openset_accuracy = openset_accuracy(final_classes, truths);
  result.always_known_accuracy = openset_accuracy(always_known, truths);

  std::size_t known_correct = 0, known_total = 0;
  for (std::size_t i = 0; i < subject.size(); ++i) {
    if (roles[i] != 1) continue;
    ++known_total;
    if (closed[i] == truths[i]) ++known_correct;
  }
  result.closed_set_accuracy = known_total ? static_cast<double>(known_correct) / known_total : 0.0;

  const bool want_softmax = std::find(cfg.baselines.begin(), cfg.baselines.end(), "softmax") != cfg.baselines.end();
  if (want_softmax) {
    std::vector<double> soft = softmax_baseline_scores(full, images);
    ScoredSet soft_set{soft, roles};
    result.softmax_auroc = auroc(soft_set);
    std::vector<int> soft_final(subject.size());
    for (std::size_t i = 0; i < subject.size(); ++i)
      soft_final[i] = route_final_class(closed[i], soft[i], cfg.tau, bed.sentinel);
    result.softmax_openset_accuracy = openset_accuracy(soft_final, truths);
  }

  result.detector_val_accuracy = det.meta.val_accuracy;
  result.detector_val_auroc = det.meta.val_auroc;

  // Excluded head dimensions, by parameter-set name.
  if (!det.feature_indices.empty()) {
    auto sets = full.net->parameter_sets();
    std::set<int> kept(det.feature_indices.begin(), det.feature_indices.end());
    for (int i = 0; i < static_cast<int>(sets.size()); ++i)
      if (!kept.count(i)) result.excluded_feature_sets.push_back(sets[static_cast<std::size_t>(i)].first);
  }

  fs::path train_csv = run.feature_base(seed, "train");
  train_csv += ".csv";
  fs::path test_csv = run.feature_base(seed, "test");
  test_csv += ".csv";
  result.artifact_hashes["split_manifest"] = split_hash;
  result.artifact_hashes["classifier_inner"] =
      load_manifest(run.classifier_manifest(seed, "inner")).at("param_blob_sha256").get<std::string>();
  result.artifact_hashes["classifier_full"] = full.param_hash;
  result.artifact_hashes["features_train_csv"] = sha256_file(train_csv);
  result.artifact_hashes["features_test_csv"] = sha256_file(test_csv);
  result.artifact_hashes["detector"] = sha256_file(run.detector_blob(seed));

  // Per-seed report doubles as the testbed record.
  json j;
  j["kind"] = "seed_report";
  j["seed"] = seed;
  j["mode"] = cfg.mode;
  j["testbed"] = {{"known_count", bed.known_count},
                  {"unknown_count", bed.unknown_count},
                  {"sentinel", bed.sentinel},
                  {"tau", cfg.tau},
                  {"ones_count", n}};
  j["metrics"] = {{"auroc", result.auroc},
                  {"openset_accuracy", result.openset_accuracy},
                  {"closed_set_accuracy", result.closed_set_accuracy},
                  {"always_known_accuracy", result.always_known_accuracy},
                  {"detector_val_accuracy", result.detector_val_accuracy},
                  {"detector_val_auroc", result.detector_val_auroc}};
  if (result.softmax_auroc) j["metrics"]["softmax_auroc"] = *result.softmax_auroc;
  if (result.softmax_openset_accuracy) j["metrics"]["softmax_openset_accuracy"] = *result.softmax_openset_accuracy;
  j["artifacts"] = result.artifact_hashes;
  j["excluded_feature_sets"] = result.excluded_feature_sets;
  write_text_file(run.seed_report(seed), j.dump(2) + "\n");

  say(log, "evaluate seed " + std::to_string(seed) + ": auroc " + format_double(result.auroc) + ", n+1 acc " +
               format_double(result.openset_accuracy));
  return result;
}

std::vector<fs::path> stage_plot(const ExperimentConfig& cfg, const ExperimentData&, const RunDirectory& run,
                                 std::uint64_t seed, const StageLog& log) {
  fs::path features_bin = run.feature_base(seed, "train");
  features_bin += ".bin";
  require_artifact(features_bin, "extract");
  FeatureTable table = load_feature_table_bin(features_bin);
  (void)cfg;
  auto paths = plot_gradient_distributions(table, {}, run.plot_prefix(seed));
  say(log, "plots seed " + std::to_string(seed) + ": " + std::to_string(paths.size()) + " files");
  return paths;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data, const RunDirectory& run,
                                const StageLog& log) {
  cfg.validate();
  ExperimentResult result;
  result.mode = cfg.mode;
  result.config_text = cfg.to_json_text();
  result.config_hash = run.config_hash();
  result.ones_count_used = cfg.ones_count;
  result.tau = cfg.tau;
  result.seeds.resize(cfg.seeds.size());

  parallel_for(static_cast<std::int64_t>(cfg.seeds.size()), cfg.workers, [&](std::int64_t i) {
    const std::uint64_t seed = cfg.seeds[static_cast<std::size_t>(i)];
    SeedResult& slot = result.seeds[static_cast<std::size_t>(i)];
    try {
      stage_split(cfg, data, run, seed, log);
      stage_train_classifiers(cfg, data, run, seed, log);
      stage_extract(cfg, data, run, seed, /*extract_workers=*/1, log);
      stage_train_detector(cfg, data, run, seed, log);
      slot = stage_evaluate(cfg, data, run, seed, log);
      stage_plot(cfg, data, run, seed, log);
    } catch (const std::exception& e) {
      slot.seed = seed;
      slot.failed = true;
      slot.error = e.what();
      say(log, "seed " + std::to_string(seed) + " FAILED: " + slot.error);
    }
  });

  result.aggregate();
  emit_report(result, run.summary_json(), run.summary_text());
  return result;
}

namespace {

ExperimentResult run_mode(const ExperimentConfig& cfg, const fs::path& run_root, const char* mode,
                          const StageLog& log) {
  if (cfg.mode != mode)
    throw ConfigError(std::string("config mode is ") + cfg.mode + ", expected " + mode);
  cfg.validate();
  ExperimentData data = load_experiment_data(cfg);
  RunDirectory run = RunDirectory::open(run_root, cfg.to_json_text());
  return run_experiment(cfg, data, run, log);
}

}  // namespace

ExperimentResult run_identification(const ExperimentConfig& cfg, const fs::path& run_root, const StageLog& log) {
  return run_mode(cfg, run_root, "identification", log);
}

ExperimentResult run_classification(const ExperimentConfig& cfg, const fs::path& run_root, const StageLog& log) {
  return run_mode(cfg, run_root, "classification", log);
}

}  // namespace gosr
