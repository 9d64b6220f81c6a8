#include <doctest.h>

#include "gosr/common.hpp"
#include "gosr/report.hpp"
#include "gosr/sha256.hpp"
#include "gosr/stages.hpp"
#include "test_support.hpp"

using namespace gosr;
using gosr_test::TempDir;

TEST_CASE("end-to-end identification run produces every stage artifact") {
  TempDir dir("run");
  ExperimentConfig cfg = gosr_test::tiny_identification_config();
  ExperimentData data = load_experiment_data(cfg);
  RunDirectory run = RunDirectory::open(dir.path() / "r1", cfg.to_json_text());

  ExperimentResult result = run_experiment(cfg, data, run);
  CHECK(!result.partial);
  REQUIRE(result.seeds.size() == 2);
  for (const auto& s : result.seeds) {
    CHECK(!s.failed);
    CHECK(s.auroc > 0.0);
    CHECK(s.auroc <= 1.0);
    CHECK(s.openset_accuracy > 0.0);
    // head dims differ between the 2-class inner and 4-class full heads
    CHECK(s.excluded_feature_sets == std::vector<std::string>{"fc2.weight", "fc2.bias"});
  }

  for (std::uint64_t seed : cfg.seeds) {
    CHECK(std::filesystem::exists(run.split_manifest(seed)));
    CHECK(std::filesystem::exists(run.classifier_blob(seed, "inner")));
    CHECK(std::filesystem::exists(run.classifier_blob(seed, "full")));
    auto train_csv = run.feature_base(seed, "train");
    train_csv += ".csv";
    CHECK(std::filesystem::exists(train_csv));
    auto test_bin = run.feature_base(seed, "test");
    test_bin += ".bin";
    CHECK(std::filesystem::exists(test_bin));
    CHECK(std::filesystem::exists(run.detector_blob(seed)));
    CHECK(std::filesystem::exists(run.seed_report(seed)));
  }
  CHECK(std::filesystem::exists(run.summary_json()));
  CHECK(std::filesystem::exists(run.summary_text()));

  // Detector-training features carry both roles.
  auto train_bin = run.feature_base(0, "train");
  train_bin += ".bin";
  FeatureTable table = load_feature_table_bin(train_bin);
  int known = 0, unknown = 0;
  for (int r : table.role_labels) (r == 1 ? known : unknown)++;
  CHECK(known == 2 * 20);
  CHECK(unknown == 2 * 20);

  SUBCASE("recorded artifact hashes resolve to the files on disk") {
    const SeedResult& s0 = result.seeds[0];
    auto train_csv = run.feature_base(0, "train");
    train_csv += ".csv";
    auto test_csv = run.feature_base(0, "test");
    test_csv += ".csv";
    CHECK(s0.artifact_hashes.at("split_manifest") == sha256_file(run.split_manifest(0)));
    CHECK(s0.artifact_hashes.at("classifier_full") == sha256_file(run.classifier_blob(0, "full")));
    CHECK(s0.artifact_hashes.at("classifier_inner") == sha256_file(run.classifier_blob(0, "inner")));
    CHECK(s0.artifact_hashes.at("features_train_csv") == sha256_file(train_csv));
    CHECK(s0.artifact_hashes.at("features_test_csv") == sha256_file(test_csv));
    CHECK(s0.artifact_hashes.at("detector") == sha256_file(run.detector_blob(0)));
  }

  SUBCASE("second run is up to date everywhere and byte-identical") {
    std::vector<std::string> log;
    auto summary_before = read_text_file(run.summary_json());
    auto split_before = read_text_file(run.split_manifest(0));
    ExperimentResult again = run_experiment(cfg, data, run, [&](const std::string& m) { log.push_back(m); });
    CHECK(!again.partial);
    int up_to_date = 0;
    for (const auto& m : log)
      if (m.find("up to date") != std::string::npos) ++up_to_date;
    CHECK(up_to_date >= 10);  // split + 2 classifiers + 2 feature tables + detector, per seed
    CHECK(read_text_file(run.summary_json()) == summary_before);
    CHECK(read_text_file(run.split_manifest(0)) == split_before);
  }

  SUBCASE("run directory refuses a different config") {
    ExperimentConfig other = cfg;
    other.tau = 0.9;
    CHECK_THROWS_WITH_AS(RunDirectory::open(run.root(), other.to_json_text()), doctest::Contains("locked"),
                         ConfigError);
  }

  SUBCASE("corrupted split manifest is reported stale") {
    auto path = run.split_manifest(0);
    auto tampered = read_text_file(path);
    tampered.replace(tampered.find("\"seed\""), 6, "\"sead\"");
    write_text_file(path, tampered);
    CHECK_THROWS_WITH_AS(stage_split(cfg, data, run, 0), doctest::Contains("does not match"), ConfigError);
  }
}

TEST_CASE("stages demand their upstream artifacts") {
  TempDir dir("order");
  ExperimentConfig cfg = gosr_test::tiny_identification_config();
  ExperimentData data = load_experiment_data(cfg);
  RunDirectory run = RunDirectory::open(dir.path() / "r", cfg.to_json_text());

  CHECK_THROWS_WITH_AS(stage_train_classifiers(cfg, data, run, 0), doctest::Contains("split"), ConfigError);
  stage_split(cfg, data, run, 0);
  CHECK_THROWS_WITH_AS(stage_extract(cfg, data, run, 0), doctest::Contains("train-classifier"), ConfigError);
  stage_train_classifiers(cfg, data, run, 0);
  CHECK_THROWS_WITH_AS(stage_train_detector(cfg, data, run, 0), doctest::Contains("extract"), ConfigError);
  stage_extract(cfg, data, run, 0);
  CHECK_THROWS_WITH_AS(stage_evaluate(cfg, data, run, 0), doctest::Contains("train-detector"), ConfigError);
  stage_train_detector(cfg, data, run, 0);
  SeedResult r = stage_evaluate(cfg, data, run, 0);
  CHECK(!r.failed);
  auto plots = stage_plot(cfg, data, run, 0);
  CHECK(plots.size() == 2);
}

TEST_CASE("classification mode with noise outliers") {
  TempDir dir("cls");
  ExperimentConfig cfg = gosr_test::tiny_identification_config();
  cfg.mode = "classification";
  cfg.num_known = 6;
  cfg.num_inner_known = 4;
  cfg.seeds = {0};
  cfg.tau = 0.9;
  cfg.ratio = "1:1";
  DataSourceSpec noise;
  noise.kind = "uniform_noise";
  noise.per_class = 60;
  noise.channels = 1;
  noise.height = 8;
  noise.width = 8;
  noise.split = "test";
  noise.seed = 5;
  noise.name = "noise";
  cfg.outlier_source = noise;
  cfg.validate();

  ExperimentData data = load_experiment_data(cfg);
  RunDirectory run = RunDirectory::open(dir.path() / "r", cfg.to_json_text());
  ExperimentResult result = run_experiment(cfg, data, run);
  REQUIRE(!result.partial);
  const SeedResult& s = result.seeds[0];
  // 60 known test samples (6x10) against 60 noise outliers at 1:1
  ClassSplit split = generate_class_split(data.train.class_ids, 6, 4, 0);
  OpenSetTestBed bed = build_testbed(cfg, data, split, 0);
  CHECK(bed.known_count == 60);
  CHECK(bed.unknown_count == 60);
  CHECK(bed.sentinel == 6);
  // this tiny fixture only needs to separate at all; the desk-scale
  // acceptance suite owns the strength requirement
  CHECK(s.auroc > 0.55);
  CHECK(s.openset_accuracy > 0.0);
}

TEST_CASE("a failing seed marks the result partial") {
  TempDir dir("fail");
  ExperimentConfig cfg = gosr_test::tiny_identification_config();
  cfg.seeds = {0};
  cfg.detector_hyper.batch_size = 1;  // rejected by train_detector
  ExperimentData data = load_experiment_data(cfg);
  RunDirectory run = RunDirectory::open(dir.path() / "r", cfg.to_json_text());
  ExperimentResult result = run_experiment(cfg, data, run);
  CHECK(result.partial);
  REQUIRE(result.seeds.size() == 1);
  CHECK(result.seeds[0].failed);
  CHECK(result.seeds[0].error.find("hyperparameters") != std::string::npos);
  CHECK(read_text_file(run.summary_text()).find("PARTIAL") != std::string::npos);
}
