#pragma once

#include <functional>
#include <optional>

#include "gosr/pipeline.hpp"
#include "gosr/run_dir.hpp"
#include "gosr/splits.hpp"

namespace gosr {

/// Stage seed streams: every stage derives its RNG seed as base + offset,
/// so one config seed pins the split, both classifier initializations,
/// detector training, and testbed subsampling.
namespace stage_seed {
constexpr std::uint64_t kInnerClassifier = 1000003;
constexpr std::uint64_t kFullClassifier = 2000003;
constexpr std::uint64_t kDetector = 3000017;
constexpr std::uint64_t kTestbed = 4000037;
}  // namespace stage_seed

/// Input datasets loaded once and shared (immutable) across seeds.
struct ExperimentData {
  LabeledDataset train;
  LabeledDataset test;
  std::optional<LabeledDataset> outliers;
};

ExperimentData load_experiment_data(const ExperimentConfig& cfg);

using StageLog = std::function<void(const std::string&)>;

/// Every stage is idempotent: an existing artifact whose provenance checks
/// out is reported "up to date" and left byte-identical; a provenance
/// mismatch is an error naming the stale artifact. Missing upstream
/// artifacts are errors naming what to run first.
void stage_split(const ExperimentConfig& cfg, const ExperimentData& data, const RunDirectory& run,
                 std::uint64_t seed, const StageLog& log = {});
void stage_train_classifiers(const ExperimentConfig& cfg, const ExperimentData& data, const RunDirectory& run,
                             std::uint64_t seed, const StageLog& log = {});
void stage_extract(const ExperimentConfig& cfg, const ExperimentData& data, const RunDirectory& run,
                   std::uint64_t seed, int extract_workers = 1, const StageLog& log = {});
void stage_train_detector(const ExperimentConfig& cfg, const ExperimentData& data, const RunDirectory& run,
                          std::uint64_t seed, const StageLog& log = {});
SeedResult stage_evaluate(const ExperimentConfig& cfg, const ExperimentData& data, const RunDirectory& run,
                          std::uint64_t seed, const StageLog& log = {});
std::vector<std::filesystem::path> stage_plot(const ExperimentConfig& cfg, const ExperimentData& data,
                                              const RunDirectory& run, std::uint64_t seed,
                                              const StageLog& log = {});

/// Runs every stage for every seed (optionally fanning seeds across
/// workers), writes the summary report pair, and returns the aggregated
/// result. A failing seed is recorded and does not abort the others.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data, const RunDirectory& run,
                                const StageLog& log = {});

ExperimentResult run_identification(const ExperimentConfig& cfg, const std::filesystem::path& run_root,
                                    const StageLog& log = {});
ExperimentResult run_classification(const ExperimentConfig& cfg, const std::filesystem::path& run_root,
                                    const StageLog& log = {});

/// The open-set testbed a seed evaluates on, rebuilt deterministically
/// from the loaded datasets and the seed's split.
OpenSetTestBed build_testbed(const ExperimentConfig& cfg, const ExperimentData& data, const ClassSplit& split,
                             std::uint64_t seed);

}  // namespace gosr
