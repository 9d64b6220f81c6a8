// gosr: gradient-based open-set recognition experiments.
//
// Stages write into a fixed run-directory layout and are idempotent; the
// run directory is locked to the effective config hash. Exit codes:
// 0 success, 1 user/config error, 2 runtime failure.

#include <cstdlib>
#include <iostream>
#include <mutex>
#include <optional>

#include <CLI11.hpp>

#include "gosr/common.hpp"
#include "gosr/report.hpp"
#include "gosr/stages.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string run_dir = "gosr_run";
  std::optional<std::string> seeds;
  std::optional<double> tau;
  std::optional<int> ones_count;
  std::optional<std::string> baseline;
  std::optional<int> workers;
};

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    try {
      seeds.push_back(std::stoull(token));
    } catch (const std::exception&) {
      throw gosr::ConfigError("--seeds: cannot parse \"" + token + "\"");
    }
  }
  if (seeds.empty()) throw gosr::ConfigError("--seeds: empty list");
  return seeds;
}

// Relative dataset paths resolve against GOSR_DATA_ROOT when it is set.
void resolve_data_root(gosr::DataSourceSpec& spec) {
  const char* root = std::getenv("GOSR_DATA_ROOT");
  if (!root || spec.path.empty()) return;
  fs::path p(spec.path);
  if (p.is_relative()) spec.path = (fs::path(root) / p).string();
}

gosr::ExperimentConfig load_config(const GlobalArgs& args) {
  if (args.config_path.empty()) throw gosr::ConfigError("--config is required");
  gosr::ExperimentConfig cfg = gosr::ExperimentConfig::from_json_text(gosr::read_text_file(args.config_path));
  if (args.seeds) cfg.seeds = parse_seed_list(*args.seeds);
  if (args.tau) cfg.tau = *args.tau;
  if (args.ones_count) cfg.ones_count = *args.ones_count;
  if (args.baseline) {
    if (*args.baseline == "none") cfg.baselines.clear();
    else cfg.baselines = {*args.baseline};
  }
  if (args.workers) cfg.workers = *args.workers;
  resolve_data_root(cfg.train_source);
  resolve_data_root(cfg.test_source);
  if (cfg.outlier_source) resolve_data_root(*cfg.outlier_source);
  cfg.validate();
  return cfg;
}

std::mutex g_log_mutex;

void log_line(const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cout << msg << "\n";
}

enum class Stage { Split, TrainClassifier, Extract, TrainDetector, Evaluate, Plot, RunAll };

int run_stage(Stage stage, const GlobalArgs& args) {
  gosr::ExperimentConfig cfg = load_config(args);
  gosr::ExperimentData data = gosr::load_experiment_data(cfg);
  gosr::RunDirectory run = gosr::RunDirectory::open(args.run_dir, cfg.to_json_text());

  if (stage == Stage::RunAll) {
    gosr::ExperimentResult result = gosr::run_experiment(cfg, data, run, log_line);
    std::cout << gosr::render_report_text(result);
    std::cout << "report: " << run.summary_json().string() << "\n";
    return result.partial ? 2 : 0;
  }

  std::vector<gosr::SeedResult> results;
  for (std::uint64_t seed : cfg.seeds) {
    switch (stage) {
      case Stage::Split:
        gosr::stage_split(cfg, data, run, seed, log_line);
        break;
      case Stage::TrainClassifier:
        gosr::stage_train_classifiers(cfg, data, run, seed, log_line);
        break;
      case Stage::Extract:
        gosr::stage_extract(cfg, data, run, seed, cfg.workers, log_line);
        break;
      case Stage::TrainDetector:
        gosr::stage_train_detector(cfg, data, run, seed, log_line);
        break;
      case Stage::Evaluate:
        results.push_back(gosr::stage_evaluate(cfg, data, run, seed, log_line));
        break;
      case Stage::Plot:
        gosr::stage_plot(cfg, data, run, seed, log_line);
        break;
      case Stage::RunAll:
        break;
    }
  }

  if (stage == Stage::Evaluate) {
    gosr::ExperimentResult result;
    result.mode = cfg.mode;
    result.config_text = cfg.to_json_text();
    result.config_hash = run.config_hash();
    result.ones_count_used = cfg.ones_count;
    result.tau = cfg.tau;
    result.seeds = std::move(results);
    result.aggregate();
    gosr::emit_report(result, run.summary_json(), run.summary_text());
    std::cout << gosr::render_report_text(result);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradient-based open-set recognition experiments"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalArgs args;
  app.add_option("--config", args.config_path, "experiment config JSON")->required(false);
  app.add_option("--run-dir", args.run_dir, "run directory (default gosr_run)");
  app.add_option("--seeds", args.seeds, "comma-separated seed list override");
  app.add_option("--tau", args.tau, "decision threshold override");
  app.add_option("--ones-count", args.ones_count, "confounding-label ones count override (-1 = all ones)");
  app.add_option("--baseline", args.baseline, "baseline score source (softmax|none)");
  app.add_option("--workers", args.workers, "per-seed worker fan-out");

  std::map<std::string, Stage> stages = {
      {"split", Stage::Split},           {"train-classifier", Stage::TrainClassifier},
      {"extract", Stage::Extract},       {"train-detector", Stage::TrainDetector},
      {"evaluate", Stage::Evaluate},     {"plot", Stage::Plot},
      {"run-all", Stage::RunAll},
  };
  std::map<std::string, CLI::App*> subs;
  subs["split"] = app.add_subcommand("split", "write class-split manifests");
  subs["train-classifier"] = app.add_subcommand("train-classifier", "train inner and full closed-set classifiers");
  subs["extract"] = app.add_subcommand("extract", "extract gradient feature tables");
  subs["train-detector"] = app.add_subcommand("train-detector", "train the unknown detector");
  subs["evaluate"] = app.add_subcommand("evaluate", "score the testbed and write reports");
  subs["plot"] = app.add_subcommand("plot", "render known/unknown gradient histograms");
  subs["run-all"] = app.add_subcommand("run-all", "run every stage for every seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    for (const auto& [name, sub] : subs)
      if (sub->parsed()) return run_stage(stages.at(name), args);
    throw gosr::ConfigError("no subcommand given");
  } catch (const gosr::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return 2;
  }
}
