#include "gosr/report.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "gosr/common.hpp"

using nlohmann::json;

namespace gosr {

namespace {

std::string fixed6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

json seed_to_json(const SeedResult& s) {
  json j;
  j["seed"] = s.seed;
  j["failed"] = s.failed;
  if (s.failed) {
    j["error"] = s.error;
    return j;
  }
  j["auroc"] = s.auroc;
  j["openset_accuracy"] = s.openset_accuracy;
  j["closed_set_accuracy"] = s.closed_set_accuracy;
  j["always_known_accuracy"] = s.always_known_accuracy;
  if (s.softmax_auroc) j["softmax_auroc"] = *s.softmax_auroc;
  if (s.softmax_openset_accuracy) j["softmax_openset_accuracy"] = *s.softmax_openset_accuracy;
  j["detector_val_accuracy"] = s.detector_val_accuracy;
  j["detector_val_auroc"] = s.detector_val_auroc;
  j["artifacts"] = s.artifact_hashes;
  j["excluded_feature_sets"] = s.excluded_feature_sets;
  return j;
}

}  // namespace

std::string render_report_json(const ExperimentResult& result) {
  json j;
  j["kind"] = "experiment_report";
  j["version"] = 1;
  j["mode"] = result.mode;
  j["partial"] = result.partial;
  j["config_sha256"] = result.config_hash;
  j["config"] = json::parse(result.config_text);
  // Conventions a reader needs to interpret the numbers.
  json ones = result.ones_count_used < 0 ? json("all_ones") : json(result.ones_count_used);
  j["conventions"] = {{"ones_count", ones},
                      {"tau", result.tau},
                      {"score_polarity", "known"},
                      {"head_mismatch_rule", "feature dimensions with differing parameter-set shapes are excluded"}};
  json seeds = json::array();
  for (const auto& s : result.seeds) seeds.push_back(seed_to_json(s));
  j["per_seed"] = seeds;
  json agg;
  agg["seeds_completed"] = [&] {
    int n = 0;
    for (const auto& s : result.seeds)
      if (!s.failed) ++n;
    return n;
  }();
  agg["mean_auroc"] = result.mean_auroc;
  agg["stddev_auroc"] = result.stddev_auroc;
  agg["mean_openset_accuracy"] = result.mean_openset_accuracy;
  agg["stddev_openset_accuracy"] = result.stddev_openset_accuracy;
  if (result.mean_softmax_auroc) agg["mean_softmax_auroc"] = *result.mean_softmax_auroc;
  if (result.mean_softmax_openset_accuracy)
    agg["mean_softmax_openset_accuracy"] = *result.mean_softmax_openset_accuracy;
  j["aggregate"] = agg;
  return j.dump(2) + "\n";
}

std::string render_report_text(const ExperimentResult& result) {
  std::ostringstream os;
  os << "experiment report (" << result.mode << ")\n";
  os << "config_sha256: " << result.config_hash << "\n";
  os << "ones_count: " << (result.ones_count_used < 0 ? std::string("all_ones") : std::to_string(result.ones_count_used))
     << "  tau: " << fixed6(result.tau) << "  score_polarity: known\n";
  if (result.partial) os << "PARTIAL RESULT: one or more seeds failed\n";
  os << "\n";

  os << "seed      auroc     n+1_acc   closed_acc  det_val_acc";
  bool any_softmax = false;
  for (const auto& s : result.seeds)
    if (s.softmax_auroc) any_softmax = true;
  if (any_softmax) os << "  softmax_auroc";
  os << "\n";
  for (const auto& s : result.seeds) {
    if (s.failed) {
      os << s.seed << "  FAILED: " << s.error << "\n";
      continue;
    }
    char line[160];
    std::snprintf(line, sizeof(line), "%-8llu  %.6f  %.6f  %.6f    %.6f", static_cast<unsigned long long>(s.seed),
                  s.auroc, s.openset_accuracy, s.closed_set_accuracy, s.detector_val_accuracy);
    os << line;
    if (s.softmax_auroc) os << "       " << fixed6(*s.softmax_auroc);
    os << "\n";
  }
  os << "\n";

  const std::string column = result.mode == "identification" ? "AUROC" : "N+1 accuracy";
  os << "method               " << column << " (mean +/- stddev)\n";
  if (result.mode == "identification") {
    if (result.mean_softmax_auroc)
      os << "softmax              " << fixed6(*result.mean_softmax_auroc) << "\n";
    os << "gradient_detector    " << fixed6(result.mean_auroc) << " +/- " << fixed6(result.stddev_auroc) << "\n";
  } else {
    if (result.mean_softmax_openset_accuracy)
      os << "softmax              " << fixed6(*result.mean_softmax_openset_accuracy) << "\n";
    os << "gradient_detector    " << fixed6(result.mean_openset_accuracy) << " +/- "
       << fixed6(result.stddev_openset_accuracy) << "\n";
  }
  return os.str();
}

void emit_report(const ExperimentResult& result, const std::filesystem::path& json_path,
                 const std::filesystem::path& text_path) {
  write_text_file(json_path, render_report_json(result));
  write_text_file(text_path, render_report_text(result));
}

}  // namespace gosr
