#include "gosr/run_dir.hpp"

#include <json.hpp>

#include "gosr/common.hpp"
#include "gosr/sha256.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace gosr {

RunDirectory RunDirectory::open(const fs::path& root, const std::string& config_text) {
  RunDirectory run;
  run.root_ = root;
  run.config_hash_ = sha256_hex(config_text);

  fs::create_directories(root);
  for (const char* sub : {"splits", "classifiers", "features", "detectors", "reports", "plots"})
    fs::create_directories(root / sub);

  const fs::path lock = root / "run.lock.json";
  if (fs::exists(lock)) {
    json j = json::parse(read_text_file(lock));
    const std::string existing = j.value("config_sha256", "");
    if (existing != run.config_hash_)
      throw ConfigError("run directory " + root.string() + " is locked to config " + existing +
                        " but the effective config hashes to " + run.config_hash_ +
                        "; use a fresh --run-dir or the original config");
  } else {
    json j;
    j["config_sha256"] = run.config_hash_;
    write_text_file(lock, j.dump(2) + "\n");
    write_text_file(root / "config.effective.json", config_text);
  }
  return run;
}

fs::path RunDirectory::split_manifest(std::uint64_t seed) const {
  return splits_dir() / ("seed_" + std::to_string(seed) + ".json");
}

fs::path RunDirectory::classifier_blob(std::uint64_t seed, const std::string& which) const {
  return classifiers_dir() / ("seed_" + std::to_string(seed) + "_" + which + ".bin");
}

fs::path RunDirectory::classifier_manifest(std::uint64_t seed, const std::string& which) const {
  return classifiers_dir() / ("seed_" + std::to_string(seed) + "_" + which + ".json");
}

fs::path RunDirectory::feature_base(std::uint64_t seed, const std::string& which) const {
  return features_dir() / ("seed_" + std::to_string(seed) + "_" + which);
}

fs::path RunDirectory::detector_blob(std::uint64_t seed) const {
  return detectors_dir() / ("seed_" + std::to_string(seed) + ".bin");
}

fs::path RunDirectory::detector_manifest(std::uint64_t seed) const {
  return detectors_dir() / ("seed_" + std::to_string(seed) + ".json");
}

fs::path RunDirectory::seed_report(std::uint64_t seed) const {
  return reports_dir() / ("seed_" + std::to_string(seed) + ".json");
}

fs::path RunDirectory::plot_prefix(std::uint64_t seed) const {
  return plots_dir() / ("seed_" + std::to_string(seed));
}

}  // namespace gosr
