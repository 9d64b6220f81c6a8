#pragma once

#include <filesystem>
#include <string>

namespace gosr {

/// Fixed-layout experiment directory. A lockfile pins the effective config
/// hash; reopening with a different config is refused so artifacts from
/// different configs never mix.
class RunDirectory {
 public:
  /// Creates the layout (or validates an existing one) for the given
  /// effective config text.
  static RunDirectory open(const std::filesystem::path& root, const std::string& config_text);

  const std::filesystem::path& root() const { return root_; }
  const std::string& config_hash() const { return config_hash_; }

  std::filesystem::path splits_dir() const { return root_ / "splits"; }
  std::filesystem::path classifiers_dir() const { return root_ / "classifiers"; }
  std::filesystem::path features_dir() const { return root_ / "features"; }
  std::filesystem::path detectors_dir() const { return root_ / "detectors"; }
  std::filesystem::path reports_dir() const { return root_ / "reports"; }
  std::filesystem::path plots_dir() const { return root_ / "plots"; }

  std::filesystem::path split_manifest(std::uint64_t seed) const;
  std::filesystem::path classifier_blob(std::uint64_t seed, const std::string& which) const;
  std::filesystem::path classifier_manifest(std::uint64_t seed, const std::string& which) const;
  std::filesystem::path feature_base(std::uint64_t seed, const std::string& which) const;  // no extension
  std::filesystem::path detector_blob(std::uint64_t seed) const;
  std::filesystem::path detector_manifest(std::uint64_t seed) const;
  std::filesystem::path seed_report(std::uint64_t seed) const;
  std::filesystem::path summary_json() const { return reports_dir() / "summary.json"; }
  std::filesystem::path summary_text() const { return reports_dir() / "summary.txt"; }
  std::filesystem::path plot_prefix(std::uint64_t seed) const;

 private:
  std::filesystem::path root_;
  std::string config_hash_;
};

}  // namespace gosr
