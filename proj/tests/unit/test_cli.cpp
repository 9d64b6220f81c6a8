#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "gosr/common.hpp"
#include "test_support.hpp"

using gosr_test::TempDir;

namespace {

struct CliResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
  const std::filesystem::path out = scratch / "cli_out.txt";
  const std::string cmd = std::string(GOSR_CLI_PATH) + " " + args + " > " + out.string() + " 2>&1";
  int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WEXITSTATUS(status);
  std::ifstream in(out);
  r.output.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return r;
}

std::filesystem::path write_tiny_config(const std::filesystem::path& dir) {
  gosr::ExperimentConfig cfg = gosr_test::tiny_identification_config();
  cfg.seeds = {0};
  const auto path = dir / "config.json";
  gosr::write_text_file(path, cfg.to_json_text());
  return path;
}

}  // namespace

TEST_CASE("help exits cleanly") {
  TempDir dir("clihelp");
  CliResult r = run_cli("--help", dir.path());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("run-all") != std::string::npos);
}

TEST_CASE("missing config is a user error") {
  TempDir dir("clibad");
  CliResult r = run_cli("split", dir.path());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("--config") != std::string::npos);
}

TEST_CASE("nonexistent config path is a user error") {
  TempDir dir("clibad2");
  CliResult r = run_cli("split --config /nonexistent/cfg.json", dir.path());
  CHECK(r.exit_code == 1);
}

TEST_CASE("stage order is enforced with a named artifact") {
  TempDir dir("cliorder");
  auto cfg = write_tiny_config(dir.path());
  const std::string common = "--config " + cfg.string() + " --run-dir " + (dir.path() / "run").string();

  CliResult no_split = run_cli("extract " + common, dir.path());
  CHECK(no_split.exit_code == 1);
  CHECK(no_split.output.find("missing artifact") != std::string::npos);
  CHECK(no_split.output.find("run `split` first") != std::string::npos);

  CHECK(run_cli("split " + common, dir.path()).exit_code == 0);
  CliResult no_ckpt = run_cli("extract " + common, dir.path());
  CHECK(no_ckpt.exit_code == 1);
  CHECK(no_ckpt.output.find("missing artifact") != std::string::npos);
  CHECK(no_ckpt.output.find("train-classifier") != std::string::npos);
}

TEST_CASE("run-all completes, reports, and is idempotent") {
  TempDir dir("cliall");
  auto cfg = write_tiny_config(dir.path());
  const auto run_dir = dir.path() / "run";
  const std::string common = "--config " + cfg.string() + " --run-dir " + run_dir.string();

  CliResult first = run_cli("run-all " + common, dir.path());
  CHECK(first.exit_code == 0);
  CHECK(first.output.find("gradient_detector") != std::string::npos);
  CHECK(std::filesystem::exists(run_dir / "reports" / "summary.json"));
  CHECK(std::filesystem::exists(run_dir / "reports" / "summary.txt"));
  const std::string summary = gosr::read_text_file(run_dir / "reports" / "summary.json");
  CHECK(summary.find("auroc") != std::string::npos);
  CHECK(summary.find("openset_accuracy") != std::string::npos);

  CliResult second = run_cli("run-all " + common, dir.path());
  CHECK(second.exit_code == 0);
  CHECK(second.output.find("up to date") != std::string::npos);
  CHECK(gosr::read_text_file(run_dir / "reports" / "summary.json") == summary);
}

TEST_CASE("split rerun is a no-op with notice") {
  TempDir dir("clisplit");
  auto cfg = write_tiny_config(dir.path());
  const std::string common = "--config " + cfg.string() + " --run-dir " + (dir.path() / "run").string();
  CHECK(run_cli("split " + common, dir.path()).exit_code == 0);
  CliResult rerun = run_cli("split " + common, dir.path());
  CHECK(rerun.exit_code == 0);
  CHECK(rerun.output.find("up to date") != std::string::npos);
}

TEST_CASE("flag overrides change the effective config hash") {
  TempDir dir("clilock");
  auto cfg = write_tiny_config(dir.path());
  const auto run_dir = (dir.path() / "run").string();
  CHECK(run_cli("split --config " + cfg.string() + " --run-dir " + run_dir, dir.path()).exit_code == 0);
  CliResult other = run_cli("split --config " + cfg.string() + " --run-dir " + run_dir + " --tau 0.9", dir.path());
  CHECK(other.exit_code == 1);
  CHECK(other.output.find("locked") != std::string::npos);
}

TEST_CASE("evaluate with the softmax baseline lands in the report") {
  TempDir dir("clibase");
  auto cfg = write_tiny_config(dir.path());
  const auto run_dir = dir.path() / "run";
  const std::string common = "--config " + cfg.string() + " --run-dir " + run_dir.string();
  CHECK(run_cli("run-all " + common, dir.path()).exit_code == 0);
  const std::string summary = gosr::read_text_file(run_dir / "reports" / "summary.txt");
  CHECK(summary.find("softmax") != std::string::npos);
  CHECK(summary.find("gradient_detector") != std::string::npos);
}
