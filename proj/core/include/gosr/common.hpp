#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gosr {

/// Raised for user-facing configuration problems (bad flags, unknown
/// sources, mismatched manifests). The CLI maps it to exit code 1;
/// everything else derived from std::exception maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Fixed-precision formatting used for every number that lands in a text
/// artifact. %.17g round-trips doubles and is stable for a given build.
std::string format_double(double v);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Runs fn(i) for i in [0, count). With workers <= 1 this is a plain loop;
/// otherwise indices are processed by a small thread pool. fn must be safe
/// to call concurrently for distinct i.
void parallel_for(std::int64_t count, int workers, const std::function<void(std::int64_t)>& fn);

/// Little-endian binary writer for parameter blobs and feature caches.
class BinWriter {
 public:
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(const std::string& s);
  void doubles(const std::vector<double>& v);
  void ints(const std::vector<int>& v);
  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class BinReader {
 public:
  explicit BinReader(std::vector<std::uint8_t> bytes) : buf_(std::move(bytes)) {}
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  std::vector<double> doubles();
  std::vector<int> ints();
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n);
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

}  // namespace gosr
