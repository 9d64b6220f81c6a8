#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gosr {

/// SHA-256 used for artifact provenance (checkpoints, manifests, caches).
std::string sha256_hex(const std::uint8_t* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace gosr
