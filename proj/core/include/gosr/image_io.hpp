#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "gosr/tensor.hpp"

namespace gosr {

/// Reads a binary PPM (P6) or PGM (P5) file, maxval 255, into a {C,H,W}
/// tensor with values scaled to [0,1].
Tensor read_pnm(const std::filesystem::path& path);

/// Writes interleaved 8-bit RGB pixels as binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const std::vector<std::uint8_t>& rgb, int width, int height);

}  // namespace gosr
