#include "gosr/image_io.hpp"

#include <cctype>
#include <fstream>

#include "gosr/common.hpp"

namespace gosr {

namespace {

// Skips whitespace and '#' comments between PNM header tokens.
int next_pnm_int(std::istream& in, const std::filesystem::path& path) {
  for (;;) {
    int c = in.peek();
    if (c == EOF) throw std::runtime_error("truncated PNM header: " + path.string());
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    break;
  }
  int value = 0;
  in >> value;
  if (!in) throw std::runtime_error("bad PNM header: " + path.string());
  return value;
}

}  // namespace

Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open image: " + path.string());
  char magic[2] = {0, 0};
  in.read(magic, 2);
  int channels = 0;
  if (magic[0] == 'P' && magic[1] == '6') channels = 3;
  else if (magic[0] == 'P' && magic[1] == '5') channels = 1;
  else throw std::runtime_error("unsupported image format (want P5/P6 PNM): " + path.string());

  int width = next_pnm_int(in, path);
  int height = next_pnm_int(in, path);
  int maxval = next_pnm_int(in, path);
  if (maxval != 255) throw std::runtime_error("unsupported PNM maxval " + std::to_string(maxval) + ": " + path.string());
  in.get();  // single whitespace after maxval

  std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * static_cast<std::size_t>(channels);
  std::vector<std::uint8_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count)
    throw std::runtime_error("truncated image data: " + path.string());

  // PNM is interleaved, tensors are planar {C,H,W}.
  Tensor img({channels, height, width});
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        std::size_t src = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                              static_cast<std::size_t>(channels) + static_cast<std::size_t>(c);
        std::int64_t dst = (static_cast<std::int64_t>(c) * height + y) * width + x;
        img[dst] = raw[src] / 255.0;
      }
  return img;
}

void write_ppm(const std::filesystem::path& path, const std::vector<std::uint8_t>& rgb, int width, int height) {
  if (rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3)
    throw std::invalid_argument("write_ppm: buffer size does not match dimensions");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write image: " + path.string());
  out << "P6\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw std::runtime_error("short image write: " + path.string());
}

}  // namespace gosr
