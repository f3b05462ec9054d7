// Copyright 2026 The nist-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "nist/pfm.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace nist::pfm {
namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return __builtin_bswap32(v);
  }
}

} // namespace

void write(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw std::invalid_argument("PFM supports 1 or 3 channels: " + path.string());
  }
  const std::size_t row = static_cast<std::size_t>(image.width) * image.channels;
  if (image.data.size() != row * image.height) {
    throw std::invalid_argument("PFM data size does not match its header: " + path.string());
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << (image.channels == 3 ? "PF" : "Pf") << '\n'
     << image.width << ' ' << image.height << '\n'
     << "-1.0\n";
  std::vector<std::uint32_t> buffer(row);
  for (int y = image.height - 1; y >= 0; --y) {
    for (std::size_t i = 0; i < row; ++i) {
      buffer[i] = to_little(std::bit_cast<std::uint32_t>(image.data[y * row + i]));
    }
    os.write(reinterpret_cast<const char*>(buffer.data()),
             static_cast<std::streamsize>(row * sizeof(std::uint32_t)));
  }
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

Image read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  double scale = 0.0;
  Image image;
  is >> magic >> image.width >> image.height >> scale;
  if (!is || (magic != "PF" && magic != "Pf") || image.width <= 0 || image.height <= 0 ||
      scale == 0.0) {
    throw std::runtime_error("malformed PFM header in " + path.string());
  }
  is.get(); // single whitespace byte before the raster
  image.channels = magic == "PF" ? 3 : 1;
  const bool little = scale < 0.0;
  const std::size_t row = static_cast<std::size_t>(image.width) * image.channels;
  image.data.resize(row * image.height);
  std::vector<std::uint32_t> buffer(row);
  for (int y = image.height - 1; y >= 0; --y) {
    is.read(reinterpret_cast<char*>(buffer.data()),
            static_cast<std::streamsize>(row * sizeof(std::uint32_t)));
    if (!is) throw std::runtime_error("truncated PFM raster in " + path.string());
    for (std::size_t i = 0; i < row; ++i) {
      std::uint32_t bits = buffer[i];
      if (little != (std::endian::native == std::endian::little)) bits = __builtin_bswap32(bits);
      image.data[y * row + i] = std::bit_cast<float>(bits);
    }
  }
  return image;
}

} // namespace nist::pfm
