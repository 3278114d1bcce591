#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "uecg/ecg/signal.hpp"

namespace uecg::ecg {

inline constexpr std::size_t kStripRows = 64;
inline constexpr std::size_t kImageCols = 256;
inline constexpr std::size_t kImageRows = kStripRows * kLeadCount;  // 768

// Grayscale raster of the 12 leads, one 64 x 256 strip per lead, stacked.
struct EcgImage {
  std::vector<float> pixels;  // row-major, kImageRows x kImageCols, in [0,1]

  EcgImage() : pixels(kImageRows * kImageCols, 0.0f) {}
  float& at(std::size_t r, std::size_t c) { return pixels[r * kImageCols + c]; }
  float at(std::size_t r, std::size_t c) const { return pixels[r * kImageCols + c]; }
};

// Downsamples each lead to 256 columns, maps amplitude to a row inside the
// strip (midline row 32, 15.5 rows per mV, clipped to the strip), and draws
// the trace with vertical joins between neighboring columns.
EcgImage render_image(const EcgSignal& s);

// Binary PGM (P5) export, intensity quantized to 0..255.
void write_pgm(const EcgImage& img, const std::filesystem::path& path);

// FNV-1a over the quantized PGM payload bytes; used to pin raster goldens.
std::uint64_t image_checksum(const EcgImage& img);

}  // namespace uecg::ecg
