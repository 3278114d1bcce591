#include "uecg/ecg/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace uecg::ecg {
namespace {

constexpr double kRowsPerMv = 15.5;
constexpr long kMidRow = 32;

long amplitude_row(double mv) {
  long r = kMidRow - std::lround(mv * kRowsPerMv);
  return std::clamp(r, 0L, static_cast<long>(kStripRows) - 1);
}

unsigned char quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<unsigned char>(std::lround(c * 255.0f));
}

}  // namespace

EcgImage render_image(const EcgSignal& s) {
  s.validate();
  EcgImage img;
  for (std::size_t li = 0; li < kLeadCount; ++li) {
    const std::size_t top = li * kStripRows;
    long prev_row = 0;
    for (std::size_t c = 0; c < kImageCols; ++c) {
      const std::size_t idx =
          static_cast<std::size_t>(std::lround(static_cast<double>(c) *
                                               static_cast<double>(kSamplesPerLead - 1) /
                                               static_cast<double>(kImageCols - 1)));
      const long row = amplitude_row(s.leads[li][idx]);
      const long lo = c == 0 ? row : std::min(prev_row, row);
      const long hi = c == 0 ? row : std::max(prev_row, row);
      for (long r = lo; r <= hi; ++r)
        img.at(top + static_cast<std::size_t>(r), c) = 1.0f;
      prev_row = row;
    }
  }
  return img;
}

void write_pgm(const EcgImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << kImageCols << " " << kImageRows << "\n255\n";
  std::vector<unsigned char> bytes(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) bytes[i] = quantize(img.pixels[i]);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out.flush()) throw IoError("failed writing " + path.string());
}

std::uint64_t image_checksum(const EcgImage& img) {
  std::uint64_t h = 1469598103934665603ull;  // FNV offset basis
  for (float v : img.pixels) {
    h ^= quantize(v);
    h *= 1099511628211ull;  // FNV prime
  }
  return h;
}

}  // namespace uecg::ecg
