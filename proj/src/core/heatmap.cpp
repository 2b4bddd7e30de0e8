#include "heatmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <png.h>

namespace geco {

std::vector<uint8_t> heatmap_levels(const Field& map, double range) {
  if (map.channels() != 1) throw ShapeError("heatmap: map must have one channel");
  if (!(range > 0.0) || !std::isfinite(range)) throw DomainError("heatmap: range must be positive");
  std::vector<uint8_t> px(map.pixel_count(), 0);
  for (size_t p = 0; p < px.size(); ++p) {
    if (!map.valid(p) || std::isnan(map.at(p))) continue;
    px[p] = static_cast<uint8_t>(std::lround(std::clamp(map.at(p) / range, 0.0, 1.0) * 255.0));
  }
  return px;
}

std::vector<uint8_t> encode_heatmap_png(const Field& map, double range) {
  const std::vector<uint8_t> px = heatmap_levels(map, range);
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = map.width();
  img.height = map.height();
  img.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, px.data(), 0, nullptr))
    throw IoError(std::string("png encode failed: ") + img.message);
  std::vector<uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, px.data(), 0, nullptr))
    throw IoError(std::string("png encode failed: ") + img.message);
  out.resize(size);
  png_image_free(&img);
  return out;
}

void write_heatmap_png(const Field& map, double range, const fs::path& path) {
  write_file_atomic(path, encode_heatmap_png(map, range));
}

}  // namespace geco
