#pragma once

#include <cstdint>
#include <vector>

#include "tensor_io.hpp"

namespace geco {

// Gray level lround(clamp(v / range, 0, 1) * 255); invalid pixels are 0.
std::vector<uint8_t> heatmap_levels(const Field& map, double range);

// 8-bit grayscale PNG bytes.
std::vector<uint8_t> encode_heatmap_png(const Field& map, double range);
void write_heatmap_png(const Field& map, double range, const fs::path& path);

}  // namespace geco
