#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "grid.hpp"
#include "types.hpp"

namespace geco {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// GCR1 raster format
//
//   "GCR1" | u32 width | u32 height | u32 channels | u8 has_mask |
//   float32[width*height*channels] | (has_mask ? u8[width*height] : nothing)
//
// All integers and floats little-endian. Mask bytes are 0 or 1.
// ---------------------------------------------------------------------------

inline constexpr char kRasterMagic[4] = {'G', 'C', 'R', '1'};
inline constexpr size_t kRasterHeaderSize = 17;

std::vector<uint8_t> encode_raster(const Raster& r);
// `origin` names the source in error messages.
Raster decode_raster(std::span<const uint8_t> bytes, const std::string& origin = "<memory>");

void write_raster(const Raster& r, const fs::path& path);
Raster read_raster(const fs::path& path);

// Writes bytes to `path` through a sibling temp file and a rename.
void write_file_atomic(const fs::path& path, std::span<const uint8_t> bytes);
void write_text_atomic(const fs::path& path, const std::string& text);
std::vector<uint8_t> read_file(const fs::path& path);

// ---------------------------------------------------------------------------
// Clip manifest (JSON, schema/clip_manifest.v1.json)
// ---------------------------------------------------------------------------

struct FrameEntry {
  int frame_index = 0;
  fs::path depth_path;
  Pinhole intrinsics;
  WorldFromCamera pose;
};

struct FlowEntry {
  int from_index = 0;
  int to_index = 0;
  fs::path flow_path;
};

struct GroundTruthEntry {
  int frame_index = 0;
  std::optional<fs::path> displacement_path;
  std::optional<fs::path> mask_path;
};

struct ClipManifest {
  std::string clip_id;
  int frame_count = 0;
  double fps = 0.0;
  std::vector<FrameEntry> frames;  // sorted by frame_index
  std::vector<FlowEntry> flows;
  std::vector<GroundTruthEntry> ground_truth;
  nlohmann::json metadata;  // free-form, may be null
  fs::path base_dir;        // directory raster paths were resolved against
};

inline constexpr double kRotationTolerance = 1e-6;

// Parses and validates a manifest document. Raster paths are resolved
// against `base_dir`.
ClipManifest parse_manifest(const nlohmann::json& doc, const fs::path& base_dir);
ClipManifest load_manifest(const fs::path& path);

// Throws ValidationError naming `what` if the rotation is not proper
// orthonormal within kRotationTolerance.
void validate_rotation(const Mat3& r, const std::string& what);

// ---------------------------------------------------------------------------
// In-memory clip: every raster of a manifest, in working precision.
// ---------------------------------------------------------------------------

struct Frame {
  Pinhole intrinsics;
  WorldFromCamera pose;
  Field depth;  // one channel, positive where valid
};

struct GroundTruth {
  std::optional<Field> displacement;  // two channels, pixels
  std::optional<Mask> mask;
};

struct Clip {
  std::string clip_id;
  double fps = 0.0;
  std::vector<Frame> frames;
  std::map<std::pair<int, int>, Field> flows;  // (from, to) -> two-channel field
  std::map<int, GroundTruth> ground_truth;
  nlohmann::json metadata;

  int frame_count() const noexcept { return static_cast<int>(frames.size()); }
  const Field* flow(int from, int to) const {
    auto it = flows.find({from, to});
    return it == flows.end() ? nullptr : &it->second;
  }
};

// Loads and validates every raster a manifest references.
Clip load_clip(const ClipManifest& manifest);
Clip load_clip(const fs::path& manifest_path);

// Checks shapes and depth positivity; throws ShapeError / ValidationError.
void validate_clip(const Clip& clip);

// Writes `dir`/manifest.json plus GCR1 rasters (float32). Returns the
// manifest path.
fs::path write_clip(const Clip& clip, const fs::path& dir);

nlohmann::ordered_json manifest_json(const Clip& clip);

}  // namespace geco
