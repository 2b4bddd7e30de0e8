#pragma once

#include <climits>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "camera_geometry.hpp"
#include "tensor_io.hpp"

namespace geco {

struct Primitive {
  enum class Kind { Plane, Box, Sphere };
  Kind kind = Kind::Plane;
  // Plane: point and unit normal. Box: min and max corners. Sphere: center.
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0.0;
  // Present on frames in [active_from, active_to).
  int active_from = 0;
  int active_to = INT_MAX;

  bool active(int t) const noexcept { return t >= active_from && t < active_to; }
  // Smallest ray parameter > kMinDepth, if any.
  std::optional<double> intersect(const Vec3& origin, const Vec3& dir) const noexcept;

  static Primitive plane(const Vec3& point, const Vec3& normal);
  static Primitive box(const Vec3& lo, const Vec3& hi);
  static Primitive sphere(const Vec3& center, double radius);
};

struct CameraTrack {
  enum class Kind { Static, Orbit, Dolly, Lateral };
  Kind kind = Kind::Static;
  Vec3 eye = Vec3::Zero();
  Vec3 target = Vec3(0, 0, 1);
  // Orbit: radians per second about the vertical axis through the target.
  // Dolly and lateral: scene units per second.
  double speed = 0.0;
};

struct SceneSpec {
  std::string clip_id = "scene";
  std::vector<Primitive> primitives;
  CameraTrack track;
  Pinhole intrinsics{200.0, 200.0, 127.5, 95.5};
  uint32_t width = 256;
  uint32_t height = 192;
  int frame_count = 20;
  double fps = 8.0;
};

// Camera looking from `eye` at `target` with world up (0, -1, 0).
// Throws DomainError for a zero or vertical look direction.
WorldFromCamera look_at(const Vec3& eye, const Vec3& target);

WorldFromCamera camera_pose(const SceneSpec& spec, int t);

struct Rendering {
  FrameGeometry geometry;
  std::vector<int> primitive_id;  // -1 where nothing is hit
};

// Nearest hit per pixel among the primitives active at t; depth is the
// camera-space z.
Rendering render_depth(const SceneSpec& spec, int t);

// Relative depth tolerance of the target-frame visibility test.
inline constexpr double kRenderTolerance = 1e-6;

// Flow from t_from to t_to through the scene states of the two frames.
// Invalid where the point is hidden in t_to or projects outside it.
Field ground_truth_flow(const SceneSpec& spec, int t_from, int t_to);

struct RenderedClip {
  Clip clip;
  std::vector<std::vector<int>> primitive_ids;  // per frame
};

// Every frame plus flows for all ordered pairs with 0 < |a - b| <= max_offset.
RenderedClip render_clip(const SceneSpec& spec, int max_offset = 2, int jobs = 1);

// Pixels within `radius` (Chebyshev) of a primitive boundary that carries a
// depth jump above `min_jump` (relative), or of the edge of the valid depth.
Mask silhouette_band(const Rendering& r, int radius = 2, double min_jump = 0.05);
std::map<int, Mask> silhouette_bands(const RenderedClip& rc, int radius = 2,
                                     double min_jump = 0.05);

// Pixels where the given primitive is the nearest hit.
Mask primitive_mask(const std::vector<int>& ids, uint32_t width, uint32_t height, int id);

struct OcclusionEvent {
  Primitive occluder;  // active on [t0, t1)
  std::optional<Primitive> revealed_change;  // active from t1
  int t0 = 0;
  int t1 = 0;
};

// Without a revealed change the rigid clip is returned. Otherwise the changed
// region must be hidden on every frame of [t0, t1) (SpecError naming the
// first offending frame) and frame t1 receives the artifact mask.
RenderedClip generate_occlusion_clip(const SceneSpec& spec, const OcclusionEvent& event,
                                     int max_offset = 2, int jobs = 1);

enum class TrackPreset { Orbit, Dolly, Lateral };

struct RandomSceneOptions {
  uint32_t width = 256;
  uint32_t height = 192;
  int frame_count = 20;
  double fps = 8.0;
  double speed_scale = 1.0;
};

// Room with a back wall, a floor, a large subject and small props. Returns
// the index of the subject primitive through `subject`.
SceneSpec random_scene(uint64_t seed, TrackPreset track, const RandomSceneOptions& opts,
                       int* subject = nullptr);

// Slow lateral room scene plus a sudden-appearance event.
std::pair<SceneSpec, OcclusionEvent> random_occlusion_scene(uint64_t seed,
                                                            const RandomSceneOptions& opts);

nlohmann::json primitive_to_json(const Primitive& p);
Primitive primitive_from_json(const nlohmann::json& j);
nlohmann::json scene_to_json(const SceneSpec& s);
// Throws SchemaError naming the offending field.
SceneSpec scene_from_json(const nlohmann::json& j);
nlohmann::json event_to_json(const OcclusionEvent& e);
OcclusionEvent event_from_json(const nlohmann::json& j);

}  // namespace geco
