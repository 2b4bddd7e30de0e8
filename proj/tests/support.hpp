#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "camera_geometry.hpp"
#include "grid.hpp"
#include "scene_synth.hpp"
#include "tensor_io.hpp"
#include "types.hpp"

namespace geco::test {

inline Frame plane_frame(uint32_t w, uint32_t h, const Pinhole& k, double depth,
                         const WorldFromCamera& pose = {}) {
  return Frame{k, pose, Field(w, h, 1, depth)};
}

inline Field constant_flow(uint32_t w, uint32_t h, double u, double v) {
  Field f(w, h, 2, 0.0);
  for (size_t p = 0; p < f.pixel_count(); ++p) {
    f.at(p, 0) = u;
    f.at(p, 1) = v;
  }
  return f;
}

inline RigidTransform translation(double x, double y, double z) {
  RigidTransform t;
  t.translation = Vec3(x, y, z);
  return t;
}

inline RigidTransform rotation(double angle, const Vec3& axis, const Vec3& t = Vec3::Zero()) {
  RigidTransform r;
  r.rotation = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  r.translation = t;
  return r;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("geco_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

inline bool same_bits(double a, double b) {
  return std::memcmp(&a, &b, sizeof a) == 0;
}

// Back wall, floor and a sphere, 64x48, seen by a moving camera.
inline SceneSpec small_scene(CameraTrack::Kind kind, int frames = 6, double speed = 0.3) {
  SceneSpec s;
  s.clip_id = "small";
  s.width = 64;
  s.height = 48;
  s.intrinsics = {60.0, 60.0, 31.5, 23.5};
  s.frame_count = frames;
  s.fps = 8.0;
  s.primitives = {Primitive::plane(Vec3(0, 0, 6), Vec3(0, 0, -1)),
                  Primitive::plane(Vec3(0, 1.5, 0), Vec3(0, -1, 0)),
                  Primitive::sphere(Vec3(0.2, 0.3, 3.5), 0.8)};
  s.track.kind = kind;
  s.track.eye = Vec3(0, 0, 0);
  s.track.target = Vec3(0, 0, 3.5);
  s.track.speed = speed;
  return s;
}

// Smooth random depth on every frame, small random camera motion, and flows
// between neighbours that are rigid flow plus a smooth perturbation.
inline Clip smooth_fixture(uint64_t seed, uint32_t w = 20, uint32_t h = 15, int frames = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Clip clip;
  clip.clip_id = "smooth_" + std::to_string(seed);
  clip.fps = 8.0;
  const Pinhole k{30.0, 30.0, (w - 1) / 2.0, (h - 1) / 2.0};
  const double p1 = u(rng) * 3, p2 = u(rng) * 3;
  for (int t = 0; t < frames; ++t) {
    const WorldFromCamera pose =
        t == 0 ? WorldFromCamera{}
               : rotation(0.01 * u(rng), Vec3(u(rng), u(rng), u(rng)) + Vec3(0, 2, 0),
                          Vec3(0.06 * u(rng), 0.03 * u(rng), 0.04 * u(rng)));
    const double a = 0.02 * u(rng), b = 0.02 * u(rng);
    Frame f{k, pose, Field(w, h, 1, 0.0)};
    for (uint32_t y = 0; y < h; ++y)
      for (uint32_t x = 0; x < w; ++x)
        f.depth.at(x, y) = 3.0 + 0.4 * std::sin(0.3 * x + p1) + 0.3 * std::cos(0.25 * y + p2) +
                           a * x + b * y;
    clip.frames.push_back(std::move(f));
  }
  for (int c = 0; c < frames; ++c)
    for (int i : {c - 1, c + 1}) {
      if (i < 0 || i >= frames) continue;
      const RelativePose rel = relative_pose(clip.frames[c].pose, clip.frames[i].pose);
      Field flow = rigid_flow(clip.frames[c], rel, k);
      // Residual of constant length keeps the fused map away from zero.
      const double q = u(rng) * 3, amp = 0.75 + 0.25 * u(rng);
      for (uint32_t y = 0; y < h; ++y)
        for (uint32_t x = 0; x < w; ++x) {
          const double theta = 0.2 * x + 0.1 * y + q;
          flow.at(x, y, 0) += amp * std::cos(theta);
          flow.at(x, y, 1) += amp * std::sin(theta);
        }
      clip.flows[{c, i}] = std::move(flow);
    }
  return clip;
}

}  // namespace geco::test
