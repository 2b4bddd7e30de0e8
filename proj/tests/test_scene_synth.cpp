#include <doctest.h>

#include <cmath>

#include "scene_synth.hpp"
#include "support.hpp"

using namespace geco;

namespace {

const Pinhole kK100{100, 100, 31.5, 23.5};

SceneSpec base_spec(CameraTrack::Kind kind, double speed, int frames = 3) {
  SceneSpec s;
  s.clip_id = "fixture";
  s.width = 64;
  s.height = 48;
  s.intrinsics = kK100;
  s.frame_count = frames;
  s.fps = 8.0;
  s.track = {kind, Vec3::Zero(), Vec3(0, 0, 1), speed};
  return s;
}

// Wall at z = 4 with a box whose front face is at z = 2 covering x in [0, 0.5].
SceneSpec box_and_wall(double speed) {
  SceneSpec s = base_spec(CameraTrack::Kind::Lateral, speed);
  s.primitives = {Primitive::plane(Vec3(0, 0, 4), Vec3(0, 0, -1)),
                  Primitive::box(Vec3(0, -1, 2), Vec3(0.5, 1, 2.5))};
  return s;
}

// Flow of the continuous pixel q from frame a to frame b by direct ray casting.
std::optional<Vec2> cast_flow(const SceneSpec& s, int a, int b, const Vec2& q) {
  const WorldFromCamera pa = camera_pose(s, a), pb = camera_pose(s, b);
  const Pinhole& k = s.intrinsics;
  const Vec3 dir = pa.rotation * Vec3((q.x() - k.cx) / k.fx, (q.y() - k.cy) / k.fy, 1.0);
  std::optional<double> best;
  for (const Primitive& p : s.primitives) {
    if (!p.active(a)) continue;
    const auto t = p.intersect(pa.translation, dir);
    if (t && (!best || *t < *best)) best = t;
  }
  if (!best) return std::nullopt;
  const Vec3 xw = pa.translation + *best * dir;
  const Vec3 xb = pb.rotation.transpose() * (xw - pb.translation);
  return Vec2(k.fx * xb.x() / xb.z() + k.cx, k.fy * xb.y() / xb.z() + k.cy) - q;
}

bool same_field(const Field& a, const Field& b) {
  return a.width() == b.width() && a.height() == b.height() && a.channels() == b.channels() &&
         std::memcmp(a.values().data(), b.values().data(), a.values().size() * sizeof(double)) == 0 &&
         a.valid_count() == b.valid_count() && (!a.has_mask() || a.mask() == b.mask());
}

}  // namespace

TEST_SUITE("scene_synth") {
  TEST_CASE("look_at follows the camera axis convention") {
    const WorldFromCamera p = look_at(Vec3::Zero(), Vec3(0, 0, 1));
    CHECK((p.rotation - Eigen::Matrix3d::Identity()).norm() <= 1e-15);
    CHECK(p.translation.norm() == 0.0);
    const WorldFromCamera q = look_at(Vec3(1, 0, 0), Vec3(1, 0, 5));
    CHECK((q.translation - Vec3(1, 0, 0)).norm() == 0.0);
    CHECK_THROWS_AS(look_at(Vec3(1, 1, 1), Vec3(1, 1, 1)), DomainError);
    CHECK_THROWS_AS(look_at(Vec3::Zero(), Vec3(0, 3, 0)), DomainError);
  }

  TEST_CASE("fronto-parallel plane has constant depth") {
    SceneSpec s = base_spec(CameraTrack::Kind::Static, 0.0, 1);
    s.primitives = {Primitive::plane(Vec3(0, 0, 2.75), Vec3(0, 0, 1))};
    const Rendering r = render_depth(s, 0);
    CHECK(r.geometry.depth.valid_count() == r.geometry.depth.pixel_count());
    for (double d : r.geometry.depth.values()) CHECK(std::abs(d - 2.75) <= 1e-12);
    for (int id : r.primitive_id) CHECK(id == 0);
  }

  TEST_CASE("sphere on the optical axis is symmetric about the principal point") {
    SceneSpec s = base_spec(CameraTrack::Kind::Static, 0.0, 1);
    s.width = 65;
    s.height = 49;
    s.intrinsics = {100, 100, 32, 24};
    s.primitives = {Primitive::sphere(Vec3(0, 0, 4), 1.0)};
    const Field& d = render_depth(s, 0).geometry.depth;
    CHECK(d.at(32u, 24u) == doctest::Approx(3.0).epsilon(1e-14));
    double lowest = INFINITY;
    for (size_t p = 0; p < d.pixel_count(); ++p)
      if (d.valid(p)) lowest = std::min(lowest, d.at(p));
    CHECK(lowest == d.at(32u, 24u));
    for (uint32_t k = 1; k < 20; ++k) {
      CHECK(d.valid(d.index(32 + k, 24u)) == d.valid(d.index(32 - k, 24u)));
      if (!d.valid(d.index(32 + k, 24u))) continue;
      CHECK(std::abs(d.at(32 + k, 24u) - d.at(32 - k, 24u)) <= 1e-12);
      CHECK(std::abs(d.at(32u, 24 + k) - d.at(32u, 24 - k)) <= 1e-12);
      CHECK(std::abs(d.at(32 + k, 24u) - d.at(32u, 24 + k)) <= 1e-12);
      CHECK(d.at(32 + k, 24u) > d.at(32 + k - 1, 24u));
    }
    // The rim: tan(half angle) = 1 / sqrt(15), about 25.8 px.
    CHECK(d.valid(d.index(57u, 24u)));
    CHECK_FALSE(d.valid(d.index(58u, 24u)));
  }

  TEST_CASE("box in front of a wall has its silhouette on the projected edge") {
    const SceneSpec s = box_and_wall(0.0);
    const Rendering r = render_depth(s, 0);
    // x = 0 and x = 0.5 at z = 2 project to u = 31.5 and u = 56.5.
    for (uint32_t y = 0; y < 48; ++y)
      for (uint32_t x = 0; x < 64; ++x) {
        const bool box = x >= 32 && x <= 56;
        CHECK(r.primitive_id[y * 64 + x] == (box ? 1 : 0));
        CHECK(r.geometry.depth.at(x, y) == doctest::Approx(box ? 2.0 : 4.0).epsilon(1e-14));
      }
    const Mask band = silhouette_band(r, 2, 0.05);
    // Both sides of the jump are boundary pixels.
    for (uint32_t x = 29; x <= 34; ++x) CHECK(band(x, 10u));
    CHECK_FALSE(band(28u, 10u));
    CHECK_FALSE(band(35u, 10u));
    CHECK_FALSE(band(45u, 10u));
    CHECK(primitive_mask(r.primitive_id, 64, 48, 1).count() == 25u * 48u);
  }

  TEST_CASE("empty views and bad frames are rejected") {
    SceneSpec s = base_spec(CameraTrack::Kind::Static, 0.0, 2);
    s.primitives = {Primitive::sphere(Vec3(0, 0, -5), 1.0)};
    CHECK_THROWS_AS(render_depth(s, 0), DomainError);
    s.primitives = {Primitive::plane(Vec3(0, 0, 2), Vec3(0, 0, 1))};
    CHECK_THROWS_AS(render_depth(s, 2), DomainError);
    s.track.target = Vec3::Zero();
    CHECK_THROWS_AS(render_depth(s, 0), DomainError);
    CHECK_THROWS_AS(Primitive::sphere(Vec3::Zero(), 0.0), DomainError);
    CHECK_THROWS_AS(Primitive::box(Vec3(0, 0, 0), Vec3(1, -1, 1)), DomainError);
  }

  TEST_CASE("ground truth flow") {
    SUBCASE("static camera gives zero flow") {
      const SceneSpec s = test::small_scene(CameraTrack::Kind::Static, 3);
      const Field f = ground_truth_flow(s, 0, 2);
      for (double v : f.values()) CHECK(std::abs(v) <= 1e-12);
    }
    SUBCASE("lateral step over a plane equals the rigid flow") {
      SceneSpec s = base_spec(CameraTrack::Kind::Lateral, 1.6);
      s.primitives = {Primitive::plane(Vec3(0, 0, 2), Vec3(0, 0, -1))};
      const Field f = ground_truth_flow(s, 0, 1);
      const Frame f0{s.intrinsics, camera_pose(s, 0), render_depth(s, 0).geometry.depth};
      const Field rigid = rigid_flow(f0, relative_pose(camera_pose(s, 0), camera_pose(s, 1)), s.intrinsics);
      size_t valid = 0;
      for (size_t p = 0; p < f.pixel_count(); ++p) {
        if (!f.valid(p)) continue;
        ++valid;
        CHECK(std::abs(f.at(p, 0) + 10.0) <= 1e-9);
        CHECK(std::abs(f.at(p, 1)) <= 1e-9);
        CHECK(std::abs(f.at(p, 0) - rigid.at(p, 0)) <= 1e-9);
        CHECK(std::abs(f.at(p, 1) - rigid.at(p, 1)) <= 1e-9);
      }
      // Columns 0..9 leave the frame.
      CHECK(valid == 54u * 48u);
    }
    SUBCASE("pixels hidden in the target are masked") {
      const SceneSpec s = box_and_wall(1.6);
      const Field f = ground_truth_flow(s, 0, 1);
      // Wall moves 5 px, the box 10 px: wall columns 27..31 slide under the box.
      for (uint32_t y = 0; y < 48; ++y) {
        for (uint32_t x = 27; x <= 31; ++x) CHECK_FALSE(f.valid(f.index(x, y)));
        for (uint32_t x : {5u, 26u, 32u, 56u, 57u, 63u}) CHECK(f.valid(f.index(x, y)));
        for (uint32_t x = 0; x < 5; ++x) CHECK_FALSE(f.valid(f.index(x, y)));
      }
      CHECK(f.at(26u, 3u, 0) == doctest::Approx(-5.0).epsilon(1e-12));
      CHECK(f.at(40u, 3u, 0) == doctest::Approx(-10.0).epsilon(1e-12));
    }
  }

  TEST_CASE("ground truth flow matches the rigid flow on co-visible pixels") {
    for (auto kind : {CameraTrack::Kind::Orbit, CameraTrack::Kind::Dolly, CameraTrack::Kind::Lateral}) {
      const RenderedClip rc = render_clip(test::small_scene(kind, 4), 3);
      for (const auto& [key, f] : rc.clip.flows) {
        const Frame& a = rc.clip.frames[key.first];
        const Frame& b = rc.clip.frames[key.second];
        const RelativePose rel = relative_pose(a.pose, b.pose);
        const Field rigid = rigid_flow(a, rel, b.intrinsics);
        const CovisibilityResult cv = covisibility_masks(a, b, rel, kDefaultTau);
        double worst = 0.0;
        for (size_t p = 0; p < f.pixel_count(); ++p)
          if (cv.covis[p] && f.valid(p))
            worst = std::max({worst, std::abs(f.at(p, 0) - rigid.at(p, 0)),
                              std::abs(f.at(p, 1) - rigid.at(p, 1))});
        CHECK(worst <= 1e-9);
      }
    }
  }

  TEST_CASE("flows compose across three frames") {
    for (auto kind : {CameraTrack::Kind::Orbit, CameraTrack::Kind::Dolly}) {
      const SceneSpec s = test::small_scene(kind, 3, 0.6);
      const Field ab = ground_truth_flow(s, 0, 1);
      const Field ac = ground_truth_flow(s, 0, 2);
      size_t compared = 0;
      double worst = 0.0;
      for (uint32_t y = 0; y < 48; ++y)
        for (uint32_t x = 0; x < 64; ++x) {
          const size_t p = ab.index(x, y);
          if (!ab.valid(p) || !ac.valid(p)) continue;
          const Vec2 q = Vec2(x, y) + Vec2(ab.at(p, 0), ab.at(p, 1));
          const auto bc = cast_flow(s, 1, 2, q);
          if (!bc) continue;
          // Keep points that land on the same surface in b (triple co-visible).
          const Vec2 total = Vec2(ab.at(p, 0), ab.at(p, 1)) + *bc;
          const Vec2 direct(ac.at(p, 0), ac.at(p, 1));
          if ((total - direct).norm() > 0.5) continue;
          worst = std::max(worst, (total - direct).norm());
          ++compared;
        }
      CHECK(compared > 2000);
      CHECK(worst <= 1e-6);
    }
  }

  TEST_CASE("flow validity agrees with the co-visibility test away from silhouettes in either frame") {
    for (auto kind : {CameraTrack::Kind::Orbit, CameraTrack::Kind::Dolly, CameraTrack::Kind::Lateral}) {
      const RenderedClip rc = render_clip(test::small_scene(kind, 3, 0.6), 2);
      const auto bands = silhouette_bands(rc, 2, 0.05);
      for (const auto& [key, f] : rc.clip.flows) {
        const Frame& a = rc.clip.frames[key.first];
        const Frame& b = rc.clip.frames[key.second];
        const CovisibilityResult cv = covisibility_masks(a, b, relative_pose(a.pose, b.pose), kDefaultTau);
        size_t agree = 0, n = 0;
        for (uint32_t y = 1; y + 1 < 48; ++y)
          for (uint32_t x = 1; x + 1 < 64; ++x) {
            const size_t p = f.index(x, y);
            if (bands.at(key.first)[p]) continue;
            if (cv.sampled[p]) {
              const auto tx = static_cast<uint32_t>(std::lround(cv.target.at(p, 0)));
              const auto ty = static_cast<uint32_t>(std::lround(cv.target.at(p, 1)));
              if (bands.at(key.second)(tx, ty)) continue;
            }
            ++n;
            agree += f.valid(p) == cv.covis[p];
          }
        INFO("pair " << key.first << " -> " << key.second);
        CHECK(agree == n);
      }
    }
  }

  TEST_CASE("flow validity agrees with the co-visibility test on lateral rooms") {
    RandomSceneOptions o;
    o.frame_count = 3;
    for (uint64_t seed : {1u, 2u, 3u}) {
      const RenderedClip rc = render_clip(random_scene(seed, TrackPreset::Lateral, o), 2, 4);
      for (const auto& [key, f] : rc.clip.flows) {
        const Frame& a = rc.clip.frames[key.first];
        const Frame& b = rc.clip.frames[key.second];
        const CovisibilityResult cv = covisibility_masks(a, b, relative_pose(a.pose, b.pose), kDefaultTau);
        size_t agree = 0;
        for (size_t p = 0; p < f.pixel_count(); ++p) agree += f.valid(p) == cv.covis[p];
        CHECK(static_cast<double>(agree) >= 0.99 * static_cast<double>(f.pixel_count()));
      }
    }
  }

  TEST_CASE("rendered clips") {
    const SceneSpec s = test::small_scene(CameraTrack::Kind::Orbit, 4);
    const RenderedClip a = render_clip(s, 2, 1);
    const RenderedClip b = render_clip(s, 2, 4);
    CHECK(a.clip.frame_count() == 4);
    CHECK(a.clip.flows.size() == 10);
    CHECK(a.clip.flows.count({0, 2}) == 1);
    CHECK(a.clip.flows.count({0, 3}) == 0);
    CHECK(a.clip.clip_id == s.clip_id);
    CHECK(a.clip.fps == s.fps);
    for (int t = 0; t < 4; ++t) CHECK(same_field(a.clip.frames[t].depth, b.clip.frames[t].depth));
    for (const auto& [k, f] : a.clip.flows) CHECK(same_field(f, b.clip.flows.at(k)));
    CHECK(a.primitive_ids == b.primitive_ids);
    CHECK_THROWS_AS(render_clip(s, 0), DomainError);
  }

  TEST_CASE("occlusion events") {
    RandomSceneOptions o;
    o.width = 96;
    o.height = 72;
    o.frame_count = 12;
    const auto [scene, event] = random_occlusion_scene(3, o);
    REQUIRE(event.revealed_change.has_value());

    SUBCASE("no revealed change returns the rigid clip") {
      OcclusionEvent null_event = event;
      null_event.revealed_change.reset();
      const RenderedClip a = generate_occlusion_clip(scene, null_event, 2);
      const RenderedClip b = render_clip(scene, 2);
      for (int t = 0; t < scene.frame_count; ++t)
        CHECK(same_field(a.clip.frames[t].depth, b.clip.frames[t].depth));
      for (const auto& [k, f] : b.clip.flows) CHECK(same_field(f, a.clip.flows.at(k)));
      CHECK(a.clip.ground_truth.empty());
    }
    SUBCASE("the event produces an artifact mask on the reveal frame") {
      const RenderedClip rc = generate_occlusion_clip(scene, event, 2);
      REQUIRE(rc.clip.ground_truth.count(event.t1) == 1);
      const Mask& m = *rc.clip.ground_truth.at(event.t1).mask;
      const int change_id = static_cast<int>(scene.primitives.size()) + 1;
      CHECK(m == primitive_mask(rc.primitive_ids[event.t1], o.width, o.height, change_id));
      CHECK(m.count() > 0);
      // The change is hidden before the reveal.
      for (int t = event.t0; t < event.t1; ++t)
        CHECK(primitive_mask(rc.primitive_ids[t], o.width, o.height, change_id).count() == 0);
      // Flow from the frame before the reveal into the new object is masked.
      const Field& f = rc.clip.flows.at({event.t1, event.t1 - 1});
      for (size_t p = 0; p < m.pixel_count(); ++p)
        if (m[p]) CHECK_FALSE(f.valid(p));
    }
    SUBCASE("a visible change violates the event") {
      OcclusionEvent bad = event;
      bad.occluder = Primitive::sphere(Vec3(0, 0, -50), 0.1);
      try {
        generate_occlusion_clip(scene, bad, 2);
        FAIL("expected SpecError");
      } catch (const SpecError& e) {
        CHECK(std::string(e.what()).find("frame " + std::to_string(event.t0)) != std::string::npos);
      }
      bad = event;
      bad.t1 = bad.t0;
      CHECK_THROWS_AS(generate_occlusion_clip(scene, bad, 2), SpecError);
    }
  }

  TEST_CASE("random scenes are deterministic") {
    RandomSceneOptions o;
    o.width = 64;
    o.height = 48;
    o.frame_count = 6;
    int subject_a = -1, subject_b = -1;
    const SceneSpec a = random_scene(21, TrackPreset::Orbit, o, &subject_a);
    const SceneSpec b = random_scene(21, TrackPreset::Orbit, o, &subject_b);
    const SceneSpec c = random_scene(22, TrackPreset::Orbit, o);
    CHECK(scene_to_json(a) == scene_to_json(b));
    CHECK(subject_a == subject_b);
    CHECK(subject_a >= 0);
    CHECK(scene_to_json(a) != scene_to_json(c));
    for (auto preset : {TrackPreset::Orbit, TrackPreset::Dolly, TrackPreset::Lateral}) {
      const SceneSpec s = random_scene(5, preset, o);
      for (int t = 0; t < s.frame_count; ++t)
        CHECK(render_depth(s, t).geometry.depth.valid_count() > 0);
    }
  }

  TEST_CASE("scene and event JSON") {
    RandomSceneOptions o;
    o.frame_count = 10;
    const auto [scene, event] = random_occlusion_scene(8, o);
    const nlohmann::json js = scene_to_json(scene);
    CHECK(scene_to_json(scene_from_json(js)) == js);
    const nlohmann::json je = event_to_json(event);
    CHECK(event_to_json(event_from_json(je)) == je);

    auto expect_schema = [](const nlohmann::json& j, const std::string& needle) {
      try {
        scene_from_json(j);
        FAIL("expected SchemaError");
      } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find(needle) != std::string::npos);
      }
    };
    nlohmann::json bad = js;
    bad["camera_track"]["type"] = "crane";
    expect_schema(bad, "scene.camera_track.type");
    bad = js;
    bad["fps"] = -1;
    expect_schema(bad, "scene.fps");
    bad = js;
    bad["primitives"] = nlohmann::json::array();
    expect_schema(bad, "scene.primitives");
    bad = js;
    bad["primitives"][0]["type"] = "torus";
    expect_schema(bad, "torus");
    bad = js;
    bad.erase("camera_track");
    expect_schema(bad, "camera_track");
  }
}
