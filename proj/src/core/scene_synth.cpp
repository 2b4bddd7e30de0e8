#include "scene_synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Geometry>

#include "parallel.hpp"

namespace geco {

Primitive Primitive::plane(const Vec3& point, const Vec3& normal) {
  const double n = normal.norm();
  if (!(n > 0.0)) throw DomainError("plane normal must be nonzero");
  Primitive p;
  p.kind = Kind::Plane;
  p.a = point;
  p.b = normal / n;
  return p;
}

Primitive Primitive::box(const Vec3& lo, const Vec3& hi) {
  if (!(lo.array() < hi.array()).all()) throw DomainError("box min corner must be below max corner");
  Primitive p;
  p.kind = Kind::Box;
  p.a = lo;
  p.b = hi;
  return p;
}

Primitive Primitive::sphere(const Vec3& center, double radius) {
  if (!(radius > 0.0)) throw DomainError("sphere radius must be positive");
  Primitive p;
  p.kind = Kind::Sphere;
  p.a = center;
  p.radius = radius;
  return p;
}

std::optional<double> Primitive::intersect(const Vec3& o, const Vec3& d) const noexcept {
  switch (kind) {
    case Kind::Plane: {
      const double denom = b.dot(d);
      if (std::abs(denom) < 1e-15) return std::nullopt;
      const double t = b.dot(a - o) / denom;
      if (t > kMinDepth) return t;
      return std::nullopt;
    }
    case Kind::Sphere: {
      const Vec3 oc = o - a;
      const double qa = d.dot(d), hb = oc.dot(d), qc = oc.dot(oc) - radius * radius;
      const double disc = hb * hb - qa * qc;
      if (disc < 0.0) return std::nullopt;
      const double sq = std::sqrt(disc);
      const double t1 = (-hb - sq) / qa, t2 = (-hb + sq) / qa;
      if (t1 > kMinDepth) return t1;
      if (t2 > kMinDepth) return t2;
      return std::nullopt;
    }
    case Kind::Box: {
      double tmin = -std::numeric_limits<double>::infinity();
      double tmax = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 3; ++k) {
        if (d[k] == 0.0) {
          if (o[k] < a[k] || o[k] > b[k]) return std::nullopt;
          continue;
        }
        double t1 = (a[k] - o[k]) / d[k], t2 = (b[k] - o[k]) / d[k];
        if (t1 > t2) std::swap(t1, t2);
        tmin = std::max(tmin, t1);
        tmax = std::min(tmax, t2);
      }
      if (tmax < tmin) return std::nullopt;
      if (tmin > kMinDepth) return tmin;
      if (tmax > kMinDepth) return tmax;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

WorldFromCamera look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 fwd = target - eye;
  if (!(fwd.norm() > 1e-12)) throw DomainError("camera look direction is zero");
  const Vec3 z = fwd.normalized();
  const Vec3 up(0.0, -1.0, 0.0);
  const Vec3 xr = z.cross(up);
  if (!(xr.norm() > 1e-9)) throw DomainError("camera looks straight up or down");
  const Vec3 x = xr.normalized();
  const Vec3 y = z.cross(x);
  WorldFromCamera pose;
  pose.rotation.col(0) = x;
  pose.rotation.col(1) = y;
  pose.rotation.col(2) = z;
  pose.translation = eye;
  return pose;
}

WorldFromCamera camera_pose(const SceneSpec& spec, int t) {
  if (t < 0 || t >= spec.frame_count)
    throw DomainError("frame " + std::to_string(t) + " is outside the clip");
  const CameraTrack& tr = spec.track;
  const double s = t / spec.fps;
  switch (tr.kind) {
    case CameraTrack::Kind::Static:
      return look_at(tr.eye, tr.target);
    case CameraTrack::Kind::Orbit: {
      const double ang = tr.speed * s, c = std::cos(ang), sn = std::sin(ang);
      const Vec3 r = tr.eye - tr.target;
      const Vec3 rr(c * r.x() + sn * r.z(), r.y(), -sn * r.x() + c * r.z());
      return look_at(tr.target + rr, tr.target);
    }
    case CameraTrack::Kind::Dolly: {
      const Vec3 fwd = tr.target - tr.eye;
      if (!(fwd.norm() > 1e-12)) throw DomainError("camera look direction is zero");
      const Vec3 eye = tr.eye + tr.speed * s * fwd.normalized();
      return look_at(eye, tr.target);
    }
    case CameraTrack::Kind::Lateral: {
      const WorldFromCamera start = look_at(tr.eye, tr.target);
      const Vec3 shift = tr.speed * s * start.rotation.col(0);
      return look_at(tr.eye + shift, tr.target + shift);
    }
  }
  throw DomainError("unknown camera track");
}

namespace {

void validate_scene(const SceneSpec& s) {
  if (s.width < 2 || s.height < 2) throw DomainError("scene resolution must be at least 2x2");
  if (s.frame_count < 1) throw DomainError("scene frame_count must be positive");
  if (!(s.fps > 0.0)) throw DomainError("scene fps must be positive");
  const Pinhole& k = s.intrinsics;
  if (!(k.fx > 0.0 && k.fy > 0.0)) throw DomainError("scene focal lengths must be positive");
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int id = -1;
};

Hit cast(const std::vector<Primitive>& prims, int frame, const Vec3& o, const Vec3& d) {
  Hit h;
  for (size_t i = 0; i < prims.size(); ++i) {
    if (!prims[i].active(frame)) continue;
    if (auto t = prims[i].intersect(o, d); t && *t < h.t) {
      h.t = *t;
      h.id = static_cast<int>(i);
    }
  }
  return h;
}

Vec3 ray_dir(const WorldFromCamera& pose, const Pinhole& k, double u, double v) {
  return pose.rotation * Vec3((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
}

}  // namespace

Rendering render_depth(const SceneSpec& spec, int t) {
  validate_scene(spec);
  const WorldFromCamera pose = camera_pose(spec, t);
  Rendering r;
  r.geometry.intrinsics = spec.intrinsics;
  r.geometry.pose = pose;
  r.geometry.depth = Field(spec.width, spec.height, 1, 0.0);
  r.geometry.depth.ensure_mask();
  r.primitive_id.assign(static_cast<size_t>(spec.width) * spec.height, -1);
  for (uint32_t y = 0; y < spec.height; ++y)
    for (uint32_t x = 0; x < spec.width; ++x) {
      const Hit h = cast(spec.primitives, t, pose.translation, ray_dir(pose, spec.intrinsics, x, y));
      const size_t p = r.geometry.depth.index(x, y);
      r.geometry.depth.set_valid(p, h.id >= 0);
      if (h.id < 0) continue;
      r.geometry.depth.at(p) = h.t;
      r.primitive_id[p] = h.id;
    }
  if (r.geometry.depth.valid_count() == 0)
    throw DomainError("frame " + std::to_string(t) + " sees no primitive");
  if (r.geometry.depth.valid_count() == r.geometry.depth.pixel_count())
    r.geometry.depth.mask().clear();
  return r;
}

Field ground_truth_flow(const SceneSpec& spec, int t_from, int t_to) {
  validate_scene(spec);
  const WorldFromCamera pa = camera_pose(spec, t_from), pb = camera_pose(spec, t_to);
  const Pinhole& k = spec.intrinsics;
  const Mat3 rbt = pb.rotation.transpose();
  Field flow(spec.width, spec.height, 2, 0.0);
  flow.ensure_mask();
  for (uint32_t y = 0; y < spec.height; ++y)
    for (uint32_t x = 0; x < spec.width; ++x) {
      const Vec3 da = ray_dir(pa, k, x, y);
      const Hit h = cast(spec.primitives, t_from, pa.translation, da);
      bool ok = false;
      if (h.id >= 0) {
        const Vec3 xw = pa.translation + h.t * da;
        const Vec3 xb = rbt * (xw - pb.translation);
        if (xb.z() > kMinDepth) {
          const double u = k.fx * xb.x() / xb.z() + k.cx;
          const double v = k.fy * xb.y() / xb.z() + k.cy;
          if (u >= 0.0 && v >= 0.0 && u <= spec.width - 1.0 && v <= spec.height - 1.0) {
            const Hit hb = cast(spec.primitives, t_to, pb.translation, ray_dir(pb, k, u, v));
            ok = hb.id >= 0 && std::abs(hb.t - xb.z()) <= kRenderTolerance * xb.z();
            if (ok) {
              flow.at(x, y, 0) = u - x;
              flow.at(x, y, 1) = v - y;
            }
          }
        }
      }
      flow.set_valid(x, y, ok);
    }
  return flow;
}

RenderedClip render_clip(const SceneSpec& spec, int max_offset, int jobs) {
  validate_scene(spec);
  if (max_offset < 1) throw DomainError("render_clip: max_offset must be >= 1");
  const int n = spec.frame_count;
  RenderedClip rc;
  rc.clip.clip_id = spec.clip_id;
  rc.clip.fps = spec.fps;
  rc.clip.frames.resize(n);
  rc.primitive_ids.resize(n);
  parallel_for(n, jobs, [&](size_t t) {
    Rendering r = render_depth(spec, static_cast<int>(t));
    rc.clip.frames[t] = std::move(r.geometry);
    rc.primitive_ids[t] = std::move(r.primitive_id);
  });
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < n; ++a)
    for (int b = std::max(0, a - max_offset); b <= std::min(n - 1, a + max_offset); ++b)
      if (a != b) pairs.emplace_back(a, b);
  std::vector<Field> flows(pairs.size());
  parallel_for(pairs.size(), jobs, [&](size_t i) {
    flows[i] = ground_truth_flow(spec, pairs[i].first, pairs[i].second);
  });
  for (size_t i = 0; i < pairs.size(); ++i) rc.clip.flows.emplace(pairs[i], std::move(flows[i]));
  rc.clip.metadata = {{"generator", "scene_synth"}, {"scene", scene_to_json(spec)}};
  return rc;
}

Mask silhouette_band(const Rendering& r, int radius, double min_jump) {
  const Field& d = r.geometry.depth;
  const uint32_t w = d.width(), h = d.height();
  Mask edge(w, h);
  auto is_edge = [&](size_t p, size_t q) {
    if (d.valid(p) != d.valid(q)) return true;
    if (!d.valid(p)) return false;
    if (r.primitive_id[p] == r.primitive_id[q]) return false;
    const double a = d.at(p), b = d.at(q);
    return std::abs(a - b) > min_jump * std::min(a, b);
  };
  for (uint32_t y = 0; y < h; ++y)
    for (uint32_t x = 0; x < w; ++x) {
      const size_t p = d.index(x, y);
      if (x + 1 < w && is_edge(p, p + 1)) {
        edge.set(p, true);
        edge.set(p + 1, true);
      }
      if (y + 1 < h && is_edge(p, p + w)) {
        edge.set(p, true);
        edge.set(p + w, true);
      }
    }
  Mask band(w, h);
  for (uint32_t y = 0; y < h; ++y)
    for (uint32_t x = 0; x < w; ++x) {
      if (!edge(x, y)) continue;
      const int x0 = std::max(0, static_cast<int>(x) - radius);
      const int x1 = std::min(static_cast<int>(w) - 1, static_cast<int>(x) + radius);
      const int y0 = std::max(0, static_cast<int>(y) - radius);
      const int y1 = std::min(static_cast<int>(h) - 1, static_cast<int>(y) + radius);
      for (int yy = y0; yy <= y1; ++yy)
        for (int xx = x0; xx <= x1; ++xx) band.set(static_cast<uint32_t>(xx), yy, true);
    }
  return band;
}

std::map<int, Mask> silhouette_bands(const RenderedClip& rc, int radius, double min_jump) {
  std::map<int, Mask> out;
  for (int t = 0; t < rc.clip.frame_count(); ++t)
    out[t] = silhouette_band(Rendering{rc.clip.frames[t], rc.primitive_ids[t]}, radius, min_jump);
  return out;
}

Mask primitive_mask(const std::vector<int>& ids, uint32_t width, uint32_t height, int id) {
  if (ids.size() != static_cast<size_t>(width) * height)
    throw ShapeError("primitive_mask: id raster does not match the resolution");
  Mask m(width, height);
  for (size_t p = 0; p < ids.size(); ++p) m.set(p, ids[p] == id);
  return m;
}

RenderedClip generate_occlusion_clip(const SceneSpec& spec, const OcclusionEvent& event,
                                     int max_offset, int jobs) {
  validate_scene(spec);
  if (!event.revealed_change) return render_clip(spec, max_offset, jobs);
  if (event.t0 < 0 || event.t0 >= event.t1 || event.t1 >= spec.frame_count)
    throw SpecError("occlusion event needs 0 <= t0 < t1 < frame_count");

  SceneSpec scene = spec;
  Primitive occ = event.occluder;
  occ.active_from = event.t0;
  occ.active_to = event.t1;
  Primitive change = *event.revealed_change;
  change.active_from = event.t1;
  change.active_to = INT_MAX;
  scene.primitives.push_back(occ);
  const int change_id = static_cast<int>(scene.primitives.size());
  scene.primitives.push_back(change);

  for (int t = event.t0; t < event.t1; ++t) {
    const WorldFromCamera pose = camera_pose(scene, t);
    for (uint32_t y = 0; y < scene.height; ++y)
      for (uint32_t x = 0; x < scene.width; ++x) {
        const Vec3 d = ray_dir(pose, scene.intrinsics, x, y);
        const auto tc = change.intersect(pose.translation, d);
        if (!tc) continue;
        const Hit h = cast(scene.primitives, t, pose.translation, d);
        if (!(h.t < *tc))
          throw SpecError("occlusion event: changed region is visible at frame " +
                          std::to_string(t) + " (pixel " + std::to_string(x) + ", " +
                          std::to_string(y) + ")");
      }
  }

  RenderedClip rc = render_clip(scene, max_offset, jobs);
  GroundTruth gt;
  gt.mask = primitive_mask(rc.primitive_ids[event.t1], scene.width, scene.height, change_id);
  rc.clip.ground_truth[event.t1] = std::move(gt);
  rc.clip.metadata["occlusion_event"] = event_to_json(event);
  return rc;
}

namespace {

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
  bool coin() { return (gen() & 1) != 0; }
};

}  // namespace

SceneSpec random_scene(uint64_t seed, TrackPreset track, const RandomSceneOptions& opts,
                       int* subject) {
  Rng rng(seed);
  SceneSpec s;
  s.width = opts.width;
  s.height = opts.height;
  s.frame_count = opts.frame_count;
  s.fps = opts.fps;
  const double f = 200.0 * opts.width / 256.0;
  s.intrinsics = {f, f, (opts.width - 1) / 2.0, (opts.height - 1) / 2.0};

  const double wall_z = rng.uniform(6.5, 8.0);
  const double floor_y = rng.uniform(1.2, 1.6);
  s.primitives.push_back(Primitive::plane(Vec3(0, 0, wall_z), Vec3(0, 0, -1)));
  s.primitives.push_back(Primitive::plane(Vec3(0, floor_y, 0), Vec3(0, -1, 0)));

  const Vec3 center(rng.uniform(-0.3, 0.3), rng.uniform(-0.1, 0.3), rng.uniform(3.0, 3.6));
  if (rng.coin()) {
    s.primitives.push_back(Primitive::sphere(center, rng.uniform(0.9, 1.15)));
  } else {
    const Vec3 half(rng.uniform(0.7, 0.9), rng.uniform(0.7, 0.9), rng.uniform(0.5, 0.8));
    s.primitives.push_back(Primitive::box(center - half, center + half));
  }
  if (subject) *subject = static_cast<int>(s.primitives.size()) - 1;

  for (int side : {-1, 1}) {
    const double size = rng.uniform(0.3, 0.5);
    const double px = side * rng.uniform(1.6, 2.2), pz = rng.uniform(4.2, 5.5);
    s.primitives.push_back(Primitive::box(Vec3(px - size / 2, floor_y - size, pz - size / 2),
                                          Vec3(px + size / 2, floor_y, pz + size / 2)));
  }

  s.track.eye = Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.2, 0.0), 0.0);
  s.track.target = center;
  const double sign = rng.coin() ? 1.0 : -1.0;
  switch (track) {
    case TrackPreset::Orbit:
      s.track.kind = CameraTrack::Kind::Orbit;
      s.track.speed = sign * 0.05 * opts.speed_scale;
      break;
    case TrackPreset::Dolly:
      s.track.kind = CameraTrack::Kind::Dolly;
      s.track.speed = 0.15 * opts.speed_scale;
      break;
    case TrackPreset::Lateral:
      s.track.kind = CameraTrack::Kind::Lateral;
      s.track.speed = sign * 0.15 * opts.speed_scale;
      break;
  }
  return s;
}

std::pair<SceneSpec, OcclusionEvent> random_occlusion_scene(uint64_t seed,
                                                            const RandomSceneOptions& opts) {
  if (opts.frame_count < 8) throw DomainError("occlusion scenes need at least 8 frames");
  Rng rng(seed);
  SceneSpec s;
  s.width = opts.width;
  s.height = opts.height;
  s.frame_count = opts.frame_count;
  s.fps = opts.fps;
  const double f = 200.0 * opts.width / 256.0;
  s.intrinsics = {f, f, (opts.width - 1) / 2.0, (opts.height - 1) / 2.0};

  const double wall_z = rng.uniform(5.5, 6.5);
  const double floor_y = rng.uniform(1.2, 1.5);
  s.primitives.push_back(Primitive::plane(Vec3(0, 0, wall_z), Vec3(0, 0, -1)));
  s.primitives.push_back(Primitive::plane(Vec3(0, floor_y, 0), Vec3(0, -1, 0)));
  const double side = rng.coin() ? 1.0 : -1.0;
  const double prop = rng.uniform(0.4, 0.6);
  const double prop_x = -side * rng.uniform(1.4, 1.8), prop_z = rng.uniform(4.0, 5.0);
  s.primitives.push_back(Primitive::box(Vec3(prop_x - prop / 2, floor_y - prop, prop_z - prop / 2),
                                        Vec3(prop_x + prop / 2, floor_y, prop_z + prop / 2)));

  s.track.kind = CameraTrack::Kind::Lateral;
  s.track.eye = Vec3(0, 0, 0);
  s.track.target = Vec3(0, 0.1, wall_z);
  s.track.speed = (rng.coin() ? 1.0 : -1.0) * 0.1 * opts.speed_scale;

  const Vec3 half(rng.uniform(0.2, 0.3), rng.uniform(0.2, 0.3), rng.uniform(0.15, 0.25));
  const double front = rng.uniform(2.6, 3.2);
  const Vec3 c(side * rng.uniform(0.0, 0.5), rng.uniform(-0.2, 0.2), front + half.z());
  OcclusionEvent ev;
  ev.revealed_change = Primitive::box(c - half, c + half);
  const double margin = 0.2;
  ev.occluder = Primitive::box(Vec3(c.x() - half.x() - margin, c.y() - half.y() - margin, front - 0.35),
                               Vec3(c.x() + half.x() + margin, c.y() + half.y() + margin, front - 0.3));
  ev.t1 = rng.integer(4, opts.frame_count - 4);
  ev.t0 = ev.t1 - 1;
  return {s, ev};
}

namespace {

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

const nlohmann::json& field(const nlohmann::json& j, const std::string& key,
                            const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(path + "." + key + ": missing");
  return j.at(key);
}

double num(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path + ": must be finite");
  return v;
}

int integer(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path + ": expected an integer");
  return j.get<int>();
}

Vec3 vec_from(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(path + ": expected 3 numbers");
  return Vec3(num(j[0], path + "[0]"), num(j[1], path + "[1]"), num(j[2], path + "[2]"));
}

Primitive primitive_at(const nlohmann::json& j, const std::string& path) {
  const auto& type = field(j, "type", path);
  if (!type.is_string()) throw SchemaError(path + ".type: expected a string");
  const std::string t = type.get<std::string>();
  Primitive p;
  try {
    if (t == "plane")
      p = Primitive::plane(vec_from(field(j, "point", path), path + ".point"),
                           vec_from(field(j, "normal", path), path + ".normal"));
    else if (t == "box")
      p = Primitive::box(vec_from(field(j, "min", path), path + ".min"),
                         vec_from(field(j, "max", path), path + ".max"));
    else if (t == "sphere")
      p = Primitive::sphere(vec_from(field(j, "center", path), path + ".center"),
                            num(field(j, "radius", path), path + ".radius"));
    else
      throw SchemaError(path + ".type: unknown primitive '" + t + "'");
  } catch (const DomainError& e) {
    throw SchemaError(path + ": " + e.what());
  }
  if (j.contains("active")) {
    const auto& a = j.at("active");
    if (!a.is_array() || a.size() != 2) throw SchemaError(path + ".active: expected [from, to]");
    p.active_from = integer(a[0], path + ".active[0]");
    p.active_to = a[1].is_null() ? INT_MAX : integer(a[1], path + ".active[1]");
  }
  return p;
}

const char* track_name(CameraTrack::Kind k) {
  switch (k) {
    case CameraTrack::Kind::Static: return "static";
    case CameraTrack::Kind::Orbit: return "orbit";
    case CameraTrack::Kind::Dolly: return "dolly";
    case CameraTrack::Kind::Lateral: return "lateral";
  }
  return "static";
}

}  // namespace

nlohmann::json primitive_to_json(const Primitive& p) {
  nlohmann::json j;
  switch (p.kind) {
    case Primitive::Kind::Plane:
      j = {{"type", "plane"}, {"point", vec_json(p.a)}, {"normal", vec_json(p.b)}};
      break;
    case Primitive::Kind::Box:
      j = {{"type", "box"}, {"min", vec_json(p.a)}, {"max", vec_json(p.b)}};
      break;
    case Primitive::Kind::Sphere:
      j = {{"type", "sphere"}, {"center", vec_json(p.a)}, {"radius", p.radius}};
      break;
  }
  if (p.active_from != 0 || p.active_to != INT_MAX)
    j["active"] = {p.active_from, p.active_to == INT_MAX ? nlohmann::json(nullptr)
                                                         : nlohmann::json(p.active_to)};
  return j;
}

Primitive primitive_from_json(const nlohmann::json& j) { return primitive_at(j, "primitive"); }

nlohmann::json scene_to_json(const SceneSpec& s) {
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& p : s.primitives) prims.push_back(primitive_to_json(p));
  return {{"clip_id", s.clip_id},
          {"width", s.width},
          {"height", s.height},
          {"frame_count", s.frame_count},
          {"fps", s.fps},
          {"intrinsics",
           {{"fx", s.intrinsics.fx}, {"fy", s.intrinsics.fy}, {"cx", s.intrinsics.cx},
            {"cy", s.intrinsics.cy}}},
          {"primitives", prims},
          {"camera_track",
           {{"type", track_name(s.track.kind)},
            {"eye", vec_json(s.track.eye)},
            {"target", vec_json(s.track.target)},
            {"speed", s.track.speed}}}};
}

SceneSpec scene_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("scene: expected an object");
  SceneSpec s;
  if (j.contains("clip_id")) {
    if (!j["clip_id"].is_string()) throw SchemaError("scene.clip_id: expected a string");
    s.clip_id = j["clip_id"].get<std::string>();
  }
  auto positive_int = [&](const char* key, uint32_t& dst) {
    if (!j.contains(key)) return;
    const int v = integer(j[key], std::string("scene.") + key);
    if (v < 2) throw SchemaError(std::string("scene.") + key + ": must be >= 2");
    dst = static_cast<uint32_t>(v);
  };
  positive_int("width", s.width);
  positive_int("height", s.height);
  if (j.contains("frame_count")) {
    s.frame_count = integer(j["frame_count"], "scene.frame_count");
    if (s.frame_count < 1) throw SchemaError("scene.frame_count: must be positive");
  }
  if (j.contains("fps")) {
    s.fps = num(j["fps"], "scene.fps");
    if (!(s.fps > 0.0)) throw SchemaError("scene.fps: must be positive");
  }
  if (j.contains("intrinsics")) {
    const auto& k = j["intrinsics"];
    s.intrinsics = {num(field(k, "fx", "scene.intrinsics"), "scene.intrinsics.fx"),
                    num(field(k, "fy", "scene.intrinsics"), "scene.intrinsics.fy"),
                    num(field(k, "cx", "scene.intrinsics"), "scene.intrinsics.cx"),
                    num(field(k, "cy", "scene.intrinsics"), "scene.intrinsics.cy")};
    if (!(s.intrinsics.fx > 0.0 && s.intrinsics.fy > 0.0))
      throw SchemaError("scene.intrinsics: focal lengths must be positive");
  } else {
    s.intrinsics = {200.0 * s.width / 256.0, 200.0 * s.width / 256.0, (s.width - 1) / 2.0,
                    (s.height - 1) / 2.0};
  }
  const auto& prims = field(j, "primitives", "scene");
  if (!prims.is_array() || prims.empty()) throw SchemaError("scene.primitives: expected a nonempty array");
  for (size_t i = 0; i < prims.size(); ++i)
    s.primitives.push_back(primitive_at(prims[i], "scene.primitives[" + std::to_string(i) + "]"));
  const auto& tr = field(j, "camera_track", "scene");
  const auto& type = field(tr, "type", "scene.camera_track");
  const std::string t = type.is_string() ? type.get<std::string>() : "";
  if (t == "static") s.track.kind = CameraTrack::Kind::Static;
  else if (t == "orbit") s.track.kind = CameraTrack::Kind::Orbit;
  else if (t == "dolly") s.track.kind = CameraTrack::Kind::Dolly;
  else if (t == "lateral") s.track.kind = CameraTrack::Kind::Lateral;
  else throw SchemaError("scene.camera_track.type: expected static|orbit|dolly|lateral");
  s.track.eye = vec_from(field(tr, "eye", "scene.camera_track"), "scene.camera_track.eye");
  s.track.target = vec_from(field(tr, "target", "scene.camera_track"), "scene.camera_track.target");
  if (tr.contains("speed")) s.track.speed = num(tr["speed"], "scene.camera_track.speed");
  return s;
}

nlohmann::json event_to_json(const OcclusionEvent& e) {
  return {{"occluder", primitive_to_json(e.occluder)},
          {"revealed_change",
           e.revealed_change ? primitive_to_json(*e.revealed_change) : nlohmann::json(nullptr)},
          {"t0", e.t0},
          {"t1", e.t1}};
}

OcclusionEvent event_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("event: expected an object");
  OcclusionEvent e;
  e.occluder = primitive_at(field(j, "occluder", "event"), "event.occluder");
  if (j.contains("revealed_change") && !j["revealed_change"].is_null())
    e.revealed_change = primitive_at(j["revealed_change"], "event.revealed_change");
  e.t0 = integer(field(j, "t0", "event"), "event.t0");
  e.t1 = integer(field(j, "t1", "event"), "event.t1");
  return e;
}

}  // namespace geco
