#include "camera_geometry.hpp"

#include <cmath>

namespace geco {

Vec3 backproject(const Vec2& pixel, double depth, const Pinhole& k) {
  if (!(depth > 0.0)) throw DomainError("backproject: depth must be positive");
  return {(pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth};
}

std::optional<Projection> try_project(const Vec3& x, const Pinhole& k) noexcept {
  if (!(x.z() > kMinDepth)) return std::nullopt;
  return Projection{{k.fx * x.x() / x.z() + k.cx, k.fy * x.y() / x.z() + k.cy}, x.z()};
}

Projection project(const Vec3& x, const Pinhole& k) {
  auto p = try_project(x, k);
  if (!p) throw BehindCameraError("project: point is behind the camera");
  return *p;
}

Field rigid_flow(const FrameGeometry& c, const RelativePose& c_to_i, const Pinhole& k_i) {
  const Field& depth = c.depth;
  Field flow(depth.width(), depth.height(), 2, 0.0);
  flow.ensure_mask();
  for (uint32_t y = 0; y < depth.height(); ++y)
    for (uint32_t x = 0; x < depth.width(); ++x) {
      const double z = depth.at(x, y);
      bool ok = depth.valid(x, y) && z > 0.0;
      if (ok) {
        const Vec2 p(x, y);
        auto proj = try_project(c_to_i.apply(backproject(p, z, c.intrinsics)), k_i);
        if (proj) {
          flow.at(x, y, 0) = proj->pixel.x() - p.x();
          flow.at(x, y, 1) = proj->pixel.y() - p.y();
        }
        ok = proj.has_value();
      }
      flow.set_valid(x, y, ok);
    }
  return flow;
}

std::optional<double> bilinear_sample(const Field& g, const Vec2& q) noexcept {
  auto f = footprint(g, q);
  if (!f) return std::nullopt;
  return sample(g, *f);
}

CovisibilityResult covisibility_masks(const FrameGeometry& a, const FrameGeometry& b,
                                      const RelativePose& a_to_b, double tau) {
  const uint32_t w = a.depth.width(), h = a.depth.height();
  CovisibilityResult r{Mask(w, h), Mask(w, h), Field(w, h, 1), Field(w, h, 1), Field(w, h, 2)};
  const RelativePose b_to_a = a_to_b.inverse();
  for (uint32_t y = 0; y < h; ++y)
    for (uint32_t x = 0; x < w; ++x) {
      const double z = a.depth.at(x, y);
      if (!a.depth.valid(x, y) || !(z > 0.0)) continue;
      const Vec3 xb = a_to_b.apply(backproject(Vec2(x, y), z, a.intrinsics));
      auto proj = try_project(xb, b.intrinsics);
      if (!proj) continue;
      auto fp = footprint(b.depth, proj->pixel);
      if (!fp) continue;
      const double d_hat = sample(b.depth, *fp);
      if (!(d_hat > 0.0)) continue;
      r.sampled.set(x, y, true);
      r.z_proj.at(x, y) = proj->depth;
      r.d_hat.at(x, y) = d_hat;
      r.target.at(x, y, 0) = proj->pixel.x();
      r.target.at(x, y, 1) = proj->pixel.y();

      if (!((proj->depth - d_hat) / proj->depth < tau)) continue;

      // Reverse check: the surface b sees at the projected location, moved
      // back into a, must not be hidden behind a's own depth.
      const Vec3 xa = b_to_a.apply(backproject(proj->pixel, d_hat, b.intrinsics));
      auto back = try_project(xa, a.intrinsics);
      if (!back) continue;
      auto d_back = bilinear_sample(a.depth, back->pixel);
      if (!d_back) continue;
      if ((back->depth - *d_back) / back->depth < tau) r.covis.set(x, y, true);
    }
  return r;
}

FrameGeometry rescale_geometry(const FrameGeometry& g, uint32_t width, uint32_t height) {
  if (width == 0 || height == 0) throw DomainError("rescale_geometry: empty target resolution");
  const double sx = static_cast<double>(width) / g.depth.width();
  const double sy = static_cast<double>(height) / g.depth.height();
  FrameGeometry out;
  out.pose = g.pose;
  out.intrinsics = {g.intrinsics.fx * sx, g.intrinsics.fy * sy, (g.intrinsics.cx + 0.5) * sx - 0.5,
                    (g.intrinsics.cy + 0.5) * sy - 0.5};
  out.depth = Field(width, height, 1, 0.0);
  out.depth.ensure_mask();
  for (uint32_t y = 0; y < height; ++y)
    for (uint32_t x = 0; x < width; ++x) {
      const Vec2 q((x + 0.5) / sx - 0.5, (y + 0.5) / sy - 0.5);
      auto v = bilinear_sample(g.depth, q);
      out.depth.set_valid(x, y, v.has_value());
      if (v) out.depth.at(x, y) = *v;
    }
  return out;
}

}  // namespace geco
