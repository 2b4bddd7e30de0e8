#pragma once

#include <optional>
#include <span>

#include "grid.hpp"
#include "tensor_io.hpp"
#include "types.hpp"

namespace geco {

// Points with camera-space z at or below this are behind the camera.
inline constexpr double kMinDepth = 1e-6;

// Sample locations this close to an integer coordinate are read as that
// integer, so round-trip noise neither leaves the frame nor touches a
// neighbor.
inline constexpr double kSnapDistance = 1e-9;

// Relative forward/backward visibility threshold used by default.
inline constexpr double kDefaultTau = 0.02;

using FrameGeometry = Frame;

struct Projection {
  Vec2 pixel;
  double depth = 0.0;
};

// depth * K^-1 * (u, v, 1). Throws DomainError for non-positive depth.
Vec3 backproject(const Vec2& pixel, double depth, const Pinhole& k);

// Throws BehindCameraError when x.z <= kMinDepth.
Projection project(const Vec3& x, const Pinhole& k);
std::optional<Projection> try_project(const Vec3& x, const Pinhole& k) noexcept;

// Per-pixel displacement induced by camera motion over the depth of frame c.
// Two channels; invalid where the source depth is invalid or the moved point
// falls behind the target camera.
Field rigid_flow(const FrameGeometry& c, const RelativePose& c_to_i, const Pinhole& k_i);

// Bilinear footprint of a continuous location. Neighbors with zero weight do
// not contribute, so integer locations read exactly one pixel.
struct Footprint {
  uint32_t x0 = 0;
  uint32_t y0 = 0;
  double fx = 0.0;  // fractional offsets in [0, 1)
  double fy = 0.0;

  double weight(int dx, int dy) const noexcept {
    return (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy);
  }
  // Linear cell id, stable while the location stays inside one cell.
  uint64_t cell(uint32_t width) const noexcept {
    return static_cast<uint64_t>(y0) * width + x0;
  }
};

// Returns the footprint if q lies in [0, W-1] x [0, H-1] and every
// contributing neighbor is valid.
template <typename T>
std::optional<Footprint> footprint(const Grid<T>& g, const Vec2& q) noexcept;

template <typename T>
double sample(const Grid<T>& g, const Footprint& f, uint32_t channel = 0) noexcept;

// Derivative of the sampled value w.r.t. the continuous location, holding the
// footprint fixed. Non-contributing neighbors that are missing count as zero
// slope along their axis.
template <typename T>
Vec2 sample_gradient(const Grid<T>& g, const Footprint& f, uint32_t channel = 0) noexcept;

// Samples every channel. Returns false (leaving `out` untouched) if invalid.
template <typename T>
bool bilinear_sample(const Grid<T>& g, const Vec2& q, std::span<double> out) noexcept;

std::optional<double> bilinear_sample(const Field& g, const Vec2& q) noexcept;

// Result of warping frame a into frame b. All rasters live on a's grid.
struct CovisibilityResult {
  Mask covis;      // passed both the forward and the reverse visibility check
  Mask sampled;    // projection landed in front of b with a valid footprint
  Field z_proj;    // depth of the moved point in b's camera
  Field d_hat;     // b's depth bilinearly sampled at the projected location
  Field target;    // two channels: projected location in b
};

// Forward check (z_proj - d_hat) / z_proj < tau at p, and the same check for
// the point seen by b at the projected location, moved back into a.
CovisibilityResult covisibility_masks(const FrameGeometry& a, const FrameGeometry& b,
                                      const RelativePose& a_to_b, double tau);

// Resamples the depth raster to a new resolution with intrinsics adjusted so
// that projection stays exact (pixel centers at integer coordinates).
FrameGeometry rescale_geometry(const FrameGeometry& g, uint32_t width, uint32_t height);

}  // namespace geco

#include "camera_geometry_inl.hpp"
