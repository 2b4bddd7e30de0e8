#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "camera_geometry.hpp"
#include "grid.hpp"
#include "tensor_io.hpp"

namespace geco {

// phi(r) = r^2 log r with phi(0) = 0.
double tps_kernel(double r) noexcept;

// Thin-plate spline f(x) = A x + a + sum_i w_i phi(|x - c_i|).
struct TpsWarp {
  std::vector<Vec2> controls;
  std::vector<Vec2> targets;
  // The fit is done on displacements, so A - I is kept separately to keep
  // f(x) - x free of cancellation.
  Eigen::Matrix2d affine_delta = Eigen::Matrix2d::Zero();
  Vec2 offset = Vec2::Zero();
  std::vector<Vec2> rbf_weights;

  Eigen::Matrix2d affine() const { return Eigen::Matrix2d::Identity() + affine_delta; }
  // f(p) - p
  Vec2 displacement(const Vec2& p) const;
};

// Seeded first point, then greedy max-min distance. Ties go to the lowest
// row-major pixel index. Throws DomainError with fewer than k candidates.
std::vector<Vec2> farthest_point_sample(const Mask& mask, size_t k, uint64_t seed);
std::vector<Vec2> farthest_point_sample_from(const Mask& mask, size_t k, size_t first_pixel);

// Solves the (K+3)x(K+3) system with the side conditions sum w = 0 and
// sum w c^T = 0. `regularization` is added to the kernel diagonal.
// Throws SolveError for K < 3, collinear controls or a singular system.
TpsWarp fit_tps(const std::vector<Vec2>& controls, const std::vector<Vec2>& targets,
                double regularization = 0.0);

Vec2 evaluate_warp(const TpsWarp& w, const Vec2& p);

// Distance to the nearest pixel outside the mask (the image border counts as
// outside), divided by the radius and clamped to [0, 1].
Field feather_weights(const Mask& mask, double radius);

struct GroundTruthField {
  Field displacement;  // two channels, pixels
  Field magnitude;     // one channel
};

// U = f(p) - p, weighted by the feather map and blended into the previous
// moving average: beta * prev + (1 - beta) * w U. Without `prev_ema` the
// weighted field is returned as is.
GroundTruthField displacement_field(const TpsWarp& warp, uint32_t width, uint32_t height,
                                    const Field& feather, const Field* prev_ema, double beta);

// out(p) = frame(p + d(p)) by bilinear lookup; lookups leaving the frame or
// touching invalid pixels are invalid.
template <typename T>
Grid<T> warp_frame(const Grid<T>& frame, const Field& displacement);

struct DeformClipSpec {
  int control_count = 8;
  double displacement_scale = 6.0;  // pixels
  double omega = 0.6;               // radians per frame for the control drift
  double ema_beta = 0.7;
  double feather_radius = 15.0;     // pixels
  double mask_threshold = 0.5;      // GT mask is magnitude > threshold
  double regularization = 0.0;
};

void validate_deform_spec(const DeformClipSpec& spec);

// Per-control drift u_{i,t} = scale * (sin(omega t + phase_x), sin(omega t + phase_y)).
std::vector<Vec2> control_drift(const DeformClipSpec& spec, const std::vector<Vec2>& phases,
                                int frame);

// Deforms the listed frames of `base`. Depth is warped with the same field,
// flows touching a warped frame are re-based onto the deformed content, and
// each warped frame receives a GT displacement and mask. Control points are
// drawn from `foreground` (per frame; falls back to depth validity) of the
// first warped frame.
Clip generate_warp_clip(const Clip& base, const DeformClipSpec& spec,
                        const std::vector<int>& warped_frames, uint64_t seed,
                        const std::map<int, Mask>* foreground = nullptr);

}  // namespace geco

#include "warp_synth_inl.hpp"
