#pragma once

#include <map>
#include <span>
#include <vector>

#include "camera_geometry.hpp"
#include "grid.hpp"
#include "tensor_io.hpp"

namespace geco {

// Per-pixel maps of one center frame, for a single pair or aggregated over a
// window. Every map is one channel and dimensionless.
//
//   motion    valid where flow and rigid flow are valid and the pixel is
//             co-visible
//   structure valid where the projection lands inside the target frame
//   fused     sqrt((covis * motion)^2 + structure^2), valid with structure
struct PairMaps {
  Field motion;
  Field structure;
  Field fused;
  Mask covis;
  Mask struct_valid;
};

// Flow residuals shorter than this (pixels) are below the float32 resolution
// of stored flow and count as exactly zero motion.
inline constexpr double kResidualFloor = 1e-5;

// F_flow - F_rigid, two channels. Throws ShapeError on resolution mismatch.
Field residual_motion(const Field& flow, const FrameGeometry& c, const RelativePose& c_to_i,
                      const Pinhole& k_i);

// |d_hat_i - z_proj| / z_c on frame c's grid.
Field structure_residual(const FrameGeometry& c, const FrameGeometry& i,
                         const RelativePose& c_to_i);
Field structure_residual(const FrameGeometry& c, const CovisibilityResult& sampling);

// Normalizes the flow residual by the focal lengths of k_i and fuses it with
// the structure residual. Motion outside `covis` is dropped.
PairMaps normalize_and_fuse(const Field& residual, const Field& struct_res, const Mask& covis,
                            const Pinhole& k_i);

// All of the above for the ordered pair (c, i) of a clip.
PairMaps compute_pair_maps(const Clip& clip, int c, int i, double tau);

struct FrameScore {
  int center_index = 0;
  double motion_mean = 0.0;
  double structure_mean = 0.0;
  double fused_mean = 0.0;
  double valid_pixel_fraction = 0.0;
};

struct WindowResult {
  FrameScore score;
  PairMaps maps;              // count-normalized per-pixel average over pairs
  std::vector<int> partners;  // frame indices paired with the center
};

// Pixels set in `ignore` are left out of the frame means.
struct WindowOptions {
  int window = 5;
  double tau = kDefaultTau;
  const Mask* ignore = nullptr;
};

// Frame indices in `sequence` whose position is within the window around the
// center's position, truncated at the ends. An empty sequence means every
// frame of the clip.
std::vector<int> window_partners(const Clip& clip, int center, int window,
                                 std::span<const int> sequence = {});

// Throws MissingInputError naming (center, i) if a flow is missing.
WindowResult score_window(const Clip& clip, int center, const WindowOptions& options,
                          std::span<const int> sequence = {});

// Averages the pair maps pixel by pixel over the pairs where each pixel is
// valid, accumulating in the given order.
PairMaps aggregate_pairs(std::span<const PairMaps> pairs);

FrameScore frame_score(int center, const PairMaps& maps, const Mask* ignore = nullptr);

struct ScoreOptions {
  int window = 5;
  double tau = kDefaultTau;
  double eval_fps = 8.0;
  double window_seconds = 3.0;
  double window_overlap = 0.5;
  int jobs = 1;
  const std::map<int, Mask>* ignore = nullptr;  // per-frame exclusion masks
  bool keep_maps = false;
};

struct WindowSpan {
  int begin = 0;  // positions into the retained frame sequence
  int end = 0;
};

struct VideoScore {
  double motion = 0.0;
  double structure = 0.0;
  double fused = 0.0;
  std::vector<FrameScore> per_frame;
  std::vector<int> retained;
  std::vector<WindowSpan> windows;
  std::vector<PairMaps> maps;  // aligned with per_frame when keep_maps
  ScoreOptions options;
  double sample_fps = 0.0;
};

// Nearest-index decimation to min(fps, eval_fps).
std::vector<int> decimate(int frame_count, double fps, double eval_fps);

// Overlapping windows of `window_seconds` over n frames sampled at `rate`.
std::vector<WindowSpan> partition_windows(int n, double rate, double window_seconds,
                                          double overlap);

// Frame-weighted average of per-window means; frames with no valid pixels
// carry no weight. Returns NaN if nothing is valid.
struct ClipScalars {
  double motion, structure, fused;
};
ClipScalars frame_weighted_average(std::span<const FrameScore> per_frame,
                                   std::span<const WindowSpan> windows);

void validate_score_options(const ScoreOptions& options);

VideoScore score_clip(const Clip& clip, const ScoreOptions& options);

}  // namespace geco
