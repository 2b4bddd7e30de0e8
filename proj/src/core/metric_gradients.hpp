#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "consistency_metric.hpp"

namespace geco {

// Center frames, signed temporal offsets and the pixel domain (the full frame)
// over which the fused map is summed.
struct LossSpec {
  std::vector<int> centers;
  std::vector<int> offsets;
  // Divide each pair's pixel sum by its valid pixel count.
  bool mean_normalize = false;
};

struct LossGradient {
  double loss = 0.0;
  std::map<std::pair<int, int>, Field> d_flow;  // (c, i) -> two channels
  std::map<int, Field> d_depth;                  // frame -> one channel
};

// Radicands below this have zero (sub)gradient.
inline constexpr double kGradEpsilon = 1e-12;

// Throws DomainError for bad offsets, MissingInputError for unresolvable pairs.
std::vector<std::pair<int, int>> loss_pairs(const Clip& clip, const LossSpec& spec);

// Contribution of one pair before the 1/(|I||K|) normalization.
double pair_loss(const Clip& clip, int c, int i, double tau, bool mean_normalize);

double loss_geo(const Clip& clip, const LossSpec& spec, double tau);

// Exact partials w.r.t. every flow and depth value with masks and bilinear
// footprints held fixed.
LossGradient loss_geo_backward(const Clip& clip, const LossSpec& spec, double tau);

// Fingerprint of the discrete state one pair's loss depends on: validity
// masks, co-visibility, footprint cells and residual signs. Finite differences
// are meaningful only while it stays unchanged.
uint64_t pair_state(const Clip& clip, int c, int i, double tau);

struct GradcheckOptions {
  double flow_step = 1e-3;       // pixels
  double depth_rel_step = 1e-4;  // fraction of the depth value
  double tolerance = 1e-4;
  // Relative errors are taken against max(|analytic|, |fd|, floor_ratio * p99)
  // where p99 is the 99th percentile of nonzero analytic magnitudes.
  double floor_ratio = 1.0;
  size_t max_entries = 0;  // 0: every entry
  uint64_t seed = 0;
  int jobs = 1;
  // Test hook: scales every analytic entry by (1 + corrupt).
  double corrupt = 0.0;
};

struct GradcheckResult {
  double max_rel_error = 0.0;
  size_t checked = 0;
  size_t skipped = 0;  // discrete state changed under the perturbation
  std::string worst;   // human-readable location of the worst entry
  int worst_x = -1;
  int worst_y = -1;
  double loss = 0.0;
  bool passed = true;
};

GradcheckResult gradient_check(const Clip& clip, const LossSpec& spec, double tau,
                               const GradcheckOptions& options);

}  // namespace geco
