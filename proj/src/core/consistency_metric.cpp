#include "consistency_metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "parallel.hpp"

namespace geco {

Field residual_motion(const Field& flow, const FrameGeometry& c, const RelativePose& c_to_i,
                      const Pinhole& k_i) {
  if (flow.channels() != 2) throw ShapeError("residual_motion: flow must have 2 channels");
  if (!flow.same_shape(c.depth))
    throw ShapeError("residual_motion: flow is " + std::to_string(flow.width()) + "x" +
                     std::to_string(flow.height()) + " but depth is " +
                     std::to_string(c.depth.width()) + "x" + std::to_string(c.depth.height()));
  Field rigid = rigid_flow(c, c_to_i, k_i);
  Field res(flow.width(), flow.height(), 2, 0.0);
  res.ensure_mask();
  for (size_t p = 0; p < res.pixel_count(); ++p) {
    const bool ok = flow.valid(p) && rigid.valid(p);
    res.set_valid(p, ok);
    if (!ok) continue;
    res.at(p, 0) = flow.at(p, 0) - rigid.at(p, 0);
    res.at(p, 1) = flow.at(p, 1) - rigid.at(p, 1);
  }
  return res;
}

Field structure_residual(const FrameGeometry& c, const CovisibilityResult& s) {
  Field out(c.depth.width(), c.depth.height(), 1, 0.0);
  out.ensure_mask();
  for (size_t p = 0; p < out.pixel_count(); ++p) {
    out.set_valid(p, s.sampled[p]);
    if (s.sampled[p]) out.at(p) = std::abs(s.d_hat.at(p) - s.z_proj.at(p)) / c.depth.at(p);
  }
  return out;
}

Field structure_residual(const FrameGeometry& c, const FrameGeometry& i,
                         const RelativePose& c_to_i) {
  return structure_residual(c, covisibility_masks(c, i, c_to_i, kDefaultTau));
}

PairMaps normalize_and_fuse(const Field& residual, const Field& struct_res, const Mask& covis,
                            const Pinhole& k_i) {
  const uint32_t w = residual.width(), h = residual.height();
  if (residual.channels() != 2 || struct_res.channels() != 1)
    throw ShapeError("normalize_and_fuse: expected 2-channel residual and 1-channel structure");
  if (!struct_res.same_shape(w, h) || covis.width() != w || covis.height() != h)
    throw ShapeError("normalize_and_fuse: raster shapes differ");

  PairMaps m{Field(w, h, 1, 0.0), Field(w, h, 1, 0.0), Field(w, h, 1, 0.0), covis, Mask(w, h)};
  m.motion.ensure_mask();
  m.structure.ensure_mask();
  m.fused.ensure_mask();
  for (size_t p = 0; p < m.motion.pixel_count(); ++p) {
    const bool motion_ok = residual.valid(p) && covis[p];
    double mv = 0.0;
    if (motion_ok) {
      const double ru = residual.at(p, 0), rv = residual.at(p, 1);
      if (std::sqrt(ru * ru + rv * rv) >= kResidualFloor) {
        const double du = ru / k_i.fx, dv = rv / k_i.fy;
        mv = std::sqrt(du * du + dv * dv);
      }
      m.motion.at(p) = mv;
    }
    m.motion.set_valid(p, motion_ok);

    const bool struct_ok = struct_res.valid(p);
    m.struct_valid.set(p, struct_ok);
    m.structure.set_valid(p, struct_ok);
    m.fused.set_valid(p, struct_ok);
    if (!struct_ok) continue;
    const double s = struct_res.at(p);
    m.structure.at(p) = s;
    m.fused.at(p) = std::sqrt(mv * mv + s * s);
  }
  return m;
}

PairMaps compute_pair_maps(const Clip& clip, int c, int i, double tau) {
  const Field* flow = clip.flow(c, i);
  if (!flow)
    throw MissingInputError("no flow for pair (" + std::to_string(c) + ", " + std::to_string(i) +
                            ")");
  const Frame& fc = clip.frames.at(c);
  const Frame& fi = clip.frames.at(i);
  const RelativePose rel = relative_pose(fc.pose, fi.pose);
  const Field residual = residual_motion(*flow, fc, rel, fi.intrinsics);
  const CovisibilityResult sampling = covisibility_masks(fc, fi, rel, tau);
  return normalize_and_fuse(residual, structure_residual(fc, sampling), sampling.covis,
                            fi.intrinsics);
}

PairMaps aggregate_pairs(std::span<const PairMaps> pairs) {
  if (pairs.empty()) throw DomainError("aggregate_pairs: no pairs");
  const uint32_t w = pairs[0].fused.width(), h = pairs[0].fused.height();
  PairMaps out{Field(w, h, 1, 0.0), Field(w, h, 1, 0.0), Field(w, h, 1, 0.0), Mask(w, h),
               Mask(w, h)};
  out.motion.ensure_mask();
  out.structure.ensure_mask();
  out.fused.ensure_mask();
  auto average = [&](Field PairMaps::*member, Field& dst) {
    for (size_t p = 0; p < dst.pixel_count(); ++p) {
      double sum = 0.0;
      int n = 0;
      for (const PairMaps& pm : pairs) {
        const Field& f = pm.*member;
        if (!f.valid(p)) continue;
        sum += f.at(p);
        ++n;
      }
      dst.set_valid(p, n > 0);
      dst.at(p) = n > 0 ? sum / n : 0.0;
    }
  };
  for (const PairMaps& pm : pairs)
    if (!pm.fused.same_shape(w, h)) throw ShapeError("aggregate_pairs: pair maps differ in shape");
  average(&PairMaps::motion, out.motion);
  average(&PairMaps::structure, out.structure);
  average(&PairMaps::fused, out.fused);
  for (size_t p = 0; p < out.fused.pixel_count(); ++p) {
    bool cov = false, sv = false;
    for (const PairMaps& pm : pairs) {
      cov = cov || pm.covis[p];
      sv = sv || pm.struct_valid[p];
    }
    out.covis.set(p, cov);
    out.struct_valid.set(p, sv);
  }
  return out;
}

FrameScore frame_score(int center, const PairMaps& maps, const Mask* ignore) {
  FrameScore s;
  s.center_index = center;
  auto mean = [&](const Field& f) {
    double sum = 0.0;
    size_t n = 0;
    for (size_t p = 0; p < f.pixel_count(); ++p) {
      if (!f.valid(p) || (ignore && (*ignore)[p])) continue;
      sum += f.at(p);
      ++n;
    }
    return n ? sum / static_cast<double>(n) : 0.0;
  };
  size_t considered = 0, valid = 0;
  for (size_t p = 0; p < maps.fused.pixel_count(); ++p) {
    if (ignore && (*ignore)[p]) continue;
    ++considered;
    valid += maps.fused.valid(p);
  }
  s.valid_pixel_fraction = considered ? static_cast<double>(valid) / considered : 0.0;
  s.motion_mean = mean(maps.motion);
  s.structure_mean = mean(maps.structure);
  s.fused_mean = mean(maps.fused);
  return s;
}

std::vector<int> window_partners(const Clip& clip, int center, int window,
                                 std::span<const int> sequence) {
  if (window < 2) throw DomainError("window must contain at least one non-center frame");
  std::vector<int> all;
  if (sequence.empty()) {
    all.resize(clip.frame_count());
    for (int t = 0; t < clip.frame_count(); ++t) all[t] = t;
    sequence = all;
  }
  auto it = std::find(sequence.begin(), sequence.end(), center);
  if (it == sequence.end())
    throw DomainError("center frame " + std::to_string(center) + " is not in the sequence");
  const int pos = static_cast<int>(it - sequence.begin());
  const int left = (window - 1) / 2;
  const int right = window - 1 - left;
  std::vector<int> partners;
  for (int q = std::max(0, pos - left); q <= std::min<int>(sequence.size() - 1, pos + right); ++q)
    if (q != pos) partners.push_back(sequence[q]);
  return partners;
}

WindowResult score_window(const Clip& clip, int center, const WindowOptions& options,
                          std::span<const int> sequence) {
  if (center < 0 || center >= clip.frame_count())
    throw DomainError("center frame " + std::to_string(center) + " out of range");
  WindowResult r;
  r.partners = window_partners(clip, center, options.window, sequence);
  for (int i : r.partners)
    if (!clip.flow(center, i))
      throw MissingInputError("no flow for pair (" + std::to_string(center) + ", " +
                              std::to_string(i) + ")");
  if (r.partners.empty()) {
    const Field& d = clip.frames[center].depth;
    const uint32_t w = d.width(), h = d.height();
    r.maps = PairMaps{Field(w, h, 1, 0.0), Field(w, h, 1, 0.0), Field(w, h, 1, 0.0), Mask(w, h),
                      Mask(w, h)};
    for (Field* f : {&r.maps.motion, &r.maps.structure, &r.maps.fused}) f->mask().assign(w * h, 0);
    r.score = frame_score(center, r.maps, options.ignore);
    return r;
  }
  std::vector<PairMaps> pairs;
  pairs.reserve(r.partners.size());
  for (int i : r.partners) pairs.push_back(compute_pair_maps(clip, center, i, options.tau));
  r.maps = aggregate_pairs(pairs);
  r.score = frame_score(center, r.maps, options.ignore);
  return r;
}

std::vector<int> decimate(int frame_count, double fps, double eval_fps) {
  if (!(fps > 0) || !(eval_fps > 0)) throw DomainError("decimate: rates must be positive");
  std::vector<int> out;
  if (fps <= eval_fps) {
    for (int t = 0; t < frame_count; ++t) out.push_back(t);
    return out;
  }
  const double step = fps / eval_fps;
  for (long k = 0;; ++k) {
    const long idx = std::lround(k * step);
    if (idx >= frame_count) break;
    if (out.empty() || out.back() != idx) out.push_back(static_cast<int>(idx));
  }
  return out;
}

std::vector<WindowSpan> partition_windows(int n, double rate, double window_seconds,
                                          double overlap) {
  if (n <= 0) return {};
  const int len = std::max(1, static_cast<int>(std::lround(window_seconds * rate)));
  const int hop = std::max(1, static_cast<int>(std::lround(len * (1.0 - overlap))));
  std::vector<WindowSpan> spans;
  for (int begin = 0;; begin += hop) {
    const int end = std::min(begin + len, n);
    spans.push_back({begin, end});
    if (end == n) break;
  }
  return spans;
}

ClipScalars frame_weighted_average(std::span<const FrameScore> per_frame,
                                   std::span<const WindowSpan> windows) {
  double wm = 0.0, ws = 0.0, wf = 0.0, total = 0.0;
  for (const WindowSpan& span : windows) {
    double m = 0.0, s = 0.0, f = 0.0;
    int n = 0;
    for (int q = span.begin; q < span.end; ++q) {
      const FrameScore& fs = per_frame[q];
      if (!(fs.valid_pixel_fraction > 0)) continue;
      m += fs.motion_mean;
      s += fs.structure_mean;
      f += fs.fused_mean;
      ++n;
    }
    if (n == 0) continue;
    // n * (window mean) == window sum
    wm += m;
    ws += s;
    wf += f;
    total += n;
  }
  if (total == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
  }
  return {wm / total, ws / total, wf / total};
}

void validate_score_options(const ScoreOptions& o) {
  if (o.window < 2) throw DomainError("window must be at least 2 (one non-center frame)");
  if (!(o.tau > 0)) throw DomainError("tau must be positive");
  if (!(o.eval_fps > 0)) throw DomainError("eval_fps must be positive");
  if (!(o.window_seconds > 0)) throw DomainError("window_seconds must be positive");
  if (!(o.window_overlap >= 0 && o.window_overlap < 1))
    throw DomainError("window_overlap must be in [0, 1)");
  if (o.jobs < 1) throw DomainError("jobs must be at least 1");
}

VideoScore score_clip(const Clip& clip, const ScoreOptions& options) {
  validate_score_options(options);
  if (!(clip.fps > 0)) throw DomainError("clip fps must be positive");
  VideoScore v;
  v.options = options;
  v.options.ignore = nullptr;
  v.sample_fps = std::min(clip.fps, options.eval_fps);
  v.retained = decimate(clip.frame_count(), clip.fps, options.eval_fps);
  v.per_frame.resize(v.retained.size());
  if (options.keep_maps) v.maps.resize(v.retained.size());

  WindowOptions wo{options.window, options.tau, nullptr};
  parallel_for(v.retained.size(), options.jobs, [&](size_t q) {
    const int t = v.retained[q];
    WindowOptions local = wo;
    if (options.ignore) {
      auto it = options.ignore->find(t);
      if (it != options.ignore->end()) local.ignore = &it->second;
    }
    WindowResult r = score_window(clip, t, local, v.retained);
    v.per_frame[q] = r.score;
    if (options.keep_maps) v.maps[q] = std::move(r.maps);
  });

  v.windows = partition_windows(static_cast<int>(v.retained.size()), v.sample_fps,
                                options.window_seconds, options.window_overlap);
  const ClipScalars s = frame_weighted_average(v.per_frame, v.windows);
  v.motion = s.motion;
  v.structure = s.structure;
  v.fused = s.fused;
  return v;
}

}  // namespace geco
