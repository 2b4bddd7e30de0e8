#include "metric_gradients.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace geco {

std::vector<std::pair<int, int>> loss_pairs(const Clip& clip, const LossSpec& spec) {
  if (spec.centers.empty() || spec.offsets.empty())
    throw DomainError("loss spec needs at least one center and one offset");
  std::vector<std::pair<int, int>> pairs;
  for (int c : spec.centers) {
    if (c < 0 || c >= clip.frame_count())
      throw DomainError("loss spec center " + std::to_string(c) + " out of range");
    for (int k : spec.offsets) {
      if (k == 0) throw DomainError("loss spec offsets must exclude 0");
      const int i = c + k;
      if (i < 0 || i >= clip.frame_count() || !clip.flow(c, i))
        throw MissingInputError("loss pair (" + std::to_string(c) + ", " + std::to_string(i) +
                                ") is not resolvable");
      pairs.emplace_back(c, i);
    }
  }
  return pairs;
}

double pair_loss(const Clip& clip, int c, int i, double tau, bool mean_normalize) {
  const PairMaps maps = compute_pair_maps(clip, c, i, tau);
  double sum = 0.0;
  size_t n = 0;
  for (size_t p = 0; p < maps.fused.pixel_count(); ++p) {
    if (!maps.fused.valid(p)) continue;
    sum += maps.fused.at(p);
    ++n;
  }
  if (mean_normalize) return n ? sum / static_cast<double>(n) : 0.0;
  return sum;
}

double loss_geo(const Clip& clip, const LossSpec& spec, double tau) {
  const auto pairs = loss_pairs(clip, spec);
  double total = 0.0;
  for (const auto& [c, i] : pairs) total += pair_loss(clip, c, i, tau, spec.mean_normalize);
  return total / (static_cast<double>(spec.centers.size()) * spec.offsets.size());
}

namespace {

Field zeros_like(const Field& f, uint32_t channels) {
  Field g(f.width(), f.height(), channels, 0.0);
  if (f.has_mask()) g.mask() = f.mask();
  return g;
}

Field& depth_slot(LossGradient& grad, const Clip& clip, int frame) {
  auto it = grad.d_depth.find(frame);
  if (it == grad.d_depth.end())
    it = grad.d_depth.emplace(frame, zeros_like(clip.frames[frame].depth, 1)).first;
  return it->second;
}

bool above_floor(const Field& residual, size_t p) {
  const double ru = residual.at(p, 0), rv = residual.at(p, 1);
  return std::sqrt(ru * ru + rv * rv) >= kResidualFloor;
}

void backward_pair(const Clip& clip, int c, int i, double tau, double weight, bool mean_normalize,
                   LossGradient& grad) {
  const Frame& fc = clip.frames[c];
  const Frame& fi = clip.frames[i];
  const Field& flow = *clip.flow(c, i);
  const RelativePose rel = relative_pose(fc.pose, fi.pose);
  const Pinhole& kc = fc.intrinsics;
  const Pinhole& ki = fi.intrinsics;

  const CovisibilityResult s = covisibility_masks(fc, fi, rel, tau);
  const Field residual = residual_motion(flow, fc, rel, ki);

  double g0 = weight;
  if (mean_normalize) {
    const size_t n = s.sampled.count();
    if (n == 0) return;
    g0 /= static_cast<double>(n);
  }

  auto fit = grad.d_flow.find({c, i});
  if (fit == grad.d_flow.end()) fit = grad.d_flow.emplace(std::make_pair(c, i), zeros_like(flow, 2)).first;
  Field& d_flow = fit->second;
  Field& d_depth_c = depth_slot(grad, clip, c);
  Field& d_depth_i = depth_slot(grad, clip, i);

  const uint32_t w = fc.depth.width();
  for (size_t p = 0; p < fc.depth.pixel_count(); ++p) {
    if (!s.sampled[p]) continue;
    const double z = fc.depth.at(p);
    const Vec3 ray((static_cast<double>(p % w) - kc.cx) / kc.fx,
                   (static_cast<double>(p / w) - kc.cy) / kc.fy, 1.0);
    const Vec3 a = rel.rotation * ray;
    const Vec3 x = z * a + rel.translation;
    const double dudz = ki.fx * (a.x() * x.z() - x.x() * a.z()) / (x.z() * x.z());
    const double dvdz = ki.fy * (a.y() * x.z() - x.y() * a.z()) / (x.z() * x.z());

    const bool motion_on = residual.valid(p) && s.covis[p] && above_floor(residual, p);
    double m2 = 0.0;
    if (motion_on) {
      const double du = residual.at(p, 0) / ki.fx, dv = residual.at(p, 1) / ki.fy;
      m2 = du * du + dv * dv;
    }
    const double e = s.d_hat.at(p) - s.z_proj.at(p);
    const double sv = std::abs(e) / z;
    const double f2 = m2 + sv * sv;
    if (f2 < kGradEpsilon) continue;
    const double f = std::sqrt(f2);

    if (motion_on) {
      const double gu = g0 * residual.at(p, 0) / (ki.fx * ki.fx * f);
      const double gv = g0 * residual.at(p, 1) / (ki.fy * ki.fy * f);
      d_flow.at(p, 0) += gu;
      d_flow.at(p, 1) += gv;
      // residual = flow - rigid
      d_depth_c.at(p) -= gu * dudz + gv * dvdz;
    }
    if (e != 0.0) {
      const double gs = g0 * sv / f;
      const double sign = e > 0 ? 1.0 : -1.0;
      const Vec2 q(s.target.at(p, 0), s.target.at(p, 1));
      const Footprint fp = *footprint(fi.depth, q);
      const Vec2 slope = sample_gradient(fi.depth, fp);
      const double de_dz = slope.x() * dudz + slope.y() * dvdz - a.z();
      d_depth_c.at(p) += gs * (sign / z * de_dz - sv / z);
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const double wgt = fp.weight(dx, dy);
          if (wgt > 0.0) d_depth_i.at(fp.x0 + dx, fp.y0 + dy) += gs * sign / z * wgt;
        }
    }
  }
}

inline uint64_t mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h *= 0xff51afd7ed558ccdULL;
  return h ^ (h >> 33);
}

}  // namespace

LossGradient loss_geo_backward(const Clip& clip, const LossSpec& spec, double tau) {
  const auto pairs = loss_pairs(clip, spec);
  const double weight = 1.0 / (static_cast<double>(spec.centers.size()) * spec.offsets.size());
  LossGradient grad;
  grad.loss = loss_geo(clip, spec, tau);
  for (const auto& [c, i] : pairs) backward_pair(clip, c, i, tau, weight, spec.mean_normalize, grad);
  return grad;
}

uint64_t pair_state(const Clip& clip, int c, int i, double tau) {
  const Frame& fc = clip.frames[c];
  const Frame& fi = clip.frames[i];
  const RelativePose rel = relative_pose(fc.pose, fi.pose);
  const CovisibilityResult s = covisibility_masks(fc, fi, rel, tau);
  const Field residual = residual_motion(*clip.flow(c, i), fc, rel, fi.intrinsics);
  uint64_t h = 0x243f6a8885a308d3ULL;
  for (size_t p = 0; p < fc.depth.pixel_count(); ++p) {
    uint64_t bits = (s.sampled[p] ? 1u : 0u) | (s.covis[p] ? 2u : 0u) | (residual.valid(p) ? 4u : 0u);
    if (residual.valid(p) && above_floor(residual, p)) bits |= 128u;
    if (s.sampled[p]) {
      const double e = s.d_hat.at(p) - s.z_proj.at(p);
      bits |= e > 0 ? 8u : (e < 0 ? 16u : 0u);
      const auto fp = footprint(fi.depth, Vec2(s.target.at(p, 0), s.target.at(p, 1)));
      if (fp) {
        bits |= static_cast<uint64_t>(fp->fx > 0) << 5 | static_cast<uint64_t>(fp->fy > 0) << 6;
        bits |= fp->cell(fi.depth.width()) << 8;
      }
    }
    h = mix(h, bits);
  }
  return h;
}

namespace {

struct Entry {
  bool is_flow = false;
  std::pair<int, int> pair;  // flow entries
  int frame = 0;             // depth entries
  size_t pixel = 0;
  uint32_t channel = 0;
  double analytic = 0.0;
};

struct EntryResult {
  bool stable = false;
  double fd = 0.0;
};

uint64_t uniform_index(std::mt19937_64& rng, uint64_t n) { return rng() % n; }

}  // namespace

GradcheckResult gradient_check(const Clip& clip, const LossSpec& spec, double tau,
                               const GradcheckOptions& o) {
  if (!(o.flow_step > 0) || !(o.depth_rel_step > 0))
    throw DomainError("finite-difference steps must be positive");
  const auto pairs = loss_pairs(clip, spec);
  const double norm = 1.0 / (static_cast<double>(spec.centers.size()) * spec.offsets.size());
  LossGradient grad = loss_geo_backward(clip, spec, tau);

  std::vector<Entry> entries;
  for (const auto& [key, g] : grad.d_flow) {
    const Field& input = *clip.flow(key.first, key.second);
    for (size_t p = 0; p < g.pixel_count(); ++p) {
      if (!input.valid(p)) continue;
      for (uint32_t ch = 0; ch < 2; ++ch) entries.push_back({true, key, 0, p, ch, g.at(p, ch)});
    }
  }
  for (const auto& [frame, g] : grad.d_depth) {
    const Field& input = clip.frames[frame].depth;
    for (size_t p = 0; p < g.pixel_count(); ++p)
      if (input.valid(p)) entries.push_back({false, {}, frame, p, 0, g.at(p)});
  }
  if (o.corrupt != 0.0)
    for (Entry& e : entries) e.analytic *= 1.0 + o.corrupt;

  std::vector<double> mags;
  for (const Entry& e : entries)
    if (e.analytic != 0.0) mags.push_back(std::abs(e.analytic));
  double p99 = 0.0;
  if (!mags.empty()) {
    const size_t k = std::min(mags.size() - 1, static_cast<size_t>(0.99 * (mags.size() - 1) + 0.5));
    std::nth_element(mags.begin(), mags.begin() + k, mags.end());
    p99 = mags[k];
  }

  if (o.max_entries > 0 && entries.size() > o.max_entries) {
    std::mt19937_64 rng(o.seed);
    std::vector<size_t> idx(entries.size());
    for (size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    for (size_t k = 0; k < o.max_entries; ++k)
      std::swap(idx[k], idx[k + uniform_index(rng, idx.size() - k)]);
    idx.resize(o.max_entries);
    std::sort(idx.begin(), idx.end());
    std::vector<Entry> picked;
    for (size_t k : idx) picked.push_back(entries[k]);
    entries = std::move(picked);
  }

  std::vector<EntryResult> results(entries.size());
  auto worker = [&](size_t begin, size_t end) {
    Clip local = clip;
    for (size_t k = begin; k < end; ++k) {
      const Entry& e = entries[k];
      std::vector<std::pair<int, int>> affected;
      for (const auto& pr : pairs)
        if (e.is_flow ? pr == e.pair : (pr.first == e.frame || pr.second == e.frame))
          affected.push_back(pr);
      double* value = e.is_flow ? &local.flows.at(e.pair).at(e.pixel, e.channel)
                                : &local.frames[e.frame].depth.at(e.pixel);
      const double original = *value;
      const double h = e.is_flow ? o.flow_step : o.depth_rel_step * std::abs(original);
      auto evaluate = [&](double v, std::vector<uint64_t>& states) {
        *value = v;
        double sum = 0.0;
        for (const auto& [c, i] : affected) {
          sum += pair_loss(local, c, i, tau, spec.mean_normalize);
          states.push_back(pair_state(local, c, i, tau));
        }
        return sum;
      };
      std::vector<uint64_t> s0, sp, sm;
      evaluate(original, s0);
      const double lp = evaluate(original + h, sp);
      const double lm = evaluate(original - h, sm);
      *value = original;
      results[k].stable = s0 == sp && s0 == sm;
      results[k].fd = norm * (lp - lm) / (2.0 * h);
    }
  };
  const size_t jobs = std::clamp<size_t>(o.jobs, 1, std::max<size_t>(entries.size(), 1));
  if (jobs == 1) {
    worker(0, entries.size());
  } else {
    std::vector<std::thread> pool;
    const size_t chunk = (entries.size() + jobs - 1) / jobs;
    for (size_t j = 0; j < jobs; ++j) {
      const size_t b = j * chunk, e = std::min(entries.size(), b + chunk);
      if (b < e) pool.emplace_back(worker, b, e);
    }
    for (auto& t : pool) t.join();
  }

  GradcheckResult r;
  r.loss = grad.loss;
  for (size_t k = 0; k < entries.size(); ++k) {
    const Entry& e = entries[k];
    if (!results[k].stable) {
      ++r.skipped;
      continue;
    }
    const double a = e.analytic, fd = results[k].fd;
    const double scale = std::max({std::abs(a), std::abs(fd), o.floor_ratio * p99});
    if (scale == 0.0) continue;
    ++r.checked;
    const double rel = std::abs(a - fd) / scale;
    if (rel > r.max_rel_error || r.worst.empty()) {
      r.max_rel_error = std::max(r.max_rel_error, rel);
      const uint32_t w = e.is_flow ? clip.flows.at(e.pair).width() : clip.frames[e.frame].depth.width();
      r.worst_x = static_cast<int>(e.pixel % w);
      r.worst_y = static_cast<int>(e.pixel / w);
      r.worst = e.is_flow ? "flow (" + std::to_string(e.pair.first) + ", " +
                                std::to_string(e.pair.second) + ") channel " +
                                (e.channel == 0 ? "u" : "v")
                          : "depth frame " + std::to_string(e.frame);
      r.worst += " at pixel (" + std::to_string(r.worst_x) + ", " + std::to_string(r.worst_y) + ")";
    }
  }
  r.passed = r.max_rel_error <= o.tolerance;
  return r;
}

}  // namespace geco
