#include "warp_synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Dense>

namespace geco {

double tps_kernel(double r) noexcept { return r > 0.0 ? r * r * std::log(r) : 0.0; }

Vec2 TpsWarp::displacement(const Vec2& p) const {
  Vec2 d = affine_delta * p + offset;
  for (size_t i = 0; i < controls.size(); ++i)
    d += rbf_weights[i] * tps_kernel((p - controls[i]).norm());
  return d;
}

Vec2 evaluate_warp(const TpsWarp& w, const Vec2& p) { return p + w.displacement(p); }

std::vector<Vec2> farthest_point_sample_from(const Mask& mask, size_t k, size_t first_pixel) {
  std::vector<size_t> cand;
  for (size_t i = 0; i < mask.pixel_count(); ++i)
    if (mask[i]) cand.push_back(i);
  if (cand.size() < k)
    throw DomainError("farthest_point_sample: mask has " + std::to_string(cand.size()) +
                      " pixels, need " + std::to_string(k));
  if (first_pixel >= mask.pixel_count() || !mask[first_pixel])
    throw DomainError("farthest_point_sample: start pixel is not inside the mask");
  std::vector<Vec2> out;
  if (k == 0) return out;
  const uint32_t w = mask.width();
  auto xy = [w](size_t i) { return std::pair<int64_t, int64_t>(i % w, i / w); };
  std::vector<int64_t> best(cand.size(), std::numeric_limits<int64_t>::max());
  size_t pick = first_pixel;
  for (size_t n = 0; n < k; ++n) {
    auto [px, py] = xy(pick);
    out.emplace_back(static_cast<double>(px), static_cast<double>(py));
    if (n + 1 == k) break;
    int64_t far = -1;
    for (size_t j = 0; j < cand.size(); ++j) {
      auto [x, y] = xy(cand[j]);
      const int64_t d2 = (x - px) * (x - px) + (y - py) * (y - py);
      best[j] = std::min(best[j], d2);
      if (best[j] > far) {
        far = best[j];
        pick = cand[j];
      }
    }
  }
  return out;
}

std::vector<Vec2> farthest_point_sample(const Mask& mask, size_t k, uint64_t seed) {
  const size_t n = mask.count();
  if (n < k || n == 0)
    throw DomainError("farthest_point_sample: mask has " + std::to_string(n) + " pixels, need " +
                      std::to_string(k));
  std::mt19937_64 rng(seed);
  size_t nth = rng() % n;
  for (size_t i = 0; i < mask.pixel_count(); ++i)
    if (mask[i] && nth-- == 0) return farthest_point_sample_from(mask, k, i);
  throw DomainError("farthest_point_sample: unreachable");
}

TpsWarp fit_tps(const std::vector<Vec2>& controls, const std::vector<Vec2>& targets,
                double regularization) {
  const size_t k = controls.size();
  if (targets.size() != k) throw ShapeError("fit_tps: controls and targets differ in length");
  if (k < 3) throw SolveError("fit_tps: need at least 3 control points, got " + std::to_string(k));
  if (!(regularization >= 0.0)) throw DomainError("fit_tps: regularization must be >= 0");

  Eigen::MatrixXd p(k, 3);
  for (size_t i = 0; i < k; ++i) p.row(i) << 1.0, controls[i].x(), controls[i].y();
  {
    Eigen::MatrixXd centered = p.rightCols(2).rowwise() - p.rightCols(2).colwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
    const auto sv = svd.singularValues();
    if (sv(0) <= 0.0 || sv(1) <= 1e-9 * sv(0))
      throw SolveError("fit_tps: control points are collinear or coincident");
  }

  const size_t n = k + 3;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (size_t i = 0; i < k; ++i)
    for (size_t j = 0; j < k; ++j)
      l(i, j) = tps_kernel((controls[i] - controls[j]).norm()) + (i == j ? regularization : 0.0);
  l.topRightCorner(k, 3) = p;
  l.bottomLeftCorner(3, k) = p.transpose();

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
  for (size_t i = 0; i < k; ++i) rhs.row(i) = (targets[i] - controls[i]).transpose();

  Eigen::FullPivLU<Eigen::MatrixXd> lu(l);
  if (lu.rank() < static_cast<Eigen::Index>(n))
    throw SolveError("fit_tps: system is singular (rank " + std::to_string(lu.rank()) + " of " +
                     std::to_string(n) + ")");
  Eigen::MatrixXd sol = lu.solve(rhs);
  const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
  if (!sol.allFinite() || (l * sol - rhs).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw SolveError("fit_tps: solve did not converge");

  TpsWarp w;
  w.controls = controls;
  w.targets = targets;
  w.rbf_weights.resize(k);
  for (size_t i = 0; i < k; ++i) w.rbf_weights[i] = sol.row(i).transpose();
  w.offset = sol.row(k).transpose();
  w.affine_delta.col(0) = sol.row(k + 1).transpose();
  w.affine_delta.col(1) = sol.row(k + 2).transpose();
  return w;
}

namespace {

// Squared distance transform of a sampled function along one line.
void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const size_t n = f.size();
  std::vector<size_t> v(n);
  std::vector<double> z(n + 1);
  size_t k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (size_t q = 1; q < n; ++q) {
    double s;
    while (true) {
      const double dq = static_cast<double>(q), dv = static_cast<double>(v[k]);
      s = ((f[q] + dq * dq) - (f[v[k]] + dv * dv)) / (2.0 * dq - 2.0 * dv);
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      v[0] = q;
      z[0] = -std::numeric_limits<double>::infinity();
      z[1] = std::numeric_limits<double>::infinity();
      k = 0;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double dq = static_cast<double>(q) - static_cast<double>(v[k]);
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

Field feather_weights(const Mask& mask, double radius) {
  if (!(radius > 0.0)) throw DomainError("feather_weights: radius must be positive");
  const uint32_t w = mask.width(), h = mask.height();
  const size_t pw = w + 2, ph = h + 2;
  // A large finite value keeps the parabola intersections well defined.
  const double big = 1e20;
  std::vector<double> g(pw * ph, 0.0);
  for (uint32_t y = 0; y < h; ++y)
    for (uint32_t x = 0; x < w; ++x) g[(y + 1) * pw + x + 1] = mask(x, y) ? big : 0.0;

  std::vector<double> line, out;
  line.resize(ph);
  out.resize(ph);
  for (size_t x = 0; x < pw; ++x) {
    for (size_t y = 0; y < ph; ++y) line[y] = g[y * pw + x];
    edt_1d(line, out);
    for (size_t y = 0; y < ph; ++y) g[y * pw + x] = out[y];
  }
  line.resize(pw);
  out.resize(pw);
  for (size_t y = 0; y < ph; ++y) {
    for (size_t x = 0; x < pw; ++x) line[x] = g[y * pw + x];
    edt_1d(line, out);
    for (size_t x = 0; x < pw; ++x) g[y * pw + x] = out[x];
  }

  Field f(w, h, 1, 0.0);
  for (uint32_t y = 0; y < h; ++y)
    for (uint32_t x = 0; x < w; ++x)
      f.at(x, y) = std::clamp(std::sqrt(g[(y + 1) * pw + x + 1]) / radius, 0.0, 1.0);
  return f;
}

GroundTruthField displacement_field(const TpsWarp& warp, uint32_t width, uint32_t height,
                                    const Field& feather, const Field* prev_ema, double beta) {
  if (!feather.same_shape(width, height) || feather.channels() != 1)
    throw ShapeError("displacement_field: feather map does not match the frame");
  if (prev_ema && (!prev_ema->same_shape(width, height) || prev_ema->channels() != 2))
    throw ShapeError("displacement_field: previous field does not match the frame");
  if (!(beta >= 0.0 && beta < 1.0)) throw DomainError("displacement_field: beta must be in [0, 1)");
  GroundTruthField gt{Field(width, height, 2, 0.0), Field(width, height, 1, 0.0)};
  for (uint32_t y = 0; y < height; ++y)
    for (uint32_t x = 0; x < width; ++x) {
      const double wf = feather.at(x, y);
      Vec2 u = Vec2::Zero();
      if (wf > 0.0) u = wf * warp.displacement(Vec2(x, y));
      if (prev_ema) {
        u.x() = beta * prev_ema->at(x, y, 0) + (1.0 - beta) * u.x();
        u.y() = beta * prev_ema->at(x, y, 1) + (1.0 - beta) * u.y();
      }
      gt.displacement.at(x, y, 0) = u.x();
      gt.displacement.at(x, y, 1) = u.y();
      gt.magnitude.at(x, y) = std::sqrt(u.x() * u.x() + u.y() * u.y());
    }
  return gt;
}

void validate_deform_spec(const DeformClipSpec& s) {
  if (s.control_count < 3) throw DomainError("deform spec: control_count must be >= 3");
  if (!(s.displacement_scale >= 0.0) || !std::isfinite(s.displacement_scale))
    throw DomainError("deform spec: displacement_scale must be finite and >= 0");
  if (!std::isfinite(s.omega)) throw DomainError("deform spec: omega must be finite");
  if (!(s.ema_beta >= 0.0 && s.ema_beta < 1.0))
    throw DomainError("deform spec: ema_beta must be in [0, 1)");
  if (!(s.feather_radius > 0.0)) throw DomainError("deform spec: feather_radius must be > 0");
  if (!(s.mask_threshold >= 0.0)) throw DomainError("deform spec: mask_threshold must be >= 0");
  if (!(s.regularization >= 0.0)) throw DomainError("deform spec: regularization must be >= 0");
}

std::vector<Vec2> control_drift(const DeformClipSpec& spec, const std::vector<Vec2>& phases,
                                int frame) {
  std::vector<Vec2> out;
  out.reserve(phases.size());
  for (const Vec2& ph : phases)
    out.emplace_back(spec.displacement_scale * std::sin(spec.omega * frame + ph.x()),
                     spec.displacement_scale * std::sin(spec.omega * frame + ph.y()));
  return out;
}

namespace {

bool all_zero(const Field& f) {
  return std::all_of(f.values().begin(), f.values().end(), [](double v) { return v == 0.0; });
}

// F'(p) = F(p + U(p)) + U(p): flow leaving a deformed frame.
Field rebase_source(const Field& flow, const Field& disp) {
  Field out(flow.width(), flow.height(), 2, 0.0);
  out.ensure_mask();
  double tmp[2];
  for (uint32_t y = 0; y < flow.height(); ++y)
    for (uint32_t x = 0; x < flow.width(); ++x) {
      const double ux = disp.at(x, y, 0), uy = disp.at(x, y, 1);
      bool ok;
      if (ux == 0.0 && uy == 0.0) {
        ok = flow.valid(x, y);
        tmp[0] = flow.at(x, y, 0);
        tmp[1] = flow.at(x, y, 1);
      } else {
        ok = bilinear_sample(flow, Vec2(x + ux, y + uy), tmp);
        tmp[0] += ux;
        tmp[1] += uy;
      }
      out.set_valid(x, y, ok);
      if (ok) {
        out.at(x, y, 0) = tmp[0];
        out.at(x, y, 1) = tmp[1];
      }
    }
  if (!flow.has_mask() && out.valid_count() == out.pixel_count()) out.mask().clear();
  return out;
}

// Deformed target: content at x in the original frame appears at y with
// y + U(y) = x. Solved by fixed-point iteration.
Field rebase_target(const Field& flow, const Field& disp) {
  Field out = flow;
  out.ensure_mask();
  double u[2];
  for (uint32_t y = 0; y < flow.height(); ++y)
    for (uint32_t x = 0; x < flow.width(); ++x) {
      if (!flow.valid(x, y)) continue;
      const Vec2 arrive(x + flow.at(x, y, 0), y + flow.at(x, y, 1));
      Vec2 q = arrive;
      bool ok = false;
      for (int it = 0; it < 100; ++it) {
        if (!bilinear_sample(disp, q, u)) break;
        const Vec2 next = arrive - Vec2(u[0], u[1]);
        const double step = (next - q).norm();
        q = next;
        if (step < 1e-12) {
          ok = true;
          break;
        }
      }
      if (ok && !footprint(disp, q)) ok = false;
      out.set_valid(x, y, ok);
      if (ok && q != arrive) {
        out.at(x, y, 0) += q.x() - arrive.x();
        out.at(x, y, 1) += q.y() - arrive.y();
      }
    }
  if (!flow.has_mask() && out.valid_count() == out.pixel_count()) out.mask().clear();
  return out;
}

}  // namespace

Clip generate_warp_clip(const Clip& base, const DeformClipSpec& spec,
                        const std::vector<int>& warped_frames, uint64_t seed,
                        const std::map<int, Mask>* foreground) {
  validate_deform_spec(spec);
  std::vector<int> warped = warped_frames;
  std::sort(warped.begin(), warped.end());
  warped.erase(std::unique(warped.begin(), warped.end()), warped.end());
  for (int t : warped)
    if (t < 0 || t >= base.frame_count())
      throw DomainError("generate_warp_clip: frame " + std::to_string(t) + " is out of range");

  Clip out = base;
  if (warped.empty()) return out;

  auto fg = [&](int t) {
    if (foreground) {
      auto it = foreground->find(t);
      if (it != foreground->end()) return it->second;
    }
    return validity_of(base.frames[t].depth);
  };

  const uint32_t w = base.frames[warped[0]].depth.width();
  const uint32_t h = base.frames[warped[0]].depth.height();
  const std::vector<Vec2> controls =
      farthest_point_sample(fg(warped[0]), static_cast<size_t>(spec.control_count), seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<Vec2> phases(controls.size());
  for (Vec2& ph : phases) {
    const double a = phase(rng);
    const double b = phase(rng);
    ph = Vec2(a, b);
  }

  std::map<int, Field> disp;
  const Field* prev = nullptr;
  for (int t : warped) {
    const Frame& f = base.frames[t];
    if (!f.depth.same_shape(w, h)) throw ShapeError("generate_warp_clip: frame sizes differ");
    const std::vector<Vec2> drift = control_drift(spec, phases, t);
    std::vector<Vec2> targets(controls.size());
    for (size_t i = 0; i < controls.size(); ++i) targets[i] = controls[i] + drift[i];
    const TpsWarp tps = fit_tps(controls, targets, spec.regularization);
    const Field feather = feather_weights(fg(t), spec.feather_radius);
    GroundTruthField gt = displacement_field(tps, w, h, feather, prev, spec.ema_beta);

    Mask m(w, h);
    for (size_t p = 0; p < m.pixel_count(); ++p) m.set(p, gt.magnitude.at(p) > spec.mask_threshold);
    out.ground_truth[t] = GroundTruth{gt.displacement, m};
    disp[t] = std::move(gt.displacement);
    prev = &disp[t];
  }

  for (int t : warped) {
    const Field& d = disp[t];
    if (all_zero(d)) continue;
    out.frames[t].depth = warp_frame(base.frames[t].depth, d);
  }
  for (auto& [key, flow] : out.flows) {
    auto src = disp.find(key.first);
    auto dst = disp.find(key.second);
    if (src != disp.end() && !all_zero(src->second)) flow = rebase_source(flow, src->second);
    if (dst != disp.end() && !all_zero(dst->second)) flow = rebase_target(flow, dst->second);
  }

  nlohmann::json meta = out.metadata.is_object() ? out.metadata : nlohmann::json::object();
  meta["warped_frames"] = warped;
  meta["deform"] = {{"control_count", spec.control_count},
                    {"displacement_scale", spec.displacement_scale},
                    {"omega", spec.omega},
                    {"ema_beta", spec.ema_beta},
                    {"feather_radius", spec.feather_radius},
                    {"mask_threshold", spec.mask_threshold},
                    {"seed", seed}};
  out.metadata = std::move(meta);
  return out;
}

}  // namespace geco
