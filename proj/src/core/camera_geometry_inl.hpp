#pragma once

#include <cmath>

namespace geco {

template <typename T>
std::optional<Footprint> footprint(const Grid<T>& g, const Vec2& q) noexcept {
  auto snap = [](double c) {
    const double r = std::round(c);
    return std::abs(c - r) <= kSnapDistance ? r : c;
  };
  const double u = snap(q.x()), v = snap(q.y());
  if (!(u >= 0.0 && v >= 0.0 && u <= g.width() - 1.0 && v <= g.height() - 1.0)) return std::nullopt;
  Footprint f;
  f.x0 = static_cast<uint32_t>(std::floor(u));
  f.y0 = static_cast<uint32_t>(std::floor(v));
  f.fx = u - f.x0;
  f.fy = v - f.y0;
  for (int dy = 0; dy < 2; ++dy)
    for (int dx = 0; dx < 2; ++dx)
      if (f.weight(dx, dy) > 0.0 && !g.valid(f.x0 + dx, f.y0 + dy)) return std::nullopt;
  return f;
}

template <typename T>
double sample(const Grid<T>& g, const Footprint& f, uint32_t channel) noexcept {
  double acc = 0.0;
  bool first = true;
  for (int dy = 0; dy < 2; ++dy)
    for (int dx = 0; dx < 2; ++dx) {
      const double w = f.weight(dx, dy);
      if (w <= 0.0) continue;
      const double term = static_cast<double>(g.at(f.x0 + dx, f.y0 + dy, channel));
      // A lone unit weight reproduces the stored value bit-exactly.
      acc = first ? (w == 1.0 ? term : w * term) : acc + w * term;
      first = false;
    }
  return acc;
}

template <typename T>
Vec2 sample_gradient(const Grid<T>& g, const Footprint& f, uint32_t channel) noexcept {
  auto value = [&](int dx, int dy) -> std::optional<double> {
    const uint32_t x = f.x0 + dx, y = f.y0 + dy;
    if (x >= g.width() || y >= g.height() || !g.valid(x, y)) return std::nullopt;
    return static_cast<double>(g.at(x, y, channel));
  };
  Vec2 grad = Vec2::Zero();
  for (int dy = 0; dy < 2; ++dy) {
    const double wy = dy ? f.fy : 1.0 - f.fy;
    if (wy <= 0.0) continue;
    auto a = value(0, dy), b = value(1, dy);
    if (a && b) grad.x() += wy * (*b - *a);
  }
  for (int dx = 0; dx < 2; ++dx) {
    const double wx = dx ? f.fx : 1.0 - f.fx;
    if (wx <= 0.0) continue;
    auto a = value(dx, 0), b = value(dx, 1);
    if (a && b) grad.y() += wx * (*b - *a);
  }
  return grad;
}

template <typename T>
bool bilinear_sample(const Grid<T>& g, const Vec2& q, std::span<double> out) noexcept {
  auto f = footprint(g, q);
  if (!f) return false;
  for (uint32_t c = 0; c < g.channels() && c < out.size(); ++c) out[c] = sample(g, *f, c);
  return true;
}

}  // namespace geco
