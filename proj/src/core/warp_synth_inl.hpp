#pragma once

namespace geco {

template <typename T>
Grid<T> warp_frame(const Grid<T>& frame, const Field& displacement) {
  if (displacement.channels() != 2 || !displacement.same_shape(frame))
    throw ShapeError("warp_frame: displacement must be two channels at the frame's resolution");
  Grid<T> out(frame.width(), frame.height(), frame.channels(), T{});
  out.ensure_mask();
  for (uint32_t y = 0; y < frame.height(); ++y)
    for (uint32_t x = 0; x < frame.width(); ++x) {
      bool ok = displacement.valid(x, y);
      if (ok) {
        const double dx = displacement.at(x, y, 0), dy = displacement.at(x, y, 1);
        auto fp = footprint(frame, Vec2(x + dx, y + dy));
        ok = fp.has_value();
        if (ok)
          for (uint32_t c = 0; c < frame.channels(); ++c)
            out.at(x, y, c) = static_cast<T>(sample(frame, *fp, c));
      }
      out.set_valid(x, y, ok);
    }
  if (!frame.has_mask() && out.valid_count() == out.pixel_count()) out.mask().clear();
  return out;
}

}  // namespace geco
