#include <doctest.h>

#include <random>

#include "camera_geometry.hpp"
#include "support.hpp"

using namespace geco;

namespace {

// Depth of the plane n . X = d seen through pinhole k.
Frame tilted_plane(uint32_t w, uint32_t h, const Pinhole& k, const Vec3& n, double d) {
  Frame f{k, {}, Field(w, h, 1, 0.0)};
  for (uint32_t y = 0; y < h; ++y)
    for (uint32_t x = 0; x < w; ++x) {
      const Vec3 ray((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
      f.depth.at(x, y) = d / n.dot(ray);
    }
  return f;
}

}  // namespace

TEST_SUITE("camera_geometry") {
  TEST_CASE("backprojection of hand-evaluated pixels") {
    const Pinhole k{100, 100, 20, 30};
    const Vec3 a = backproject({20, 30}, 2.0, k);
    CHECK(a == Vec3(0, 0, 2));
    const Vec3 b = backproject({120, 30}, 1.0, k);
    CHECK(b == Vec3(1, 0, 1));
    const Vec3 c = backproject({70, 5}, 4.0, k);
    CHECK(c.x() == doctest::Approx(2.0));
    CHECK(c.y() == doctest::Approx(-1.0));
    CHECK(c.z() == 4.0);
    CHECK_THROWS_AS(backproject({0, 0}, 0.0, k), DomainError);
    CHECK_THROWS_AS(backproject({0, 0}, -1.0, k), DomainError);
  }

  TEST_CASE("projection of hand-evaluated points") {
    const Pinhole k{100, 100, 20, 30};
    const Projection p = project({0, 0, 2}, k);
    CHECK(p.pixel == Vec2(20, 30));
    CHECK(p.depth == 2.0);
    const Projection q = project(backproject({70, 5}, 4.0, k), k);
    CHECK(q.pixel.x() == doctest::Approx(70.0));
    CHECK(q.pixel.y() == doctest::Approx(5.0));
    const Projection r = project({1, 1, 0.5}, Pinhole{100, 100, 0, 0});
    CHECK(r.pixel == Vec2(200, 200));
    CHECK(r.depth == 0.5);
    CHECK_THROWS_AS(project({0, 0, 1e-7}, k), BehindCameraError);
    CHECK_THROWS_AS(project({0, 0, -1}, k), BehindCameraError);
    CHECK_FALSE(try_project({0, 0, kMinDepth}, k).has_value());
  }

  TEST_CASE("project after backproject is the identity on random pinholes") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> focal(50, 800), centre(0, 400), pix(-100, 600),
        depth(1e-3, 1e3);
    double worst = 0.0;
    for (int i = 0; i < 5000; ++i) {
      const Pinhole k{focal(rng), focal(rng), centre(rng), centre(rng)};
      const Vec2 p(pix(rng), pix(rng));
      const Projection q = project(backproject(p, depth(rng), k), k);
      worst = std::max(worst, (q.pixel - p).norm());
    }
    CHECK(worst <= 1e-9);
  }

  TEST_CASE("rigid flow of identity, translation and forward motion") {
    const Pinhole k{100, 100, 4, 4};
    const Frame f = test::plane_frame(9, 9, k, 2.0);

    const Field still = rigid_flow(f, RigidTransform{}, k);
    for (size_t p = 0; p < still.pixel_count(); ++p) {
      CHECK(still.valid(p));
      CHECK(still.at(p, 0) == 0.0);
      CHECK(still.at(p, 1) == 0.0);
    }

    const Field side = rigid_flow(f, test::translation(0.2, 0, 0), k);
    for (size_t p = 0; p < side.pixel_count(); ++p) {
      CHECK(side.at(p, 0) == doctest::Approx(10.0).epsilon(1e-12));
      CHECK(side.at(p, 1) == 0.0);
    }

    const Field fwd = rigid_flow(f, test::translation(0, 0, -0.5), k);
    CHECK(fwd.at(4u, 4u, 0) == 0.0);
    CHECK(fwd.at(4u, 4u, 1) == 0.0);
    // Pixel (8, 4): X = 0.08 at depth 2 moves to depth 1.5, so u = cx + 100 * 0.08 / 1.5.
    CHECK(fwd.at(8u, 4u, 0) == doctest::Approx(100 * 0.08 / 1.5 - 4.0));
    CHECK(fwd.at(8u, 4u, 1) == 0.0);
    CHECK(fwd.at(0u, 0u, 0) < 0.0);
    CHECK(fwd.at(0u, 0u, 1) < 0.0);
    CHECK(fwd.at(2u, 6u, 0) == doctest::Approx(-fwd.at(6u, 2u, 0)));
    CHECK(fwd.at(2u, 6u, 1) == doctest::Approx(-fwd.at(6u, 2u, 1)));
  }

  TEST_CASE("rigid flow is invalid behind the target camera and where depth is invalid") {
    const Pinhole k{100, 100, 4, 4};
    Frame f = test::plane_frame(9, 9, k, 2.0);
    f.depth.set_valid(3, 3, false);
    const Field flow = rigid_flow(f, test::translation(0, 0, -3.0), k);
    CHECK_FALSE(flow.valid(0u, 0u));
    const Field ok = rigid_flow(f, RigidTransform{}, k);
    CHECK_FALSE(ok.valid(3u, 3u));
    CHECK(ok.valid(4u, 4u));
  }

  TEST_CASE("bilinear sampling contract") {
    Field g(2, 2, 1, 0.0);
    g.at(0u, 0u) = 1.0;
    g.at(1u, 0u) = 3.0;
    g.at(0u, 1u) = 5.0;
    g.at(1u, 1u) = 7.0;
    CHECK(*bilinear_sample(g, {1, 1}) == 7.0);
    CHECK(*bilinear_sample(g, {0.5, 0}) == 2.0);
    CHECK(*bilinear_sample(g, {0.5, 0.5}) == 4.0);
    CHECK_FALSE(bilinear_sample(g, {-0.5, 0}).has_value());
    CHECK_FALSE(bilinear_sample(g, {1.0001, 0}).has_value());

    g.set_valid(1u, 1u, false);
    CHECK_FALSE(bilinear_sample(g, {0.5, 0.5}).has_value());
    // The invalid neighbour carries zero weight here.
    CHECK(*bilinear_sample(g, {0.5, 0.0}) == 2.0);
    CHECK(*bilinear_sample(g, {0.0, 0.25}) == 2.0);

    Field two(2, 1, 2, 0.0);
    two.at(1u, 0u, 0) = 4.0;
    two.at(1u, 0u, 1) = -2.0;
    double out[2] = {9, 9};
    CHECK(bilinear_sample(two, Vec2(0.25, 0), std::span<double>(out)));
    CHECK(out[0] == 1.0);
    CHECK(out[1] == -0.5);
  }

  TEST_CASE("sample gradient matches the slope of a linear field") {
    Field g(3, 3, 1, 0.0);
    for (uint32_t y = 0; y < 3; ++y)
      for (uint32_t x = 0; x < 3; ++x) g.at(x, y) = 2.0 * x - 3.0 * y;
    const auto fp = footprint(g, Vec2(0.3, 1.6));
    REQUIRE(fp);
    const Vec2 d = sample_gradient(g, *fp);
    CHECK(d.x() == doctest::Approx(2.0));
    CHECK(d.y() == doctest::Approx(-3.0));
  }

  TEST_CASE("covisibility on identical geometry covers all valid depth") {
    const Pinhole k{50, 50, 5, 4};
    Frame f = test::plane_frame(11, 9, k, 3.0);
    f.depth.set_valid(2, 2, false);
    const CovisibilityResult r = covisibility_masks(f, f, RigidTransform{}, kDefaultTau);
    for (size_t p = 0; p < r.covis.pixel_count(); ++p) CHECK(r.covis[p] == f.depth.valid(p));
  }

  TEST_CASE("a nearer occluder in the target masks the covered pixels") {
    const Pinhole k{50, 50, 5, 4};
    const Frame a = test::plane_frame(11, 9, k, 2.0);
    Frame b = a;
    for (uint32_t y = 3; y <= 5; ++y)
      for (uint32_t x = 4; x <= 6; ++x) b.depth.at(x, y) = 1.0;
    const CovisibilityResult r = covisibility_masks(a, b, RigidTransform{}, kDefaultTau);
    for (uint32_t y = 0; y < 9; ++y)
      for (uint32_t x = 0; x < 11; ++x) {
        const bool inside = x >= 4 && x <= 6 && y >= 3 && y <= 5;
        CHECK(r.covis(x, y) == !inside);
        CHECK(r.sampled(x, y));
      }
  }

  TEST_CASE("relative gap just under tau stays co-visible") {
    const Pinhole k{50, 50, 2, 2};
    const Frame a = test::plane_frame(5, 5, k, 1.0);
    const Frame b = test::plane_frame(5, 5, k, 0.985);
    const CovisibilityResult r = covisibility_masks(a, b, RigidTransform{}, 0.02);
    CHECK(r.z_proj.at(2u, 2u) == 1.0);
    CHECK(r.d_hat.at(2u, 2u) == 0.985);
    CHECK(r.covis(2, 2));
    const Frame c = test::plane_frame(5, 5, k, 0.97);
    CHECK_FALSE(covisibility_masks(a, c, RigidTransform{}, 0.02).covis(2, 2));
  }

  TEST_CASE("forward then backward rigid flow composes to the identity on smooth depth") {
    const Pinhole k{120, 120, 31.5, 23.5};
    const Vec3 n = Vec3(0.1, -0.2, 1.0).normalized();
    const Frame a = tilted_plane(64, 48, k, n, 3.0);
    const RigidTransform a_to_b = test::rotation(0.03, Vec3(0.2, 1, 0.1), Vec3(0.12, -0.05, 0.08));
    // Frame b sees the same plane from its own pose.
    const Vec3 nb = a_to_b.rotation * n;
    const double db = 3.0 + nb.dot(a_to_b.translation);
    const Frame b = tilted_plane(64, 48, k, nb, db);

    const Field ab = rigid_flow(a, a_to_b, k);
    const Field ba = rigid_flow(b, a_to_b.inverse(), k);
    double worst = 0.0;
    size_t checked = 0;
    for (uint32_t y = 0; y < 48; ++y)
      for (uint32_t x = 0; x < 64; ++x) {
        if (!ab.valid(x, y)) continue;
        const Vec2 q(x + ab.at(x, y, 0), y + ab.at(x, y, 1));
        double back[2];
        if (!bilinear_sample(ba, q, std::span<double>(back))) continue;
        worst = std::max(worst, Vec2(ab.at(x, y, 0) + back[0], ab.at(x, y, 1) + back[1]).norm());
        ++checked;
      }
    CHECK(checked > 2000);
    CHECK(worst <= 1e-3);
  }

  TEST_CASE("covisibility is consistent under swapping the frames") {
    const Pinhole k{120, 120, 31.5, 23.5};
    const Vec3 n = Vec3(0.0, 0.1, 1.0).normalized();
    Frame a = tilted_plane(64, 48, k, n, 3.0);
    const RigidTransform a_to_b = test::translation(0.15, 0.0, 0.05);
    const Vec3 nb = a_to_b.rotation * n;
    Frame b = tilted_plane(64, 48, k, nb, 3.0 + nb.dot(a_to_b.translation));
    // A box in front of the plane, seen by both frames.
    for (uint32_t y = 20; y < 30; ++y)
      for (uint32_t x = 25; x < 35; ++x) b.depth.at(x, y) = 1.5;
    const CovisibilityResult fwd = covisibility_masks(a, b, a_to_b, kDefaultTau);
    const CovisibilityResult rev = covisibility_masks(b, a, a_to_b.inverse(), kDefaultTau);
    size_t agree = 0, total = 0;
    for (uint32_t y = 0; y < 48; ++y)
      for (uint32_t x = 0; x < 64; ++x) {
        // Rounding the target onto a border row or column is not a disagreement.
        if (!fwd.covis(x, y) || x < 1 || y < 1 || x > 62 || y > 46) continue;
        const long qx = std::lround(fwd.target.at(x, y, 0)), qy = std::lround(fwd.target.at(x, y, 1));
        if (qx < 1 || qy < 1 || qx > 62 || qy > 46) continue;
        ++total;
        agree += rev.covis(static_cast<uint32_t>(qx), static_cast<uint32_t>(qy));
      }
    REQUIRE(total > 1000);
    CHECK(static_cast<double>(agree) / total >= 0.99);
  }

  TEST_CASE("rescaling keeps projection exact") {
    const Pinhole k{80, 90, 15.5, 11.5};
    const Frame f = test::plane_frame(32, 24, k, 4.0);
    const Frame half = rescale_geometry(f, 16, 12);
    CHECK(half.intrinsics.fx == 40.0);
    CHECK(half.intrinsics.fy == 45.0);
    CHECK(half.intrinsics.cx == 7.5);
    CHECK(half.intrinsics.cy == 5.5);
    for (uint32_t y = 0; y < 12; ++y)
      for (uint32_t x = 0; x < 16; ++x) {
        if (!half.depth.valid(x, y)) continue;
        const Vec3 X = backproject(Vec2(x, y), half.depth.at(x, y), half.intrinsics);
        const Projection p = project(X, k);
        CHECK(p.pixel.x() == doctest::Approx((x + 0.5) * 2 - 0.5));
        CHECK(p.pixel.y() == doctest::Approx((y + 0.5) * 2 - 0.5));
      }
    CHECK_THROWS_AS(rescale_geometry(f, 0, 4), DomainError);
  }
}
