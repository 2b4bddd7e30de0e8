#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "evaluation.hpp"
#include "oracles.hpp"
#include "scene_synth.hpp"
#include "support.hpp"

using namespace geco;

namespace {

LocalizationCase make_case(const std::vector<double>& pred, const std::vector<uint8_t>& gt) {
  LocalizationCase c{Field(static_cast<uint32_t>(pred.size()), 1, 1, 0.0),
                     Mask(static_cast<uint32_t>(pred.size()), 1), std::nullopt};
  for (size_t i = 0; i < pred.size(); ++i) {
    c.prediction.at(i) = pred[i];
    c.gt_mask.set(i, gt[i] != 0);
  }
  return c;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("ranking AP examples") {
    const std::vector<double> s{0.9, 0.8, 0.1};
    CHECK(ranking_ap(s, std::vector<uint8_t>{1, 1, 0}) == 1.0);
    CHECK(ranking_ap(s, std::vector<uint8_t>{1, 0, 1}) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    const std::vector<double> flat(10, 0.3);
    CHECK(ranking_ap(flat, std::vector<uint8_t>{1, 0, 0, 1, 0, 0, 0, 1, 0, 0}) ==
          doctest::Approx(0.3).epsilon(1e-15));
    CHECK_THROWS_AS(ranking_ap(s, std::vector<uint8_t>{0, 0, 0}), DomainError);
    CHECK_THROWS_AS(ranking_ap(s, std::vector<uint8_t>{0, 1}), ShapeError);
  }

  TEST_CASE("ranking AP only counts valid pixels") {
    LocalizationCase c = make_case({0.9, 0.1, 0.8, 0.7}, {1, 1, 0, 0});
    c.prediction.ensure_mask();
    c.prediction.set_valid(size_t{1}, false);
    const RankedPixels r = collect_valid(c);
    CHECK(r.scores.size() == 3);
    CHECK(ranking_ap(c) == 1.0);
  }

  TEST_CASE("ranking AP equals the brute-force oracle on lists with ties") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
      const size_t n = 2 + rng() % 60;
      const int levels = 1 + static_cast<int>(rng() % 8);
      std::vector<double> s(n);
      std::vector<uint8_t> l(n);
      for (size_t i = 0; i < n; ++i) {
        s[i] = static_cast<double>(rng() % levels) / levels;
        l[i] = rng() % 3 == 0;
      }
      l[rng() % n] = 1;
      CHECK(std::abs(ranking_ap(s, l) - test::ap_oracle(s, l)) <= 1e-12);
    }
  }

  TEST_CASE("ranking AP is invariant under monotone transforms") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> s(200), cube(200), logp(200);
      std::vector<uint8_t> l(200);
      for (size_t i = 0; i < 200; ++i) {
        s[i] = std::round(u(rng) * 20) / 20;
        cube[i] = s[i] * s[i] * s[i];
        logp[i] = std::log1p(s[i]);
        l[i] = u(rng) > 2.0;
      }
      l[0] = 1;
      const double ap = ranking_ap(s, l);
      CHECK(ranking_ap(cube, l) == ap);
      CHECK(ranking_ap(logp, l) == ap);
    }
  }

  TEST_CASE("best-threshold IoU and F1") {
    const std::vector<uint8_t> gt{1, 0};
    IouF1 r = best_threshold_iou_f1(std::vector<double>{0.9, 0.2}, gt);
    CHECK(r.iou == 1.0);
    CHECK(r.f1 == 1.0);
    r = best_threshold_iou_f1(std::vector<double>{0.2, 0.9}, gt);
    CHECK(r.iou == doctest::Approx(0.5));
    CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
    r = best_threshold_iou_f1(std::vector<double>{0.3, 0.1, 0.7}, std::vector<uint8_t>{1, 1, 1});
    CHECK(r.iou == 1.0);
    CHECK(r.f1 == 1.0);
    CHECK_THROWS_AS(best_threshold_iou_f1(std::vector<double>{0.3}, std::vector<uint8_t>{0}), DomainError);
    const LocalizationCase c = make_case({0.9, 0.2}, {1, 0});
    CHECK(best_threshold_iou_f1(c).iou == 1.0);
  }

  TEST_CASE("best F1 and best IoU respect the F1 = 2 IoU / (1 + IoU) bound") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      const size_t n = 5 + rng() % 80;
      std::vector<double> s(n);
      std::vector<uint8_t> l(n);
      for (size_t i = 0; i < n; ++i) {
        l[i] = u(rng) < 0.3;
        s[i] = std::round((u(rng) + 0.5 * l[i]) * 10) / 10;
      }
      l[0] = 1;
      const IouF1 r = best_threshold_iou_f1(s, l);
      CHECK(r.f1 >= 2 * r.iou / (1 + r.iou) - 1e-12);
      // Exhaustive sweep at every threshold.
      double best_iou = 0, best_f1 = 0;
      for (double t : s) {
        int tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < n; ++i) {
          const bool p = s[i] >= t;
          tp += p && l[i], fp += p && !l[i], fn += !p && l[i];
        }
        best_iou = std::max(best_iou, double(tp) / (tp + fp + fn));
        best_f1 = std::max(best_f1, 2.0 * tp / (2 * tp + fp + fn));
      }
      CHECK(r.iou == doctest::Approx(best_iou).epsilon(1e-14));
      CHECK(r.f1 == doctest::Approx(best_f1).epsilon(1e-14));
    }
  }

  TEST_CASE("Spearman correlation") {
    const std::vector<double> inc{1, 2, 3, 4, 5}, dec{9, 7, 5, 3, 1};
    CHECK(srcc(inc, inc) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(srcc(inc, dec) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(srcc(std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 3, 2, 4}) ==
          doctest::Approx(0.8).epsilon(1e-15));
    CHECK(average_ranks(std::vector<double>{3, 1, 3, 2}) == std::vector<double>{3.5, 1, 3.5, 2});
    CHECK_THROWS_AS(srcc(std::vector<double>{1}, std::vector<double>{1}), DomainError);
    CHECK_THROWS_AS(srcc(inc, std::vector<double>{1, 1, 1, 1, 1}), DomainError);
    CHECK_THROWS_AS(srcc(inc, std::vector<double>{1, 2}), ShapeError);
  }

  TEST_CASE("Spearman correlation equals the brute-force oracle on lists with ties") {
    std::mt19937_64 rng(8);
    int compared = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const size_t n = 2 + rng() % 50;
      std::vector<double> a(n), b(n);
      for (size_t i = 0; i < n; ++i) {
        a[i] = static_cast<double>(rng() % 6);
        b[i] = static_cast<double>(rng() % 9);
      }
      a[0] = 0, a[1] = 1, b[0] = 0, b[1] = 1;
      CHECK(std::abs(srcc(a, b) - test::srcc_oracle(a, b)) <= 1e-12);
      ++compared;
    }
    CHECK(compared == 1000);
  }

  TEST_CASE("Spearman correlation of a localization case") {
    LocalizationCase c = make_case({0.1, 0.5, 0.3, 0.9}, {0, 1, 0, 1});
    c.gt_magnitude = Field(4, 1, 1, 0.0);
    const double m[] = {0.0, 2.0, 1.0, 3.0};
    for (size_t i = 0; i < 4; ++i) c.gt_magnitude->at(i) = m[i];
    CHECK(srcc(c) == doctest::Approx(1.0));
    c.gt_magnitude.reset();
    CHECK_THROWS_AS(srcc(c), DomainError);
  }

  TEST_CASE("anomaly argmax") {
    CHECK(anomaly_argmax(std::vector<double>{0.1, 0.9, 0.2}) == 1);
    CHECK(anomaly_argmax(std::vector<double>{0.4, 0.4, 0.4}) == 0);
    CHECK(anomaly_argmax(std::vector<double>{0.1, 0.7, 0.7}) == 1);
    CHECK_THROWS_AS(anomaly_argmax(std::vector<double>{}), DomainError);
  }

  TEST_CASE("motion statistics") {
    const double diag = std::sqrt(64.0 * 64.0 + 48.0 * 48.0);
    SUBCASE("zero flow") {
      std::vector<Field> flows(4, test::constant_flow(64, 48, 0, 0));
      const MotionStats m = motion_stats(flows, 64, 48, 8.0);
      CHECK(m.total_motion == 0.0);
      CHECK(m.mean_motion == 0.0);
    }
    SUBCASE("constant magnitude of D/100 over ten pairs") {
      std::vector<Field> flows(10, test::constant_flow(64, 48, 0.6 * diag / 100, 0.8 * diag / 100));
      const MotionStats m = motion_stats(flows, 64, 48, 5.0);
      CHECK(m.total_motion == doctest::Approx(0.1).epsilon(1e-13));
      CHECK(m.duration == doctest::Approx(2.0));
      CHECK(m.mean_motion == m.total_motion / m.duration);
      REQUIRE(m.per_pair.size() == 10);
      CHECK(m.per_pair[3] == doctest::Approx(0.01).epsilon(1e-13));
    }
    SUBCASE("pairs without valid pixels are excluded") {
      std::vector<Field> flows(3, test::constant_flow(64, 48, diag / 10, 0));
      flows[1].ensure_mask();
      for (size_t p = 0; p < flows[1].pixel_count(); ++p) flows[1].set_valid(p, false);
      const MotionStats m = motion_stats(flows, 64, 48, 8.0);
      CHECK(std::isnan(m.per_pair[1]));
      CHECK(m.total_motion == doctest::Approx(0.2).epsilon(1e-13));
    }
    SUBCASE("resolution invariance") {
      const RenderedClip rc = render_clip(test::small_scene(CameraTrack::Kind::Orbit, 5), 1);
      std::vector<Field> low, high;
      for (int t = 0; t + 1 < 5; ++t) {
        const Field& f = rc.clip.flows.at({t, t + 1});
        low.push_back(f);
        Field up(128, 96, 2, 0.0);
        up.ensure_mask();
        for (uint32_t y = 0; y < 96; ++y)
          for (uint32_t x = 0; x < 128; ++x) {
            const size_t p = f.index(x / 2, y / 2);
            up.set_valid(x, y, f.valid(p));
            up.at(x, y, 0) = 2 * f.at(p, 0);
            up.at(x, y, 1) = 2 * f.at(p, 1);
          }
        high.push_back(std::move(up));
      }
      const MotionStats a = motion_stats(low, 64, 48, 8.0);
      const MotionStats b = motion_stats(high, 128, 96, 8.0);
      CHECK(a.total_motion > 0.0);
      CHECK(std::abs(a.total_motion - b.total_motion) <= 1e-12 * a.total_motion);
      CHECK(std::abs(a.mean_motion - b.mean_motion) <= 1e-12 * a.mean_motion);
    }
    SUBCASE("doubling the frame rate keeps the total motion") {
      SceneSpec slow = test::small_scene(CameraTrack::Kind::Orbit, 9, 0.5);
      SceneSpec fast = slow;
      fast.fps = 2 * slow.fps;
      fast.frame_count = 2 * slow.frame_count - 1;
      auto total = [](const SceneSpec& s) {
        std::vector<Field> flows;
        for (int t = 0; t + 1 < s.frame_count; ++t) flows.push_back(ground_truth_flow(s, t, t + 1));
        return motion_stats(flows, s.width, s.height, s.fps);
      };
      const MotionStats a = total(slow), b = total(fast);
      CHECK(std::abs(b.total_motion - a.total_motion) <= 0.05 * a.total_motion);
      CHECK(b.duration == doctest::Approx(a.duration));
    }
    SUBCASE("errors") {
      CHECK_THROWS_AS(motion_stats({}, 64, 48, 8.0), DomainError);
      std::vector<Field> flows(1, test::constant_flow(64, 48, 1, 0));
      CHECK_THROWS_AS(motion_stats(flows, 64, 48, 0.0), DomainError);
      CHECK_THROWS_AS(motion_stats(flows, 32, 48, 8.0), ShapeError);
    }
  }

  TEST_CASE("macro average") {
    CHECK(macro_average(std::vector<double>{1.0}) == 1.0);
    CHECK(macro_average(std::vector<double>{0.2, 0.8}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(macro_average(std::vector<double>{}), DomainError);
    std::mt19937_64 rng(60);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> anchors(60);
    long double sum = 0.0L;
    for (double& a : anchors) {
      a = u(rng);
      sum += a;
    }
    CHECK(std::abs(macro_average(anchors) - static_cast<double>(sum / 60.0L)) <= 1e-12);
  }
}
