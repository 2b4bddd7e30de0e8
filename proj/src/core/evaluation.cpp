#include "evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "errors.hpp"

namespace geco {

RankedPixels collect_valid(const LocalizationCase& c) {
  const Field& pred = c.prediction;
  if (pred.channels() != 1) throw ShapeError("localization: prediction must have one channel");
  if (c.gt_mask.width() != pred.width() || c.gt_mask.height() != pred.height())
    throw ShapeError("localization: prediction and mask differ in shape");
  if (c.gt_magnitude && (!c.gt_magnitude->same_shape(pred) || c.gt_magnitude->channels() != 1))
    throw ShapeError("localization: magnitude raster does not match the prediction");
  RankedPixels r;
  for (size_t p = 0; p < pred.pixel_count(); ++p) {
    if (!pred.valid(p)) continue;
    if (c.gt_magnitude && !c.gt_magnitude->valid(p)) continue;
    r.scores.push_back(pred.at(p));
    r.labels.push_back(c.gt_mask[p] ? 1 : 0);
    if (c.gt_magnitude) r.magnitudes.push_back(c.gt_magnitude->at(p));
  }
  return r;
}

namespace {

std::vector<size_t> descending_order(std::span<const double> scores) {
  std::vector<size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  return idx;
}

void check_inputs(std::span<const double> scores, std::span<const uint8_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  for (double s : scores)
    if (std::isnan(s)) throw DomainError("scores contain NaN");
  if (std::none_of(labels.begin(), labels.end(), [](uint8_t l) { return l != 0; }))
    throw DomainError("ground truth has no positive pixel");
}

}  // namespace

double ranking_ap(std::span<const double> scores, std::span<const uint8_t> labels) {
  check_inputs(scores, labels);
  const auto idx = descending_order(scores);
  size_t tp = 0, seen = 0, positives = 0;
  double acc = 0.0;
  for (size_t i = 0; i < idx.size();) {
    size_t j = i, block_pos = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) block_pos += labels[idx[j++]] != 0;
    tp += block_pos;
    seen += j - i;
    positives += block_pos;
    acc += static_cast<double>(block_pos) * (static_cast<double>(tp) / static_cast<double>(seen));
    i = j;
  }
  return acc / static_cast<double>(positives);
}

double ranking_ap(const LocalizationCase& c) {
  const RankedPixels r = collect_valid(c);
  return ranking_ap(r.scores, r.labels);
}

IouF1 best_threshold_iou_f1(std::span<const double> scores, std::span<const uint8_t> labels) {
  check_inputs(scores, labels);
  const auto idx = descending_order(scores);
  const size_t positives = std::count_if(labels.begin(), labels.end(), [](uint8_t l) { return l; });
  IouF1 best;
  size_t tp = 0, fp = 0;
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      if (labels[idx[j]]) ++tp;
      else ++fp;
      ++j;
    }
    const double fn = static_cast<double>(positives - tp);
    const double dtp = static_cast<double>(tp), dfp = static_cast<double>(fp);
    best.iou = std::max(best.iou, dtp / (dtp + dfp + fn));
    best.f1 = std::max(best.f1, 2.0 * dtp / (2.0 * dtp + dfp + fn));
    i = j;
  }
  return best;
}

IouF1 best_threshold_iou_f1(const LocalizationCase& c) {
  const RankedPixels r = collect_valid(c);
  return best_threshold_iou_f1(r.scores, r.labels);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (size_t i = 0; i < idx.size();) {
    size_t j = i;
    while (j < idx.size() && v[idx[j]] == v[idx[i]]) ++j;
    // Positions i+1 .. j share their mean.
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (size_t k = i; k < j; ++k) ranks[idx[k]] = r;
    i = j;
  }
  return ranks;
}

double srcc(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("srcc: lists differ in length");
  if (a.size() < 2) throw DomainError("srcc: need at least two values");
  for (size_t i = 0; i < a.size(); ++i)
    if (std::isnan(a[i]) || std::isnan(b[i])) throw DomainError("srcc: values contain NaN");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  // Both rank vectors have mean (n + 1) / 2.
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean, db = rb[i] - mean;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw DomainError("srcc: a list has zero rank variance");
  return sab / std::sqrt(saa * sbb);
}

double srcc(const LocalizationCase& c) {
  if (!c.gt_magnitude) throw DomainError("srcc: case has no ground-truth magnitude");
  const RankedPixels r = collect_valid(c);
  return srcc(r.scores, r.magnitudes);
}

int anomaly_argmax(std::span<const double> scores) {
  if (scores.empty()) throw DomainError("anomaly_argmax: no scores");
  size_t best = 0;
  for (size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best] || (std::isnan(scores[best]) && !std::isnan(scores[i]))) best = i;
  return static_cast<int>(best);
}

MotionStats motion_stats(std::span<const Field> flows, uint32_t width, uint32_t height,
                         double fps) {
  if (flows.empty()) throw DomainError("motion_stats: no flow fields");
  if (!(fps > 0.0)) throw DomainError("motion_stats: fps must be positive");
  const double diag = std::sqrt(static_cast<double>(width) * width + static_cast<double>(height) * height);
  MotionStats s;
  for (const Field& f : flows) {
    if (f.channels() != 2 || !f.same_shape(width, height))
      throw ShapeError("motion_stats: flow does not match the stated resolution");
    double sum = 0.0;
    size_t n = 0;
    for (size_t p = 0; p < f.pixel_count(); ++p) {
      if (!f.valid(p)) continue;
      const double u = f.at(p, 0), v = f.at(p, 1);
      sum += std::sqrt(u * u + v * v) / diag;
      ++n;
    }
    const double m = n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    s.per_pair.push_back(m);
    if (n) s.total_motion += m;
  }
  s.duration = static_cast<double>(flows.size()) / fps;
  s.mean_motion = s.total_motion / s.duration;
  return s;
}

double macro_average(std::span<const double> values) {
  if (values.empty()) throw DomainError("macro_average: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace geco
