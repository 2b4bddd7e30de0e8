#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "grid.hpp"

namespace geco {

// Prediction map (one channel, its mask selects the pixels that count), the
// binary target and optionally the true magnitude.
struct LocalizationCase {
  Field prediction;
  Mask gt_mask;
  std::optional<Field> gt_magnitude;
};

// Scores and labels of the valid pixels of a case.
struct RankedPixels {
  std::vector<double> scores;
  std::vector<uint8_t> labels;
  std::vector<double> magnitudes;  // filled when gt_magnitude is present
};
RankedPixels collect_valid(const LocalizationCase& c);

// Ranking average precision. Tied scores form one block whose positives all
// take the precision at the end of the block. Throws DomainError without a
// positive.
double ranking_ap(std::span<const double> scores, std::span<const uint8_t> labels);
double ranking_ap(const LocalizationCase& c);

struct IouF1 {
  double iou = 0.0;
  double f1 = 0.0;
};

// Best IoU and best F1 over thresholds at every distinct score (predict
// positive when score >= threshold), maximized independently.
IouF1 best_threshold_iou_f1(std::span<const double> scores, std::span<const uint8_t> labels);
IouF1 best_threshold_iou_f1(const LocalizationCase& c);

// Spearman rank correlation with average ranks. Throws DomainError for
// n < 2 or constant input and ShapeError for a length mismatch.
double srcc(std::span<const double> a, std::span<const double> b);
// Prediction against gt_magnitude over valid pixels.
double srcc(const LocalizationCase& c);

// Average (1-based) ranks, ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> v);

// First index of the maximum. Throws DomainError when empty.
int anomaly_argmax(std::span<const double> scores);

struct MotionStats {
  std::vector<double> per_pair;  // NaN for pairs without valid pixels
  double total_motion = 0.0;
  double mean_motion = 0.0;
  double duration = 0.0;  // seconds
};

// m_t = mean over valid pixels of |F| / sqrt(W^2 + H^2); TM = sum of m_t over
// pairs with valid pixels; MI = TM / S with S = (number of flows) / fps.
MotionStats motion_stats(std::span<const Field> flows, uint32_t width, uint32_t height,
                         double fps);

// Unweighted mean. Throws DomainError when empty.
double macro_average(std::span<const double> values);

}  // namespace geco
