#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "annotruth/geometry.hpp"

namespace annotruth {

// Optimal assignment on a rectangular weight matrix (rows x cols), maximising
// the summed weight. Returns, for each row, the assigned column or -1.
// Hungarian algorithm with potentials, O(n^3).
std::vector<int> max_weight_assignment(
    const std::vector<std::vector<double>>& weight);

struct MatchPair {
  std::size_t prediction = 0;
  std::size_t truth = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // ordered by prediction index
  std::vector<std::size_t> unmatched_predictions;
  std::vector<std::size_t> unmatched_truths;
  double min_iou = 0.0;

  double total_iou() const;
};

// One-to-one pairing maximising total IOU over pairs with IOU >= min_iou.
MatchResult match_detections(std::span<const BoundingBox> predictions,
                             std::span<const BoundingBox> truths, double min_iou);

struct ScoredDetection {
  std::string image;  // matching only happens within one image / FOV
  BoundingBox box;
  double score = 0.0;
};

struct TruthBox {
  std::string image;
  BoundingBox box;
};

// Area under the all-points-interpolated precision/recall curve. Detections
// are ranked by descending score (ties by input order); each is matched to
// the unconsumed truth of its image with the highest IOU >= min_iou.
// Returns 0 when there are no predictions or no truths.
double average_precision(std::span<const ScoredDetection> predictions,
                         std::span<const TruthBox> truths, double min_iou);

// Mean AP over IOU thresholds 0.50, 0.55, ..., 0.95.
double map_range(std::span<const ScoredDetection> predictions,
                 std::span<const TruthBox> truths);

}  // namespace annotruth
