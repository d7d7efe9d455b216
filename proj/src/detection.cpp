#include "annotruth/detection.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

#include "annotruth/error.hpp"

namespace annotruth {

std::vector<int> max_weight_assignment(
    const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows ? weight[0].size() : 0;
  for (const auto& r : weight) {
    if (r.size() != cols) throw DataError("ragged assignment matrix");
  }
  const std::size_t n = std::max(rows, cols);
  std::vector<int> result(rows, -1);
  if (n == 0) return result;

  // Square cost matrix, 1-based, padded with zeros; minimise -weight.
  auto cost = [&](std::size_t i, std::size_t j) {
    return (i <= rows && j <= cols) ? -weight[i - 1][j - 1] : 0.0;
  };
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0, j) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (std::size_t j = 1; j <= n; ++j) {
    if (p[j] >= 1 && p[j] <= rows && j <= cols) {
      result[p[j] - 1] = static_cast<int>(j - 1);
    }
  }
  return result;
}

double MatchResult::total_iou() const {
  double total = 0.0;
  for (const auto& pair : pairs) total += pair.iou;
  return total;
}

MatchResult match_detections(std::span<const BoundingBox> predictions,
                             std::span<const BoundingBox> truths, double min_iou) {
  MatchResult out;
  out.min_iou = min_iou;
  std::vector<std::vector<double>> weight(predictions.size(),
                                          std::vector<double>(truths.size(), 0.0));
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    for (std::size_t j = 0; j < truths.size(); ++j) {
      const double v = iou(predictions[i], truths[j]);
      // Ineligible pairs weigh nothing and are dropped below.
      if (v >= min_iou && v > 0.0) weight[i][j] = v;
    }
  }
  const auto assignment = max_weight_assignment(weight);
  std::vector<bool> truth_used(truths.size(), false);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int j = assignment[i];
    if (j >= 0 && weight[i][j] > 0.0) {
      out.pairs.push_back({i, static_cast<std::size_t>(j), weight[i][j]});
      truth_used[j] = true;
    } else {
      out.unmatched_predictions.push_back(i);
    }
  }
  for (std::size_t j = 0; j < truths.size(); ++j) {
    if (!truth_used[j]) out.unmatched_truths.push_back(j);
  }
  return out;
}

double average_precision(std::span<const ScoredDetection> predictions,
                         std::span<const TruthBox> truths, double min_iou) {
  if (predictions.empty() || truths.empty()) return 0.0;

  std::map<std::string, std::vector<std::size_t>> truths_by_image;
  for (std::size_t j = 0; j < truths.size(); ++j) {
    truths_by_image[truths[j].image].push_back(j);
  }
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return predictions[a].score > predictions[b].score;
  });

  std::vector<bool> consumed(truths.size(), false);
  std::vector<double> precision, recall;
  double tp = 0.0, fp = 0.0;
  const double n_truth = static_cast<double>(truths.size());
  for (std::size_t idx : order) {
    const auto& det = predictions[idx];
    double best = -1.0;
    std::size_t best_j = 0;
    if (auto it = truths_by_image.find(det.image); it != truths_by_image.end()) {
      for (std::size_t j : it->second) {
        if (consumed[j]) continue;
        const double v = iou(det.box, truths[j].box);
        if (v >= min_iou && v > best) {
          best = v;
          best_j = j;
        }
      }
    }
    if (best >= 0.0) {
      consumed[best_j] = true;
      tp += 1.0;
    } else {
      fp += 1.0;
    }
    precision.push_back(tp / (tp + fp));
    recall.push_back(tp / n_truth);
  }

  // Precision envelope from the right, then sum rectangle areas where recall
  // increases.
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

double map_range(std::span<const ScoredDetection> predictions,
                 std::span<const TruthBox> truths) {
  double sum = 0.0;
  for (int step = 0; step < 10; ++step) {
    sum += average_precision(predictions, truths, 0.5 + 0.05 * step);
  }
  return sum / 10.0;
}

}  // namespace annotruth
