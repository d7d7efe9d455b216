#include "annotruth/roc.hpp"

#include <algorithm>
#include <numeric>

#include "annotruth/error.hpp"

namespace annotruth {

std::optional<double> binary_auroc(std::span<const double> scores,
                                   const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) {
    throw DataError("auroc: scores and labels differ in length");
  }
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Mann-Whitney formulation with midranks for ties.
  double rank_sum = 0.0, n_pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (positive[order[k]]) {
        rank_sum += midrank;
        n_pos += 1.0;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) return std::nullopt;
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double auroc(const std::vector<std::vector<double>>& scores,
             std::span<const std::size_t> truth, Averaging average) {
  if (scores.size() != truth.size()) {
    throw DataError("auroc: scores and truths differ in length");
  }
  if (scores.empty()) throw DataError("auroc: no items");
  const std::size_t k = scores.front().size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].size() != k) throw DataError("auroc: ragged score vectors");
    if (truth[i] >= k) throw DataError("auroc: truth index out of range");
  }

  if (average == Averaging::micro) {
    std::vector<double> flat;
    std::vector<bool> pos;
    flat.reserve(scores.size() * k);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      for (std::size_t c = 0; c < k; ++c) {
        flat.push_back(scores[i][c]);
        pos.push_back(truth[i] == c);
      }
    }
    const auto area = binary_auroc(flat, pos);
    if (!area) throw DataError("auroc: micro average undefined");
    return *area;
  }

  double sum = 0.0;
  std::size_t used = 0;
  std::vector<double> column(scores.size());
  std::vector<bool> positive(scores.size());
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      column[i] = scores[i][c];
      positive[i] = truth[i] == c;
    }
    if (const auto area = binary_auroc(column, positive)) {
      sum += *area;
      ++used;
    }
  }
  if (used == 0) throw DataError("auroc: no class has both positives and negatives");
  return sum / static_cast<double>(used);
}

}  // namespace annotruth
