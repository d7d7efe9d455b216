#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace annotruth {

// Area under the ROC curve for binary labels, with tied scores contributing
// half (the trapezoid through tied points). nullopt when either class is
// absent.
std::optional<double> binary_auroc(std::span<const double> scores,
                                   const std::vector<bool>& positive);

enum class Averaging { micro, macro };

// One-vs-rest AUROC over probability vectors. `scores[i][c]` is the score of
// class c for item i, `truth[i]` the true class index. Micro pools every
// (item, class) pair into one binary problem; macro averages the per-class
// areas of classes that occur among the truths (and are not universal).
// Throws DataError on shape mismatch or when no class is scorable.
double auroc(const std::vector<std::vector<double>>& scores,
             std::span<const std::size_t> truth, Averaging average);

}  // namespace annotruth
