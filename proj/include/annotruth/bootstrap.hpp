#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>

namespace annotruth {

struct BootstrapOptions {
  std::size_t resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
  // Total draws allowed per resample when the metric is undefined on a draw.
  std::size_t max_redraws = 100;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// The metric sees the item indices of one with-replacement resample and
// returns nullopt when it is undefined on that resample.
using ResampleMetric =
    std::function<std::optional<double>(std::span<const std::size_t>)>;

// Percentile bootstrap interval. Resample r draws from its own generator
// seeded with derive_seed(seed, r), so results are independent of thread
// scheduling. Throws ConfigError for fewer than 100 resamples or a level
// outside (0, 1), DataError when a resample stays undefined after
// max_redraws draws.
Interval bootstrap_ci(std::size_t item_count, const ResampleMetric& metric,
                      const BootstrapOptions& options = {});

// Linear-interpolation quantile of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace annotruth
