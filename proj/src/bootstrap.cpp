#include "annotruth/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <fmt/core.h>

#include "annotruth/error.hpp"
#include "annotruth/parallel.hpp"
#include "annotruth/random.hpp"

namespace annotruth {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0) return sorted[lo];
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_ci(std::size_t item_count, const ResampleMetric& metric,
                      const BootstrapOptions& options) {
  if (options.resamples < 100) throw ConfigError("bootstrap needs >= 100 resamples");
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw ConfigError("bootstrap level must lie in (0, 1)");
  }
  if (item_count == 0) throw DataError("bootstrap over zero items");

  std::vector<double> stats(options.resamples);
  parallel_for(options.resamples, [&](std::size_t r) {
    Rng rng(derive_seed(options.seed, r));
    std::uniform_int_distribution<std::size_t> pick(0, item_count - 1);
    std::vector<std::size_t> sample(item_count);
    for (std::size_t attempt = 0; attempt < options.max_redraws; ++attempt) {
      for (auto& idx : sample) idx = pick(rng);
      if (const auto value = metric(sample)) {
        stats[r] = *value;
        return;
      }
    }
    throw DataError(fmt::format(
        "bootstrap metric undefined on {} consecutive draws", options.max_redraws));
  });
  std::sort(stats.begin(), stats.end());
  const double tail = (1.0 - options.level) / 2.0;
  return {quantile_sorted(stats, tail), quantile_sorted(stats, 1.0 - tail)};
}

}  // namespace annotruth
