#include "annotruth/sampling_weights.hpp"

#include <fmt/core.h>

#include "annotruth/error.hpp"

namespace annotruth {

void ClassFovCounts::validate() const {
  if (counts.size() != classes.size()) throw DataError("count table row mismatch");
  for (const auto& row : counts) {
    if (row.size() != fovs.size()) throw DataError("count table column mismatch");
    for (double v : row) {
      if (!(v >= 0.0)) throw DataError("count table holds a negative count");
    }
  }
}

ClassWeights class_weights(const ClassFovCounts& counts,
                           std::string_view zero_weight_class) {
  counts.validate();
  ClassWeights out;
  out.classes = counts.classes;
  out.weights.assign(counts.classes.size(), 0.0);
  double v_sum = 0.0;
  for (std::size_t c = 0; c < counts.classes.size(); ++c) {
    double total = 0.0;
    for (double n : counts.counts[c]) total += n;
    if (counts.classes[c] == zero_weight_class) continue;
    if (total == 0.0) {
      out.warnings.push_back(
          fmt::format("class '{}' has no nuclei and is excluded", counts.classes[c]));
      continue;
    }
    out.weights[c] = 1.0 / total;
    v_sum += out.weights[c];
  }
  if (v_sum == 0.0) throw DataError("no class with a positive count to weight");
  for (double& w : out.weights) w /= v_sum;
  return out;
}

std::vector<double> fov_weights(const ClassFovCounts& counts,
                                const std::vector<double>& areas,
                                const ClassWeights& weights) {
  counts.validate();
  if (areas.size() != counts.fovs.size()) throw DataError("one area per fov required");
  if (weights.weights.size() != counts.classes.size()) {
    throw DataError("class weights do not match the count table");
  }
  std::vector<double> u(counts.fovs.size(), 0.0);
  double u_sum = 0.0;
  for (std::size_t f = 0; f < counts.fovs.size(); ++f) {
    if (!(areas[f] > 0.0)) {
      throw DataError(fmt::format("fov '{}' has non-positive area", counts.fovs[f]));
    }
    for (std::size_t c = 0; c < counts.classes.size(); ++c) {
      u[f] += weights.weights[c] * counts.counts[c][f];
    }
    u[f] /= areas[f];
    u_sum += u[f];
  }
  if (u_sum == 0.0) throw DataError("every fov has zero sampling weight");
  for (double& w : u) w /= u_sum;
  return u;
}

}  // namespace annotruth
