#pragma once

#include <string>
#include <vector>

#include "annotruth/taxonomy.hpp"

namespace annotruth {

// N_cf: nucleus counts per class (rows) and FOV (columns).
struct ClassFovCounts {
  std::vector<std::string> classes;
  std::vector<std::string> fovs;
  std::vector<std::vector<double>> counts;  // [class][fov]

  void validate() const;
};

struct ClassWeights {
  std::vector<std::string> classes;
  std::vector<double> weights;        // W_c, sums to 1
  std::vector<std::string> warnings;  // classes excluded for a zero count
};

// W_c = V_c / sum(V) with V_c = 1 / sum_f N_cf. The `ambiguous` class and
// classes with a zero total get weight 0 (the latter with a warning). Throws
// DataError when no class is left to weight.
ClassWeights class_weights(const ClassFovCounts& counts,
                           std::string_view zero_weight_class = kAmbiguous);

// W_f = U_f / sum(U) with U_f = sum_c W_c N_cf / A_f. Throws DataError for
// non-positive areas or when every U_f is zero.
std::vector<double> fov_weights(const ClassFovCounts& counts,
                                const std::vector<double>& areas,
                                const ClassWeights& weights);

}  // namespace annotruth
