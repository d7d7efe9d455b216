#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "annotruth/clustering.hpp"
#include "annotruth/corpus.hpp"
#include "annotruth/inference.hpp"
#include "annotruth/taxonomy.hpp"

namespace annotruth {

struct RedundancyConfig {
  int nps_total = 18;
  int nps_per_fov = 6;  // k
  int realizations = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single realization
};

// Mean and sample SD with Neumaier-compensated sums over data shifted by its
// first element, so identical values give exactly that value and SD 0.
MeanSd mean_sd(std::span<const double> values);

struct RedundancyOutcome {
  int k = 0;
  int realizations = 0;
  MeanSd overall;                       // micro accuracy
  std::map<std::string, MeanSd> per_class;  // accuracy among anchors of a P-truth class
  std::vector<double> accuracies;       // overall accuracy per realization
};

// For every realization, keeps k randomly chosen NPs per FOV (all of them
// when fewer annotated it), reruns NP EM over every anchor with an NP
// observation, and scores the NP labels against `p_truth` (the static
// reference; only anchors listed there are scored). Realization r samples
// with derive_seed(seed, r).
RedundancyOutcome simulate_redundancy(const Corpus& corpus,
                                      std::span<const AnchorProposal> anchors,
                                      const Taxonomy& taxonomy,
                                      std::span<const InferredLabel> p_truth,
                                      const RedundancyConfig& config,
                                      const EmOptions& em = {});

}  // namespace annotruth
