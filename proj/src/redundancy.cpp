#include "annotruth/redundancy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/core.h>

#include "annotruth/error.hpp"
#include "annotruth/parallel.hpp"
#include "annotruth/random.hpp"

namespace annotruth {

void RedundancyConfig::validate() const {
  if (nps_total < 1) throw ConfigError("nps_total must be >= 1");
  if (nps_per_fov < 1 || nps_per_fov > nps_total) {
    throw ConfigError(fmt::format("k must lie in [1, {}], got {}", nps_total,
                                  nps_per_fov));
  }
  if (realizations < 1) throw ConfigError("realizations must be >= 1");
}

namespace {

class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

}  // namespace

MeanSd mean_sd(std::span<const double> values) {
  if (values.empty()) return {};
  const double shift = values.front();
  const double n = static_cast<double>(values.size());
  CompensatedSum sum;
  for (double v : values) sum.add(v - shift);
  const double mean_shifted = sum.value() / n;
  MeanSd out{shift + mean_shifted, 0.0};
  if (values.size() > 1) {
    CompensatedSum squares;
    for (double v : values) {
      const double d = (v - shift) - mean_shifted;
      squares.add(d * d);
    }
    out.sd = std::sqrt(squares.value() / (n - 1.0));
  }
  return out;
}

RedundancyOutcome simulate_redundancy(const Corpus& corpus,
                                      std::span<const AnchorProposal> anchors,
                                      const Taxonomy& taxonomy,
                                      std::span<const InferredLabel> p_truth,
                                      const RedundancyConfig& config,
                                      const EmOptions& em) {
  config.validate();
  std::vector<std::string> nps;
  for (const auto& p : corpus.participants()) {
    if (p.tier == Tier::NP && !p.fovs_annotated.empty()) nps.push_back(p.id);
  }
  if (nps.empty()) throw DataError("simulation needs NP raters");
  if (nps.size() > static_cast<std::size_t>(config.nps_total)) {
    throw ConfigError(fmt::format("corpus has {} NPs but nps_total is {}",
                                  nps.size(), config.nps_total));
  }

  const LabelMatrix full = build_label_matrix(corpus, anchors, taxonomy, nps);
  LabelMatrix base;
  base.labels = full.labels;
  base.raters = full.raters;
  std::vector<std::string> anchor_fov;
  for (std::size_t i = 0; i < full.anchors.size(); ++i) {
    if (full.observation_count(i) == 0) continue;
    base.anchors.push_back(full.anchors[i]);
    base.observed.push_back(full.observed[i]);
    anchor_fov.push_back(anchors[i].fov_id);
  }
  if (base.anchors.empty()) throw DataError("no anchor has an NP observation");

  // FOV -> rater indices covering it.
  std::map<std::string, std::vector<std::size_t>> coverage;
  for (std::size_t r = 0; r < base.raters.size(); ++r) {
    for (const auto& fov : corpus.participant(base.raters[r]).fovs_annotated) {
      coverage[fov].push_back(r);
    }
  }
  std::vector<std::string> fov_list;
  for (const auto& [fov, raters] : coverage) fov_list.push_back(fov);

  // Scored anchors: row in `base` plus reference label index.
  std::map<std::string, std::size_t, std::less<>> row_of;
  for (std::size_t i = 0; i < base.anchors.size(); ++i) row_of[base.anchors[i]] = i;
  struct Scored {
    std::size_t row;
    std::size_t truth;
  };
  std::vector<Scored> scored;
  std::set<std::size_t> truth_classes;
  for (const auto& ref : p_truth) {
    auto it = row_of.find(ref.anchor_id);
    if (it == row_of.end()) continue;
    auto label = std::find(base.labels.begin(), base.labels.end(), ref.map_label);
    if (label == base.labels.end()) {
      throw DataError(fmt::format("P-truth label '{}' is not an inference label",
                                  ref.map_label));
    }
    const auto truth = static_cast<std::size_t>(label - base.labels.begin());
    scored.push_back({it->second, truth});
    truth_classes.insert(truth);
  }
  if (scored.empty()) throw DataError("no P-truth anchor has an NP observation");

  const auto k = static_cast<std::size_t>(config.nps_per_fov);
  const auto n_real = static_cast<std::size_t>(config.realizations);
  std::vector<double> overall(n_real);
  std::vector<std::map<std::size_t, double>> per_class(n_real);

  parallel_for(n_real, [&](std::size_t r) {
    Rng rng(derive_seed(config.seed, r));
    std::map<std::string, std::vector<bool>> retained;
    for (const auto& fov : fov_list) {
      std::vector<std::size_t> pool = coverage.at(fov);
      std::vector<bool> keep(base.raters.size(), false);
      const std::size_t take = std::min(k, pool.size());
      for (std::size_t i = 0; i < take; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
        keep[pool[i]] = true;
      }
      retained.emplace(fov, std::move(keep));
    }
    LabelMatrix m = base;
    for (std::size_t i = 0; i < m.anchors.size(); ++i) {
      const auto& keep = retained.at(anchor_fov[i]);
      for (std::size_t rr = 0; rr < m.raters.size(); ++rr) {
        if (!keep[rr]) m.observed[i][rr] = LabelMatrix::kMissing;
      }
    }
    const EmResult result = em_infer(m, em);
    std::map<std::size_t, std::pair<double, double>> tally;  // correct, total
    double correct = 0.0;
    for (const auto& s : scored) {
      const bool hit = result.map_labels[s.row] == s.truth;
      correct += hit ? 1.0 : 0.0;
      auto& t = tally[s.truth];
      t.first += hit ? 1.0 : 0.0;
      t.second += 1.0;
    }
    overall[r] = correct / static_cast<double>(scored.size());
    for (const auto& [cls, t] : tally) per_class[r][cls] = t.first / t.second;
  });

  RedundancyOutcome out;
  out.k = config.nps_per_fov;
  out.realizations = config.realizations;
  out.overall = mean_sd(overall);
  for (std::size_t cls : truth_classes) {
    std::vector<double> values;
    for (const auto& m : per_class) values.push_back(m.at(cls));
    out.per_class[base.labels[cls]] = mean_sd(values);
  }
  out.accuracies = std::move(overall);
  return out;
}

}  // namespace annotruth
