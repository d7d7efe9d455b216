#include "annotruth/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <fmt/core.h>

#include "annotruth/error.hpp"

namespace annotruth {

std::size_t LabelMatrix::observation_count(std::size_t anchor) const {
  return static_cast<std::size_t>(std::count_if(
      observed[anchor].begin(), observed[anchor].end(),
      [](int v) { return v != kMissing; }));
}

LabelMatrix build_label_matrix(const Corpus& corpus,
                               std::span<const AnchorProposal> anchors,
                               const Taxonomy& taxonomy,
                               std::span<const std::string> raters) {
  LabelMatrix m;
  m.labels = taxonomy.inference_labels();
  m.raters.assign(raters.begin(), raters.end());
  const int undetected = static_cast<int>(m.labels.size() - 1);

  std::map<std::string, std::size_t, std::less<>> rater_index;
  for (std::size_t r = 0; r < m.raters.size(); ++r) rater_index[m.raters[r]] = r;

  for (const auto& anchor : anchors) {
    m.anchors.push_back(anchor.anchor_id);
    std::vector<int> row(m.raters.size(), LabelMatrix::kMissing);
    for (std::size_t r = 0; r < m.raters.size(); ++r) {
      if (corpus.participant(m.raters[r]).fovs_annotated.contains(anchor.fov_id)) {
        row[r] = undetected;
      }
    }
    for (const auto& member : anchor.members) {
      const Annotation& a = corpus.annotation(member);
      auto it = rater_index.find(a.participant_id);
      if (it == rater_index.end()) continue;
      const auto& cls = taxonomy.class_of(a.raw_class);
      row[it->second] = static_cast<int>(*taxonomy.class_index(cls));
    }
    m.observed.push_back(std::move(row));
  }
  return m;
}

namespace {

double log_sum_exp(const std::vector<double>& v) {
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

class DawidSkene {
 public:
  DawidSkene(const LabelMatrix& m, const EmOptions& options)
      : m_(m), options_(options), n_labels_(m.labels.size()) {
    const double q = options.init_quality;
    const double off = (1.0 - q) / static_cast<double>(n_labels_ - 1);
    confusion_.assign(m.raters.size(),
                      std::vector<std::vector<double>>(
                          n_labels_, std::vector<double>(n_labels_, off)));
    for (auto& c : confusion_) {
      for (std::size_t k = 0; k < n_labels_; ++k) c[k][k] = q;
    }
    priors_.assign(n_labels_, 1.0 / static_cast<double>(n_labels_));
    posteriors_.assign(m.anchors.size(), std::vector<double>(n_labels_, 0.0));
  }

  // Returns the observed-data log-likelihood of the current parameters.
  double e_step() {
    double total = 0.0;
    std::vector<double> log_post(n_labels_);
    for (std::size_t i = 0; i < m_.anchors.size(); ++i) {
      for (std::size_t k = 0; k < n_labels_; ++k) {
        double lp = std::log(priors_[k]);
        for (std::size_t r = 0; r < m_.raters.size(); ++r) {
          const int obs = m_.observed[i][r];
          if (obs != LabelMatrix::kMissing) lp += std::log(confusion_[r][k][obs]);
        }
        log_post[k] = lp;
      }
      const double norm = log_sum_exp(log_post);
      total += norm;
      for (std::size_t k = 0; k < n_labels_; ++k) {
        posteriors_[i][k] = std::exp(log_post[k] - norm);
      }
    }
    return total;
  }

  void collapse(std::size_t label) {
    for (auto& post : posteriors_) {
      std::fill(post.begin(), post.end(), 0.0);
      post[label] = 1.0;
    }
  }

  // Observed-data log-likelihood of the current parameters, leaving the
  // posteriors untouched.
  double log_likelihood() const {
    double total = 0.0;
    std::vector<double> log_post(n_labels_);
    for (std::size_t i = 0; i < m_.anchors.size(); ++i) {
      for (std::size_t k = 0; k < n_labels_; ++k) {
        double lp = std::log(priors_[k]);
        for (std::size_t r = 0; r < m_.raters.size(); ++r) {
          const int obs = m_.observed[i][r];
          if (obs != LabelMatrix::kMissing) lp += std::log(confusion_[r][k][obs]);
        }
        log_post[k] = lp;
      }
      total += log_sum_exp(log_post);
    }
    return total;
  }

  void m_step() {
    const double s = options_.smoothing;
    const double n = static_cast<double>(n_labels_);
    std::vector<double> prior_tally(n_labels_, s);
    for (const auto& post : posteriors_) {
      for (std::size_t k = 0; k < n_labels_; ++k) prior_tally[k] += post[k];
    }
    const double prior_total = static_cast<double>(m_.anchors.size()) + n * s;
    for (std::size_t k = 0; k < n_labels_; ++k) priors_[k] = prior_tally[k] / prior_total;

    for (std::size_t r = 0; r < m_.raters.size(); ++r) {
      std::vector<std::vector<double>> tally(n_labels_,
                                             std::vector<double>(n_labels_, s));
      for (std::size_t i = 0; i < m_.anchors.size(); ++i) {
        const int obs = m_.observed[i][r];
        if (obs == LabelMatrix::kMissing) continue;
        for (std::size_t k = 0; k < n_labels_; ++k) tally[k][obs] += posteriors_[i][k];
      }
      for (std::size_t k = 0; k < n_labels_; ++k) {
        double row = 0.0;
        for (double v : tally[k]) row += v;
        for (std::size_t l = 0; l < n_labels_; ++l) {
          confusion_[r][k][l] = tally[k][l] / row;
        }
      }
    }
  }

  EmResult result(std::vector<double> trace) const {
    EmResult out;
    out.labels = m_.labels;
    out.anchors = m_.anchors;
    out.posteriors = posteriors_;
    out.priors = priors_;
    out.log_likelihood = std::move(trace);
    for (const auto& post : posteriors_) {
      out.map_labels.push_back(static_cast<std::size_t>(
          std::max_element(post.begin(), post.end()) - post.begin()));
    }
    for (std::size_t r = 0; r < m_.raters.size(); ++r) {
      RaterModel model{m_.raters[r], confusion_[r], 0.0};
      for (std::size_t k = 0; k < n_labels_; ++k) model.quality += confusion_[r][k][k];
      model.quality /= static_cast<double>(n_labels_);
      out.raters.push_back(std::move(model));
    }
    return out;
  }

 private:
  const LabelMatrix& m_;
  EmOptions options_;
  std::size_t n_labels_;
  std::vector<std::vector<std::vector<double>>> confusion_;
  std::vector<double> priors_;
  std::vector<std::vector<double>> posteriors_;
};

}  // namespace

EmResult em_infer(const LabelMatrix& matrix, const EmOptions& options) {
  const std::size_t n_labels = matrix.labels.size();
  if (n_labels < 2) throw ConfigError("EM needs at least two labels");
  const double floor = 1.0 / static_cast<double>(n_labels);
  if (!(options.init_quality > floor && options.init_quality < 1.0)) {
    throw ConfigError(fmt::format("init quality must lie in ({}, 1), got {}",
                                  floor, options.init_quality));
  }
  if (options.iterations < 0) throw ConfigError("iteration count must be >= 0");
  if (!(options.smoothing >= 0.0)) throw ConfigError("smoothing must be >= 0");
  if (matrix.observed.size() != matrix.anchors.size()) {
    throw DataError("label matrix row count does not match its anchors");
  }
  for (std::size_t i = 0; i < matrix.anchors.size(); ++i) {
    if (matrix.observed[i].size() != matrix.raters.size()) {
      throw DataError("label matrix row width does not match its raters");
    }
    for (int v : matrix.observed[i]) {
      if (v != LabelMatrix::kMissing &&
          (v < 0 || static_cast<std::size_t>(v) >= n_labels)) {
        throw DataError(fmt::format("anchor '{}' has an out-of-range label",
                                    matrix.anchors[i]));
      }
    }
    if (matrix.observation_count(i) == 0) {
      throw DataError(fmt::format("anchor '{}' has no observations", matrix.anchors[i]));
    }
  }

  DawidSkene em(matrix, options);

  // Degenerate corpus: every observation carries the same label. The
  // likelihood is flat along the direction that trades prior mass against
  // confusion rows of unseen classes, so plain EM stalls wherever the first
  // E-step lands. The posterior collapses to the observed label instead, and
  // one M-step fits the rater parameters to that collapse.
  std::set<int> seen;
  for (const auto& row : matrix.observed) {
    for (int v : row) {
      if (v != LabelMatrix::kMissing) seen.insert(v);
    }
  }
  if (seen.size() == 1) {
    em.collapse(static_cast<std::size_t>(*seen.begin()));
    em.m_step();
    return em.result({em.log_likelihood()});
  }

  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(options.iterations) + 1);
  bool converged = false;
  for (int it = 0; it < options.iterations && !converged; ++it) {
    trace.push_back(em.e_step());
    converged = options.tolerance && trace.size() >= 2 &&
                trace.back() - trace[trace.size() - 2] < *options.tolerance;
    if (!converged) em.m_step();
  }
  // Posteriors from the final parameters.
  if (!converged) trace.push_back(em.e_step());
  return em.result(std::move(trace));
}

std::string_view to_string(RaterGroup group) {
  return group == RaterGroup::np ? "np" : "pathologist";
}

RaterGroup parse_rater_group(std::string_view text) {
  if (text == "np") return RaterGroup::np;
  if (text == "pathologist") return RaterGroup::pathologist;
  throw ConfigError(fmt::format("unknown tier '{}' (expected np or pathologist)", text));
}

bool in_group(Tier tier, RaterGroup group) {
  return group == RaterGroup::pathologist ? is_pathologist(tier) : tier == Tier::NP;
}

std::vector<std::vector<BoundaryVote>> boundary_votes(
    const Corpus& corpus, std::span<const AnchorProposal> anchors,
    RaterGroup group) {
  std::vector<std::vector<BoundaryVote>> out(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    bool has_suggestion = false;
    for (const auto& id : anchors[i].members) {
      has_suggestion |= corpus.annotation(id).suggestion_id.has_value();
    }
    if (!has_suggestion) continue;
    for (const auto& id : anchors[i].members) {
      const Annotation& a = corpus.annotation(id);
      if (!in_group(corpus.participant(a.participant_id).tier, group)) continue;
      out[i].push_back({a.participant_id, a.kind == AnnotationKind::click});
    }
  }
  return out;
}

std::vector<std::optional<double>> infer_boundary_correctness(
    const std::vector<std::vector<BoundaryVote>>& votes,
    const EmOptions& options) {
  std::vector<std::optional<double>> out(votes.size());
  std::set<std::string> rater_set;
  for (const auto& entry : votes) {
    for (const auto& v : entry) rater_set.insert(v.rater);
  }
  LabelMatrix m;
  m.labels = {"correct", "incorrect"};
  m.raters.assign(rater_set.begin(), rater_set.end());
  std::map<std::string, std::size_t, std::less<>> rater_index;
  for (std::size_t r = 0; r < m.raters.size(); ++r) rater_index[m.raters[r]] = r;

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    if (votes[i].empty()) continue;
    std::vector<int> row(m.raters.size(), LabelMatrix::kMissing);
    for (const auto& v : votes[i]) row[rater_index.at(v.rater)] = v.clicked ? 0 : 1;
    m.anchors.push_back(fmt::format("{}", i));
    m.observed.push_back(std::move(row));
    rows.push_back(i);
  }
  if (rows.empty()) return out;
  const EmResult em = em_infer(m, options);
  for (std::size_t j = 0; j < rows.size(); ++j) out[rows[j]] = em.posteriors[j][0];
  return out;
}

TierInference infer_tier(const Corpus& corpus,
                         std::span<const AnchorProposal> anchors,
                         const Taxonomy& taxonomy, RaterGroup group,
                         const EmOptions& options) {
  std::vector<std::string> candidates;
  for (const auto& p : corpus.participants()) {
    if (in_group(p.tier, group)) candidates.push_back(p.id);
  }
  const LabelMatrix full = build_label_matrix(corpus, anchors, taxonomy, candidates);

  // Keep raters that observe at least one anchor and anchors that have at
  // least one observation from the group.
  std::vector<bool> rater_used(full.raters.size(), false);
  std::vector<std::size_t> kept_anchors;
  for (std::size_t i = 0; i < full.anchors.size(); ++i) {
    if (full.observation_count(i) == 0) continue;
    kept_anchors.push_back(i);
    for (std::size_t r = 0; r < full.raters.size(); ++r) {
      rater_used[r] = rater_used[r] || full.observed[i][r] != LabelMatrix::kMissing;
    }
  }
  TierInference out;
  out.group = group;
  out.matrix.labels = full.labels;
  std::vector<std::size_t> kept_raters;
  for (std::size_t r = 0; r < full.raters.size(); ++r) {
    if (!rater_used[r]) continue;
    kept_raters.push_back(r);
    out.matrix.raters.push_back(full.raters[r]);
    out.rater_tiers.push_back(corpus.participant(full.raters[r]).tier);
  }
  if (kept_raters.empty()) {
    throw DataError(fmt::format("no {} raters observe any anchor", to_string(group)));
  }
  std::vector<AnchorProposal> kept;
  for (std::size_t i : kept_anchors) {
    out.matrix.anchors.push_back(full.anchors[i]);
    std::vector<int> row;
    for (std::size_t r : kept_raters) row.push_back(full.observed[i][r]);
    out.matrix.observed.push_back(std::move(row));
    kept.push_back(anchors[i]);
  }

  out.em = em_infer(out.matrix, options);
  const auto boundary =
      infer_boundary_correctness(boundary_votes(corpus, kept, group), options);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    out.labels.push_back({kept[i].anchor_id, out.em.posteriors[i],
                          out.em.labels[out.em.map_labels[i]], boundary[i], false});
  }
  return out;
}

std::vector<std::size_t> pathologist_member_counts(
    const Corpus& corpus, std::span<const AnchorProposal> anchors) {
  std::vector<std::size_t> out;
  out.reserve(anchors.size());
  for (const auto& anchor : anchors) {
    std::size_t count = 0;
    for (const auto& id : anchor.members) {
      const auto& a = corpus.annotation(id);
      if (is_pathologist(corpus.participant(a.participant_id).tier)) ++count;
    }
    out.push_back(count);
  }
  return out;
}

std::vector<bool> decide_nuclei(std::span<const AnchorProposal> anchors,
                                const TierInference& pathologist,
                                std::span<const std::size_t> member_counts) {
  if (member_counts.size() != anchors.size()) {
    throw DataError("pathologist member counts do not match the anchors");
  }
  std::map<std::string, const InferredLabel*, std::less<>> by_anchor;
  for (const auto& label : pathologist.labels) by_anchor[label.anchor_id] = &label;
  std::vector<bool> out(anchors.size(), false);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    auto it = by_anchor.find(anchors[i].anchor_id);
    out[i] = member_counts[i] >= 2 && it != by_anchor.end() &&
             it->second->map_label != kUndetected;
  }
  return out;
}

}  // namespace annotruth
