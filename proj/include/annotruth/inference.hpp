#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "annotruth/clustering.hpp"
#include "annotruth/corpus.hpp"
#include "annotruth/taxonomy.hpp"

namespace annotruth {

// Anchors x raters table of observed labels (indices into `labels`).
struct LabelMatrix {
  static constexpr int kMissing = -1;

  std::vector<std::string> labels;
  std::vector<std::string> anchors;
  std::vector<std::string> raters;
  std::vector<std::vector<int>> observed;  // [anchor][rater]

  std::size_t observation_count(std::size_t anchor) const;
};

// Label matrix over `raters` (participant ids). A rater who has a member in
// an anchor contributes that member's class; a rater who annotated the
// anchor's FOV without matching it contributes `undetected`; anyone else is
// missing. Labels are taxonomy classes followed by `undetected`.
LabelMatrix build_label_matrix(const Corpus& corpus,
                               std::span<const AnchorProposal> anchors,
                               const Taxonomy& taxonomy,
                               std::span<const std::string> raters);

struct EmOptions {
  double init_quality = 0.7;
  int iterations = 70;
  // Stop once the log-likelihood gain falls below this value. Off by default
  // so that exactly `iterations` rounds run.
  std::optional<double> tolerance;
  // Pseudo-count added to every M-step tally.
  double smoothing = 1e-6;
};

struct RaterModel {
  std::string rater;
  // Row-stochastic: confusion[true][observed].
  std::vector<std::vector<double>> confusion;
  double quality = 0.0;  // mean diagonal
};

struct EmResult {
  std::vector<std::string> labels;
  std::vector<std::string> anchors;
  std::vector<std::vector<double>> posteriors;  // [anchor][label]
  std::vector<std::size_t> map_labels;          // argmax, ties to lowest index
  std::vector<RaterModel> raters;
  std::vector<double> priors;
  // Observed-data log-likelihood after initialisation and after every
  // M-step.
  std::vector<double> log_likelihood;
};

// Dawid-Skene EM. Each confusion matrix starts at init_quality on the
// diagonal with the remainder spread uniformly; class priors start uniform.
// Each iteration runs an E-step followed by an M-step, and a final E-step
// yields the reported posteriors. When every observation carries the same
// label the posteriors collapse onto it and a single M-step fits the raters.
// Throws DataError when an anchor has no
// observations and ConfigError when init_quality is outside (1/L, 1).
EmResult em_infer(const LabelMatrix& matrix, const EmOptions& options = {});

struct InferredLabel {
  std::string anchor_id;
  std::vector<double> posterior;  // over classes then `undetected`
  std::string map_label;
  std::optional<double> boundary_correct_posterior;
  bool is_nucleus = false;
};

enum class RaterGroup { np, pathologist };

std::string_view to_string(RaterGroup group);
RaterGroup parse_rater_group(std::string_view text);
bool in_group(Tier tier, RaterGroup group);

struct TierInference {
  RaterGroup group = RaterGroup::np;
  LabelMatrix matrix;
  EmResult em;
  std::vector<InferredLabel> labels;  // is_nucleus left false
  std::vector<Tier> rater_tiers;      // parallel to em.raters
};

// Restricts the label matrix to one rater group (pathologists are JP and SP)
// and runs em_infer. Boundary posteriors are filled from the same group.
// Anchors without any observation from the group are dropped. Throws
// DataError when the group has no raters.
TierInference infer_tier(const Corpus& corpus,
                         std::span<const AnchorProposal> anchors,
                         const Taxonomy& taxonomy, RaterGroup group,
                         const EmOptions& options = {});

// Two-rule nucleus decision: at least two pathologist members and a
// pathologist consensus other than `undetected`. Anchors absent from the
// pathologist result are not nuclei.
std::vector<bool> decide_nuclei(std::span<const AnchorProposal> anchors,
                                const TierInference& pathologist,
                                std::span<const std::size_t> pathologist_member_counts);

std::vector<std::size_t> pathologist_member_counts(
    const Corpus& corpus, std::span<const AnchorProposal> anchors);

// Boundary-correctness observation of one rater matched to an anchor:
// clicked the suggestion (true) or drew a box instead (false).
struct BoundaryVote {
  std::string rater;
  bool clicked = false;
};

// Binary Dawid-Skene over boundary votes. Entries with no votes yield
// nullopt. Returns P(suggested boundary is correct) per entry.
std::vector<std::optional<double>> infer_boundary_correctness(
    const std::vector<std::vector<BoundaryVote>>& votes,
    const EmOptions& options = {});

// Votes per anchor from the members of `group`. Anchors with no member that
// references a suggestion get no votes.
std::vector<std::vector<BoundaryVote>> boundary_votes(
    const Corpus& corpus, std::span<const AnchorProposal> anchors,
    RaterGroup group);

}  // namespace annotruth
