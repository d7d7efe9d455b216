#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace annotruth {

// Square count matrix, truth on rows and prediction on columns.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::vector<std::string> labels);

  // Labels default to the sorted union of both sequences.
  static ConfusionMatrix from_pairs(std::span<const std::string> truth,
                                    std::span<const std::string> predicted,
                                    std::vector<std::string> labels = {});

  void add(std::string_view truth, std::string_view predicted,
           long long count = 1);
  void add(std::size_t truth, std::size_t predicted, long long count = 1);

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  long long at(std::size_t truth, std::size_t predicted) const {
    return counts_[truth][predicted];
  }
  long long total() const;
  std::size_t index(std::string_view label) const;

  double accuracy() const;

 private:
  std::vector<std::string> labels_;
  std::vector<std::vector<long long>> counts_;
};

// Multiclass Matthews correlation coefficient; 0 when a marginal variance
// term vanishes.
double mcc(const ConfusionMatrix& cm);

// (po - pe) / (1 - pe); 1.0 in the degenerate case po = pe = 1. Throws
// DataError for empty or unequal-length input.
double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b);

// Units x raters table; nullopt marks a missing rating.
using RatingTable = std::vector<std::vector<std::optional<std::string>>>;

// Nominal Krippendorff alpha, 1 - Do/De over the coincidence matrix. Units
// with fewer than two ratings are ignored. When every pairable value is the
// same (De = 0) the result is 1.0. Throws DataError when no unit has two
// ratings.
double krippendorff_alpha(const RatingTable& ratings);

enum class AgreementBand { slight, fair, moderate, substantial, near_perfect };

std::string_view to_string(AgreementBand band);

// Five-band scale with upper-inclusive cut points at 0.2, 0.4, 0.6 and 0.8;
// everything at or below 0.2 (including negative values) is `slight`.
AgreementBand agreement_band(double statistic);

}  // namespace annotruth
