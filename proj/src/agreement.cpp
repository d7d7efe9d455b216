#include "annotruth/agreement.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/core.h>

#include "annotruth/error.hpp"

namespace annotruth {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> labels)
    : labels_(std::move(labels)),
      counts_(labels_.size(), std::vector<long long>(labels_.size(), 0)) {}

ConfusionMatrix ConfusionMatrix::from_pairs(std::span<const std::string> truth,
                                            std::span<const std::string> predicted,
                                            std::vector<std::string> labels) {
  if (truth.size() != predicted.size()) {
    throw DataError("truth and prediction sequences differ in length");
  }
  if (labels.empty()) {
    std::set<std::string> all(truth.begin(), truth.end());
    all.insert(predicted.begin(), predicted.end());
    labels.assign(all.begin(), all.end());
  }
  ConfusionMatrix cm(std::move(labels));
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

std::size_t ConfusionMatrix::index(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) {
    throw DataError(fmt::format("label '{}' is not in the confusion matrix", label));
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

void ConfusionMatrix::add(std::string_view truth, std::string_view predicted,
                          long long count) {
  add(index(truth), index(predicted), count);
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, long long count) {
  counts_.at(truth).at(predicted) += count;
}

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (const auto& row : counts_) {
    for (long long v : row) t += v;
  }
  return t;
}

double ConfusionMatrix::accuracy() const {
  const long long t = total();
  if (t == 0) return 0.0;
  long long diag = 0;
  for (std::size_t i = 0; i < size(); ++i) diag += counts_[i][i];
  return static_cast<double>(diag) / static_cast<double>(t);
}

double mcc(const ConfusionMatrix& cm) {
  const std::size_t k = cm.size();
  double s = 0.0, c = 0.0;
  std::vector<double> t(k, 0.0), p(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double v = static_cast<double>(cm.at(i, j));
      t[i] += v;
      p[j] += v;
      s += v;
    }
    c += static_cast<double>(cm.at(i, i));
  }
  double tp = 0.0, pp = 0.0, tt = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    tp += t[i] * p[i];
    pp += p[i] * p[i];
    tt += t[i] * t[i];
  }
  const double denom = (s * s - pp) * (s * s - tt);
  if (denom <= 0.0) return 0.0;
  return (c * s - tp) / std::sqrt(denom);
}

double cohen_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) throw DataError("kappa: sequences differ in length");
  if (a.empty()) throw DataError("kappa: empty sequences");
  const double n = static_cast<double>(a.size());
  std::map<std::string_view, double> ma, mb;
  double agree = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma[a[i]] += 1.0;
    mb[b[i]] += 1.0;
    if (a[i] == b[i]) agree += 1.0;
  }
  const double po = agree / n;
  double pe = 0.0;
  for (const auto& [label, count] : ma) {
    if (auto it = mb.find(label); it != mb.end()) pe += (count / n) * (it->second / n);
  }
  if (pe == 1.0) return 1.0;
  return (po - pe) / (1.0 - pe);
}

double krippendorff_alpha(const RatingTable& ratings) {
  std::map<std::string, std::size_t> value_index;
  for (const auto& unit : ratings) {
    for (const auto& v : unit) {
      if (v) value_index.emplace(*v, 0);
    }
  }
  std::size_t next = 0;
  for (auto& [value, idx] : value_index) idx = next++;
  const std::size_t k = value_index.size();

  std::vector<std::vector<double>> coincidence(k, std::vector<double>(k, 0.0));
  bool pairable = false;
  std::vector<std::size_t> values;
  for (const auto& unit : ratings) {
    values.clear();
    for (const auto& v : unit) {
      if (v) values.push_back(value_index.at(*v));
    }
    const std::size_t m = values.size();
    if (m < 2) continue;
    pairable = true;
    const double weight = 1.0 / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i != j) coincidence[values[i]][values[j]] += weight;
      }
    }
  }
  if (!pairable) throw DataError("alpha: no unit has two or more ratings");

  std::vector<double> marginal(k, 0.0);
  double n = 0.0, observed = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) {
      marginal[c] += coincidence[c][d];
      if (c != d) observed += coincidence[c][d];
    }
    n += marginal[c];
  }
  double expected = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t d = 0; d < k; ++d) {
      if (c != d) expected += marginal[c] * marginal[d];
    }
  }
  if (expected == 0.0) return 1.0;
  return 1.0 - (n - 1.0) * observed / expected;
}

std::string_view to_string(AgreementBand band) {
  switch (band) {
    case AgreementBand::slight: return "slight";
    case AgreementBand::fair: return "fair";
    case AgreementBand::moderate: return "moderate";
    case AgreementBand::substantial: return "substantial";
    case AgreementBand::near_perfect: return "near_perfect";
  }
  return "?";
}

AgreementBand agreement_band(double statistic) {
  if (statistic <= 0.2) return AgreementBand::slight;
  if (statistic <= 0.4) return AgreementBand::fair;
  if (statistic <= 0.6) return AgreementBand::moderate;
  if (statistic <= 0.8) return AgreementBand::substantial;
  return AgreementBand::near_perfect;
}

}  // namespace annotruth
