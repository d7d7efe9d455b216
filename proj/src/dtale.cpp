#include "annotruth/dtale.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/core.h>

#include "annotruth/csv.hpp"
#include "annotruth/error.hpp"

namespace annotruth {

void DtaleInput::validate() const {
  if (rows.empty()) throw DataError("dtale input has no rows");
  std::set<std::string> names(feature_names.begin(), feature_names.end());
  if (names.size() != feature_names.size()) {
    throw DataError("dtale feature names must be unique");
  }
  std::set<std::string> ids;
  for (const auto& row : rows) {
    if (!ids.insert(row.id).second) {
      throw DataError(fmt::format("duplicate nucleus id '{}'", row.id));
    }
    if (row.features.size() != feature_names.size()) {
      throw DataError(fmt::format("row '{}' has {} features, expected {}", row.id,
                                  row.features.size(), feature_names.size()));
    }
    if (!std::isfinite(row.embedding[0]) || !std::isfinite(row.embedding[1])) {
      throw DataError(fmt::format("row '{}' has a non-finite embedding", row.id));
    }
    for (double v : row.features) {
      if (!std::isfinite(v)) {
        throw DataError(fmt::format("row '{}' has a non-finite feature", row.id));
      }
    }
    if (row.model_class.empty()) {
      throw DataError(fmt::format("row '{}' has no model class", row.id));
    }
  }
}

std::vector<std::string> DtaleInput::model_classes() const {
  std::set<std::string> out;
  for (const auto& row : rows) out.insert(row.model_class);
  return {out.begin(), out.end()};
}

void DtaleOptions::validate() const {
  if (max_depth < 0) throw ConfigError("max_depth must be >= 0");
  if (min_leaf < 1) throw ConfigError("min_leaf must be >= 1");
}

DtaleTree::DtaleTree(std::vector<std::string> feature_names,
                     std::vector<DtaleNode> nodes)
    : feature_names_(std::move(feature_names)), nodes_(std::move(nodes)) {}

int DtaleTree::leaf_for(std::span<const double> features) const {
  int id = 0;
  while (!nodes_[id].is_leaf()) {
    const auto& n = nodes_[id];
    id = features[*n.feature] <= n.threshold ? n.left : n.right;
  }
  return id;
}

Vec2 DtaleTree::predict(std::span<const double> features) const {
  return nodes_[leaf_for(features)].mean;
}

double DtaleTree::total_sse() const {
  double total = 0.0;
  for (const auto& n : nodes_) {
    if (n.is_leaf()) total += n.sse;
  }
  return total;
}

int DtaleTree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::vector<PathStep> DtaleTree::path(int node) const {
  std::vector<PathStep> steps;
  for (int child = node, parent = nodes_.at(node).parent; parent >= 0;
       child = parent, parent = nodes_[parent].parent) {
    const auto& p = nodes_[parent];
    steps.push_back({feature_names_[*p.feature], p.threshold, p.left == child});
  }
  std::reverse(steps.begin(), steps.end());
  return steps;
}

namespace {

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double sse = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const DtaleInput& input, const DtaleOptions& options)
      : input_(input), options_(options) {}

  std::vector<DtaleNode> build() {
    std::vector<std::size_t> order(input_.rows.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return input_.rows[a].id < input_.rows[b].id;
    });
    const auto [mean, sse] = moments(order);
    tolerance_ = 1e-12 * sse;
    grow(std::move(order), -1, 0);
    return std::move(nodes_);
  }

 private:
  // Shifted two-pass mean and SSE: identical targets give SSE exactly 0.
  std::pair<Vec2, double> moments(const std::vector<std::size_t>& rows) const {
    const Vec2 shift = input_.rows[rows.front()].embedding;
    Vec2 mean{};
    for (int d = 0; d < 2; ++d) {
      double sum = 0.0;
      for (std::size_t r : rows) sum += input_.rows[r].embedding[d] - shift[d];
      mean[d] = shift[d] + sum / static_cast<double>(rows.size());
    }
    double sse = 0.0;
    for (std::size_t r : rows) {
      for (int d = 0; d < 2; ++d) {
        const double e = input_.rows[r].embedding[d] - mean[d];
        sse += e * e;
      }
    }
    return {mean, sse};
  }

  std::optional<Split> best_split(const std::vector<std::size_t>& rows,
                                  const Vec2& mean) const {
    const std::size_t n = rows.size();
    const std::size_t min_leaf = options_.min_leaf;
    if (n < 2 * min_leaf) return std::nullopt;

    std::optional<Split> best;
    std::vector<std::size_t> sorted(rows);
    std::vector<double> prefix_sum[2], prefix_sq[2];
    for (std::size_t f = 0; f < input_.feature_names.size(); ++f) {
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
        return input_.rows[a].features[f] < input_.rows[b].features[f];
      });
      for (int d = 0; d < 2; ++d) {
        prefix_sum[d].assign(n + 1, 0.0);
        prefix_sq[d].assign(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const double e = input_.rows[sorted[i]].embedding[d] - mean[d];
          prefix_sum[d][i + 1] = prefix_sum[d][i] + e;
          prefix_sq[d][i + 1] = prefix_sq[d][i] + e * e;
        }
      }
      for (std::size_t i = min_leaf; i + min_leaf <= n; ++i) {
        const double lo = input_.rows[sorted[i - 1]].features[f];
        const double hi = input_.rows[sorted[i]].features[f];
        if (!(lo < hi)) continue;
        double sse = 0.0;
        const double nl = static_cast<double>(i);
        const double nr = static_cast<double>(n - i);
        for (int d = 0; d < 2; ++d) {
          const double sl = prefix_sum[d][i];
          const double sr = prefix_sum[d][n] - sl;
          const double ql = prefix_sq[d][i];
          const double qr = prefix_sq[d][n] - ql;
          sse += std::max(0.0, ql - sl * sl / nl) + std::max(0.0, qr - sr * sr / nr);
        }
        if (!best || sse < best->sse) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold < hi)) threshold = lo;
          best = Split{f, threshold, sse};
        }
      }
    }
    return best;
  }

  int grow(std::vector<std::size_t> rows, int parent, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    {
      DtaleNode& node = nodes_.back();
      node.id = id;
      node.parent = parent;
      node.depth = depth;
      const auto [mean, sse] = moments(rows);
      node.mean = mean;
      node.sse = sse;
      node.members = rows;
    }
    if (depth >= options_.max_depth) return id;
    const Vec2 mean = nodes_[id].mean;
    const double node_sse = nodes_[id].sse;
    const auto split = best_split(rows, mean);
    if (!split || !(node_sse - split->sse > tolerance_)) return id;

    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (input_.rows[r].features[split->feature] <= split->threshold ? left : right)
          .push_back(r);
    }
    nodes_[id].feature = split->feature;
    nodes_[id].threshold = split->threshold;
    const int l = grow(std::move(left), id, depth + 1);
    nodes_[id].left = l;
    const int r = grow(std::move(right), id, depth + 1);
    nodes_[id].right = r;
    return id;
  }

  const DtaleInput& input_;
  const DtaleOptions& options_;
  double tolerance_ = 0.0;
  std::vector<DtaleNode> nodes_;
};

}  // namespace

DtaleTree fit_tree(const DtaleInput& input, const DtaleOptions& options) {
  input.validate();
  options.validate();
  return DtaleTree(input.feature_names, TreeBuilder(input, options).build());
}

NodeStats node_stats(const DtaleTree& tree, const DtaleInput& input) {
  NodeStats stats;
  stats.classes = input.model_classes();
  std::map<std::string, std::size_t, std::less<>> class_index;
  for (std::size_t c = 0; c < stats.classes.size(); ++c) class_index[stats.classes[c]] = c;
  stats.class_totals.assign(stats.classes.size(), 0);
  for (const auto& row : input.rows) ++stats.class_totals[class_index.at(row.model_class)];

  for (const auto& node : tree.nodes()) {
    std::vector<std::size_t> hits(stats.classes.size(), 0);
    for (std::size_t r : node.members) {
      ++hits[class_index.at(input.rows.at(r).model_class)];
    }
    std::vector<NodeClassStats> row(stats.classes.size());
    for (std::size_t c = 0; c < stats.classes.size(); ++c) {
      auto& s = row[c];
      s.true_positives = hits[c];
      s.node_size = node.members.size();
      s.precision = s.node_size
                        ? static_cast<double>(hits[c]) / static_cast<double>(s.node_size)
                        : 0.0;
      s.recall = static_cast<double>(hits[c]) /
                 static_cast<double>(stats.class_totals[c]);
      s.f1 = (s.precision + s.recall) > 0.0
                 ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                 : 0.0;
    }
    stats.table.push_back(std::move(row));
  }
  return stats;
}

std::map<std::string, Explanation> explain(const DtaleTree& tree,
                                           const NodeStats& stats,
                                           ExplainMode mode) {
  std::map<std::string, Explanation> out;
  for (std::size_t c = 0; c < stats.classes.size(); ++c) {
    if (stats.class_totals[c] == 0) continue;
    int best = -1;
    double best_score = -1.0;
    for (std::size_t n = 0; n < stats.table.size(); ++n) {
      const auto& s = stats.table[n][c];
      const double score =
          mode == ExplainMode::representative ? s.f1 : s.precision;
      if (score > best_score) {
        best = static_cast<int>(n);
        best_score = score;
      }
    }
    out[stats.classes[c]] = {stats.classes[c], best,
                             stats.table[static_cast<std::size_t>(best)][c],
                             tree.path(best)};
  }
  return out;
}

std::string format_path(const std::vector<PathStep>& path) {
  if (path.empty()) return "(root)";
  std::vector<std::string> parts;
  for (const auto& step : path) {
    parts.push_back(fmt::format("{} {} {}", step.feature, step.less_equal ? "<=" : ">",
                                format_double(step.threshold)));
  }
  return join(parts, " AND ");
}

}  // namespace annotruth
