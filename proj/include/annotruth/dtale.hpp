#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace annotruth {

using Vec2 = std::array<double, 2>;

struct DtaleRow {
  std::string id;
  Vec2 embedding{};
  std::vector<double> features;
  std::string model_class;
};

struct DtaleInput {
  std::vector<std::string> feature_names;
  std::vector<DtaleRow> rows;

  // Unique feature names and row ids, matching widths, finite values.
  void validate() const;
  std::vector<std::string> model_classes() const;  // sorted, unique
};

struct DtaleOptions {
  int max_depth = 7;
  std::size_t min_leaf = 250;

  void validate() const;
};

struct DtaleNode {
  int id = 0;  // preorder
  int parent = -1;
  int left = -1;   // feature <= threshold
  int right = -1;  // feature > threshold
  int depth = 0;
  std::optional<std::size_t> feature;
  double threshold = 0.0;
  Vec2 mean{};
  double sse = 0.0;                  // summed over both embedding axes
  std::vector<std::size_t> members;  // input row indices, ascending row id

  bool is_leaf() const { return left < 0; }
};

struct PathStep {
  std::string feature;
  double threshold = 0.0;
  bool less_equal = true;
};

class DtaleTree {
 public:
  DtaleTree(std::vector<std::string> feature_names, std::vector<DtaleNode> nodes);

  const std::vector<DtaleNode>& nodes() const { return nodes_; }
  const DtaleNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& feature_names() const { return feature_names_; }

  int leaf_for(std::span<const double> features) const;
  Vec2 predict(std::span<const double> features) const;
  double total_sse() const;  // sum over leaves
  int depth() const;
  // Decision conditions from the root down to `node`.
  std::vector<PathStep> path(int node) const;

 private:
  std::vector<std::string> feature_names_;
  std::vector<DtaleNode> nodes_;
};

// Greedy CART regression tree on the 2-D embedding, minimising the summed
// per-axis squared error. Candidate thresholds are midpoints between
// consecutive distinct feature values; both children must keep at least
// min_leaf rows and the split must strictly lower the error. Ties prefer the
// earlier feature, then the lower threshold. Rows are processed in id order,
// so any permutation of the input yields the same tree.
DtaleTree fit_tree(const DtaleInput& input, const DtaleOptions& options = {});

struct NodeClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t node_size = 0;
};

// Per (node, class): scores of labelling the whole subtree as that class,
// with the model's predicted class as ground truth.
struct NodeStats {
  std::vector<std::string> classes;
  std::vector<std::size_t> class_totals;
  std::vector<std::vector<NodeClassStats>> table;  // [node][class]
};

NodeStats node_stats(const DtaleTree& tree, const DtaleInput& input);

enum class ExplainMode { representative, discriminative };

struct Explanation {
  std::string model_class;
  int node = 0;
  NodeClassStats stats;
  std::vector<PathStep> path;
};

// Per class, the node with the highest F1 (representative) or precision
// (discriminative); ties go to the lowest node id. Classes with no rows are
// omitted.
std::map<std::string, Explanation> explain(const DtaleTree& tree,
                                           const NodeStats& stats,
                                           ExplainMode mode);

std::string format_path(const std::vector<PathStep>& path);

}  // namespace annotruth
