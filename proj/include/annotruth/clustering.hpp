#pragma once

#include <cstddef>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "annotruth/corpus.hpp"
#include "annotruth/geometry.hpp"

namespace annotruth {

struct ClusterParams {
  // Minimum IOU t* for two boxes to share a cluster; the dendrogram is cut
  // at distance 1 - t*.
  double iou_threshold = 0.25;

  void validate() const;
};

struct ClusterItem {
  std::string id;
  std::string participant_id;
  BoundingBox box;
};

// Complete-linkage dendrogram over IOU similarity. Leaves are numbered
// 0..n-1 in ascending item-id order; internal nodes follow in merge order.
// Pairs with zero IOU are never merged, so the result may be a forest.
struct Dendrogram {
  struct Node {
    int left = -1;
    int right = -1;
    int parent = -1;
    // Linkage similarity (minimum pairwise IOU) at which the node formed;
    // +inf for leaves.
    double similarity = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> leaves;  // sorted
    bool is_leaf() const { return left < 0; }
  };

  std::vector<std::size_t> leaf_item;  // leaf -> index into the input items
  std::vector<Node> nodes;

  std::vector<int> roots() const;
};

Dendrogram build_dendrogram(std::span<const ClusterItem> items);

// Node ids of the maximal subtrees whose linkage similarity is >= t*.
std::vector<int> cut_dendrogram(const Dendrogram& tree, double iou_threshold);

struct FovClustering {
  // Unconstrained clusters straight from the cut. Indices into the input.
  std::vector<std::vector<std::size_t>> unconstrained;
  // Final clusters after same-participant members were demoted. Each cluster
  // is sorted by item id; clusters are ordered by their smallest item id.
  std::vector<std::vector<std::size_t>> clusters;
};

// Constrained agglomerative clustering of one FOV's annotations. Within each
// cut cluster, a participant keeps the member that joined at the highest
// linkage similarity (ties: lowest id); its other members descend the
// dendrogram along their own path to the first node holding no other member
// of that participant and form (or join) a cluster there.
FovClustering cluster_fov(std::span<const ClusterItem> items,
                          const ClusterParams& params);

// Member with the largest mean IOU against the other members; ties go to the
// lowest id. Returns an index into `members`.
std::size_t medoid(std::span<const ClusterItem> members);

struct AnchorProposal {
  std::string anchor_id;
  std::string fov_id;
  std::vector<std::string> members;  // sorted annotation ids
  std::string medoid;
  BoundingBox medoid_box;
};

struct AnchorSet {
  std::vector<AnchorProposal> anchors;  // ordered by fov_id, then ordinal
  std::vector<std::string> singletons;  // annotation ids left unclustered
};

// Clusters every FOV belonging to `datasets` (all datasets when empty).
// Clusters with at least two members become anchors. Throws ConfigError for a
// dataset tag absent from the corpus.
AnchorSet build_anchors(const Corpus& corpus, const ClusterParams& params,
                        const std::set<std::string>& datasets = {});

}  // namespace annotruth
