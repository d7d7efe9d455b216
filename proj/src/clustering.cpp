#include "annotruth/clustering.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>

#include <fmt/core.h>

#include "annotruth/error.hpp"
#include "annotruth/parallel.hpp"

namespace annotruth {

void ClusterParams::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError(
        fmt::format("iou threshold must lie in (0, 1], got {}", iou_threshold));
  }
}

std::vector<int> Dendrogram::roots() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].parent < 0) out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

std::vector<std::size_t> order_by_id(std::span<const ClusterItem> items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return items[a].id < items[b].id;
  });
  return order;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

// Naive complete-linkage agglomeration of one connected component (leaves
// sorted ascending). Ties in similarity go to the pair whose smallest leaf
// ids are lexicographically smallest.
void agglomerate_component(const std::vector<std::size_t>& leaves,
                           const std::vector<std::vector<double>>& leaf_sim,
                           Dendrogram& tree) {
  const std::size_t m = leaves.size();
  std::vector<std::vector<double>> sim(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (i != j) sim[i][j] = leaf_sim[leaves[i]][leaves[j]];
    }
  }
  std::vector<int> node_of(m);
  std::vector<std::size_t> key(m);
  std::vector<bool> active(m, true);
  for (std::size_t i = 0; i < m; ++i) {
    node_of[i] = static_cast<int>(leaves[i]);
    key[i] = leaves[i];
  }

  for (std::size_t step = 1; step < m; ++step) {
    double best = 0.0;
    std::size_t best_a = m, best_b = m;
    std::pair<std::size_t, std::size_t> best_key{};
    for (std::size_t a = 0; a < m; ++a) {
      if (!active[a]) continue;
      for (std::size_t b = a + 1; b < m; ++b) {
        if (!active[b] || sim[a][b] <= 0.0) continue;
        const auto k = std::minmax(key[a], key[b]);
        const std::pair<std::size_t, std::size_t> pair_key{k.first, k.second};
        if (best_a == m || sim[a][b] > best ||
            (sim[a][b] == best && pair_key < best_key)) {
          best = sim[a][b];
          best_a = a;
          best_b = b;
          best_key = pair_key;
        }
      }
    }
    if (best_a == m) break;

    Dendrogram::Node node;
    node.left = node_of[best_a];
    node.right = node_of[best_b];
    node.similarity = best;
    const auto& la = tree.nodes[node.left].leaves;
    const auto& lb = tree.nodes[node.right].leaves;
    std::merge(la.begin(), la.end(), lb.begin(), lb.end(),
               std::back_inserter(node.leaves));
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes[node.left].parent = id;
    tree.nodes[node.right].parent = id;
    tree.nodes.push_back(std::move(node));

    for (std::size_t k = 0; k < m; ++k) {
      if (!active[k] || k == best_a || k == best_b) continue;
      const double s = std::min(sim[best_a][k], sim[best_b][k]);
      sim[best_a][k] = sim[k][best_a] = s;
    }
    active[best_b] = false;
    node_of[best_a] = id;
    key[best_a] = std::min(key[best_a], key[best_b]);
  }
}

}  // namespace

Dendrogram build_dendrogram(std::span<const ClusterItem> items) {
  const std::size_t n = items.size();
  Dendrogram tree;
  tree.leaf_item = order_by_id(items);
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) tree.nodes[i].leaves = {i};

  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  UnionFind components(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = iou(items[tree.leaf_item[i]].box, items[tree.leaf_item[j]].box);
      sim[i][j] = sim[j][i] = s;
      if (s > 0.0) components.unite(i, j);
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[components.find(i)].push_back(i);
  for (const auto& [root, leaves] : groups) {
    if (leaves.size() > 1) agglomerate_component(leaves, sim, tree);
  }
  return tree;
}

std::vector<int> cut_dendrogram(const Dendrogram& tree, double iou_threshold) {
  std::vector<int> out;
  std::vector<int> stack = tree.roots();
  std::reverse(stack.begin(), stack.end());
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    const auto& node = tree.nodes[id];
    if (node.is_leaf() || node.similarity >= iou_threshold) {
      out.push_back(id);
    } else {
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
  }
  return out;
}

FovClustering cluster_fov(std::span<const ClusterItem> items,
                          const ClusterParams& params) {
  params.validate();
  FovClustering result;
  if (items.empty()) return result;

  const Dendrogram tree = build_dendrogram(items);
  const auto& leaf_item = tree.leaf_item;
  auto participant = [&](std::size_t leaf) -> const std::string& {
    return items[leaf_item[leaf]].participant_id;
  };
  auto join_similarity = [&](std::size_t leaf) {
    const int parent = tree.nodes[leaf].parent;
    return parent < 0 ? -1.0 : tree.nodes[parent].similarity;
  };

  // Final clusters keyed by the dendrogram node they are anchored at.
  std::map<int, std::vector<std::size_t>> by_node;

  for (const int top : cut_dendrogram(tree, params.iou_threshold)) {
    const auto& leaves = tree.nodes[top].leaves;
    result.unconstrained.emplace_back();
    for (std::size_t leaf : leaves) result.unconstrained.back().push_back(leaf);

    std::map<std::string, std::vector<std::size_t>> dont_link;
    for (std::size_t leaf : leaves) dont_link[participant(leaf)].push_back(leaf);

    std::set<std::size_t> demoted;
    for (auto& [pid, set] : dont_link) {
      if (set.size() < 2) continue;
      // Keep the member that joined the tree at the lowest height.
      std::stable_sort(set.begin(), set.end(), [&](std::size_t a, std::size_t b) {
        return join_similarity(a) > join_similarity(b);
      });
      for (std::size_t k = 1; k < set.size(); ++k) {
        const std::size_t leaf = set[k];
        demoted.insert(leaf);
        // Walk from the top node toward this leaf; stop at the first node
        // containing no other member of the same participant.
        std::vector<int> path;
        for (int v = static_cast<int>(leaf); v != top; v = tree.nodes[v].parent) {
          path.push_back(v);
        }
        std::reverse(path.begin(), path.end());
        int target = static_cast<int>(leaf);
        for (const int v : path) {
          const auto& vl = tree.nodes[v].leaves;
          const bool clean = std::none_of(set.begin(), set.end(), [&](std::size_t s) {
            return s != leaf && std::binary_search(vl.begin(), vl.end(), s);
          });
          if (clean) {
            target = v;
            break;
          }
        }
        by_node[target].push_back(leaf);
      }
    }
    auto& kept = by_node[top];
    for (std::size_t leaf : leaves) {
      if (!demoted.contains(leaf)) kept.push_back(leaf);
    }
  }

  for (auto& [node, leaves] : by_node) {
    if (leaves.empty()) continue;
    std::sort(leaves.begin(), leaves.end());
    result.clusters.push_back(leaves);
  }
  auto to_items = [&](std::vector<std::vector<std::size_t>>& clusters) {
    std::sort(clusters.begin(), clusters.end(),
              [](const auto& a, const auto& b) { return a.front() < b.front(); });
    for (auto& c : clusters) {
      for (auto& leaf : c) leaf = leaf_item[leaf];
    }
  };
  to_items(result.unconstrained);
  to_items(result.clusters);
  return result;
}

std::size_t medoid(std::span<const ClusterItem> members) {
  if (members.empty()) throw DataError("medoid of an empty cluster");
  std::size_t best = 0;
  double best_sum = -1.0;
  for (std::size_t i = 0; i < members.size(); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < members.size(); ++j) {
      if (i != j) sum += iou(members[i].box, members[j].box);
    }
    // Equal sizes share the denominator, so sums rank like means.
    if (sum > best_sum || (sum == best_sum && members[i].id < members[best].id)) {
      best = i;
      best_sum = sum;
    }
  }
  return best;
}

AnchorSet build_anchors(const Corpus& corpus, const ClusterParams& params,
                        const std::set<std::string>& datasets) {
  params.validate();
  const auto available = corpus.datasets();
  for (const auto& tag : datasets) {
    if (!available.contains(tag)) {
      throw ConfigError(fmt::format("unknown dataset tag '{}'", tag));
    }
  }

  std::map<std::string, std::vector<ClusterItem>> by_fov;
  for (const auto& a : corpus.annotations()) {
    const auto& fov = corpus.fov(a.fov_id);
    if (!datasets.empty() && !datasets.contains(fov.dataset)) continue;
    by_fov[a.fov_id].push_back({a.id, a.participant_id, a.box});
  }
  std::vector<const std::string*> fov_ids;
  std::vector<const std::vector<ClusterItem>*> fov_items;
  for (const auto& [id, items] : by_fov) {
    fov_ids.push_back(&id);
    fov_items.push_back(&items);
  }

  std::vector<AnchorSet> per_fov(fov_ids.size());
  parallel_for(fov_ids.size(), [&](std::size_t f) {
    const auto& items = *fov_items[f];
    const auto clustering = cluster_fov(items, params);
    AnchorSet& out = per_fov[f];
    for (const auto& cluster : clustering.clusters) {
      if (cluster.size() < 2) {
        out.singletons.push_back(items[cluster.front()].id);
        continue;
      }
      std::vector<ClusterItem> members;
      for (std::size_t i : cluster) members.push_back(items[i]);
      const auto& m = members[medoid(members)];
      AnchorProposal anchor{
          fmt::format("{}#{}", *fov_ids[f], out.anchors.size() + 1),
          *fov_ids[f], {}, m.id, m.box};
      for (const auto& member : members) anchor.members.push_back(member.id);
      out.anchors.push_back(std::move(anchor));
    }
  });

  AnchorSet merged;
  for (auto& part : per_fov) {
    std::move(part.anchors.begin(), part.anchors.end(),
              std::back_inserter(merged.anchors));
    std::move(part.singletons.begin(), part.singletons.end(),
              std::back_inserter(merged.singletons));
  }
  return merged;
}

}  // namespace annotruth
