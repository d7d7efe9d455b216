#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>

#include "annotruth/clustering.hpp"
#include "annotruth/error.hpp"
#include "support.hpp"

using namespace annotruth;
using testsupport::box;
using testsupport::box_annotation;

namespace {

std::vector<ClusterItem> random_items(Rng& rng, int n, int participants) {
  std::uniform_real_distribution<double> pos(0, 40), size(6, 14);
  std::uniform_int_distribution<int> who(0, participants - 1);
  std::vector<ClusterItem> items;
  for (int i = 0; i < n; ++i) {
    const double x = pos(rng), y = pos(rng);
    items.push_back({fmt::format("i{:03}", i), fmt::format("p{}", who(rng)),
                     BoundingBox(x, y, x + size(rng), y + size(rng))});
  }
  return items;
}

double min_pairwise_iou(const std::vector<ClusterItem>& items,
                        const std::vector<std::size_t>& cluster) {
  double m = 1.0;
  for (std::size_t a = 0; a < cluster.size(); ++a) {
    for (std::size_t b = a + 1; b < cluster.size(); ++b) {
      m = std::min(m, iou(items[cluster[a]].box, items[cluster[b]].box));
    }
  }
  return m;
}

}  // namespace

TEST_CASE("threshold validation") {
  CHECK_THROWS_AS(ClusterParams{0.0}.validate(), ConfigError);
  CHECK_THROWS_AS(ClusterParams{1.5}.validate(), ConfigError);
  CHECK_NOTHROW(ClusterParams{1.0}.validate());
}

TEST_CASE("three coincident boxes form one anchor") {
  const auto t = Taxonomy::default_taxonomy();
  const auto c = Corpus::build(
      {box_annotation("a", "f", "p1", "tumor", box(5, 5)),
       box_annotation("b", "f", "p2", "tumor", box(5, 5)),
       box_annotation("c", "f", "p3", "fibroblast", box(5, 5))},
      {{"p1", Tier::NP, {}}, {"p2", Tier::NP, {}}, {"p3", Tier::SP, {}}}, {},
      {{"f", "eval", 100, 100}}, t);
  const auto set = build_anchors(c, {});
  REQUIRE(set.anchors.size() == 1);
  CHECK(set.anchors[0].members == std::vector<std::string>{"a", "b", "c"});
  CHECK(set.anchors[0].medoid == "a");
  CHECK(set.anchors[0].anchor_id == "f#1");
  CHECK(set.singletons.empty());
}

TEST_CASE("far apart boxes stay singletons") {
  const std::vector<ClusterItem> items{{"a", "p1", box(0, 0)}, {"b", "p2", box(50, 50)}};
  const auto fc = cluster_fov(items, {});
  CHECK(fc.clusters.size() == 2);
}

TEST_CASE("complete linkage respects the threshold") {
  // a-b and b-c overlap strongly but a-c barely: complete linkage must not
  // put all three together at t = 0.25.
  const std::vector<ClusterItem> items{
      {"a", "p1", box(0, 0)}, {"b", "p2", box(3, 0)}, {"c", "p3", box(7, 0)}};
  CHECK(iou(items[0].box, items[2].box) < 0.25);
  const auto fc = cluster_fov(items, {0.25});
  for (const auto& cl : fc.clusters) CHECK(min_pairwise_iou(items, cl) >= 0.25);
  CHECK(fc.clusters.size() == 2);
}

TEST_CASE("same participant twice gets demoted") {
  // p1 marks the nucleus twice; the copy that merged later is split off.
  const std::vector<ClusterItem> items{{"a", "p1", box(0, 0)},
                                       {"b", "p2", box(0, 0)},
                                       {"c", "p1", box(1, 1)},
                                       {"d", "p3", box(0, 0)}};
  const auto fc = cluster_fov(items, {});
  REQUIRE(fc.unconstrained.size() == 1);
  REQUIRE(fc.clusters.size() == 2);
  CHECK(fc.clusters[0] == std::vector<std::size_t>{0, 1, 3});
  CHECK(fc.clusters[1] == std::vector<std::size_t>{2});
}

TEST_CASE("demoted members can form their own cluster") {
  // Two participants each mark two nuclei that overlap moderately. The cut
  // merges all four; demotion must leave two clean pairs.
  const std::vector<ClusterItem> items{{"a", "p1", box(0, 0)},
                                       {"b", "p2", box(0, 0)},
                                       {"c", "p1", box(4, 0)},
                                       {"d", "p2", box(4, 0)}};
  const auto fc = cluster_fov(items, {0.25});
  CHECK(fc.unconstrained.size() == 1);
  REQUIRE(fc.clusters.size() == 2);
  CHECK(fc.clusters[0] == std::vector<std::size_t>{0, 1});
  CHECK(fc.clusters[1] == std::vector<std::size_t>{2, 3});
}

TEST_CASE("dendrogram structure") {
  Rng rng(7);
  const auto items = random_items(rng, 25, 5);
  const auto tree = build_dendrogram(items);
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) continue;
    // Complete linkage: similarity is the minimum pairwise IOU of the leaves
    // and never exceeds the children's.
    double m = 1.0;
    for (auto a : n.leaves) {
      for (auto b : n.leaves) {
        if (a < b) m = std::min(m, iou(items[tree.leaf_item[a]].box, items[tree.leaf_item[b]].box));
      }
    }
    CHECK(n.similarity == doctest::Approx(m));
    CHECK(n.similarity > 0.0);
    CHECK(n.similarity <= tree.nodes[n.left].similarity);
    CHECK(n.similarity <= tree.nodes[n.right].similarity);
  }
  // The cut partitions the leaves.
  std::vector<int> seen(items.size(), 0);
  for (int id : cut_dendrogram(tree, 0.25)) {
    CHECK(tree.nodes[id].similarity >= 0.25);
    for (auto l : tree.nodes[id].leaves) ++seen[l];
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
}

TEST_CASE("constrained clusters: partition, no participant twice, linkage bound") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const auto items = random_items(rng, 30, 4);
    const double t = 0.1 + 0.1 * (trial % 5);
    const auto fc = cluster_fov(items, {t});
    std::vector<int> seen(items.size(), 0);
    for (const auto& cl : fc.clusters) {
      std::set<std::string> who;
      for (auto i : cl) {
        ++seen[i];
        CHECK(who.insert(items[i].participant_id).second);
      }
      CHECK(std::is_sorted(cl.begin(), cl.end()));
      if (cl.size() > 1) CHECK(min_pairwise_iou(items, cl) >= t);
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
  }
}

TEST_CASE("clustering ignores input order") {
  Rng rng(3);
  auto items = random_items(rng, 20, 4);
  auto as_ids = [](const std::vector<ClusterItem>& it, const FovClustering& fc) {
    std::set<std::set<std::string>> out;
    for (const auto& cl : fc.clusters) {
      std::set<std::string> ids;
      for (auto i : cl) ids.insert(it[i].id);
      out.insert(ids);
    }
    return out;
  };
  const auto reference = as_ids(items, cluster_fov(items, {}));
  for (int k = 0; k < 5; ++k) {
    std::shuffle(items.begin(), items.end(), rng);
    CHECK(as_ids(items, cluster_fov(items, {})) == reference);
  }
}

TEST_CASE("medoid matches brute force") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto items = random_items(rng, 2 + trial % 7, 8);
    std::size_t best = 0;
    double best_sum = -1;
    for (std::size_t i = 0; i < items.size(); ++i) {
      double s = 0;
      for (std::size_t j = 0; j < items.size(); ++j) {
        if (i != j) s += iou(items[i].box, items[j].box);
      }
      // Items are generated in id order, so the first maximum is the lowest id.
      if (s > best_sum) {
        best_sum = s;
        best = i;
      }
    }
    CHECK(medoid(items) == best);
  }
}

TEST_CASE("medoid ties go to the lowest id") {
  const std::vector<ClusterItem> items{{"z", "p1", box(0, 0)}, {"m", "p2", box(0, 0)}};
  CHECK(medoid(items) == 1);
}

TEST_CASE("anchors over planted corpus") {
  testsupport::PlantedSpec spec;
  for (int r = 0; r < 4; ++r) spec.raters.push_back({fmt::format("r{}", r)});
  const auto planted = testsupport::make_planted(spec);
  const auto set = build_anchors(planted.corpus, {});
  CHECK(set.anchors.size() == planted.truth.size());
  CHECK(set.singletons.empty());
  for (const auto& a : set.anchors) {
    CHECK(a.members.size() == 4);
    CHECK(planted.nucleus_of(a) < planted.truth.size());
  }
  CHECK_THROWS_AS(build_anchors(planted.corpus, {}, {"nope"}), ConfigError);
  CHECK(build_anchors(planted.corpus, {}, {"eval"}).anchors.size() == set.anchors.size());
}
