#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "annotruth/error.hpp"
#include "annotruth/inference.hpp"
#include "em_oracle.hpp"
#include "support.hpp"

using namespace annotruth;
using testsupport::box;
using testsupport::box_annotation;

namespace {

LabelMatrix matrix(std::vector<std::string> labels, std::vector<std::vector<int>> obs) {
  LabelMatrix m;
  m.labels = std::move(labels);
  for (std::size_t i = 0; i < obs.size(); ++i) m.anchors.push_back(fmt::format("a{}", i));
  for (std::size_t r = 0; r < (obs.empty() ? 0 : obs[0].size()); ++r) {
    m.raters.push_back(fmt::format("r{}", r));
  }
  m.observed = std::move(obs);
  return m;
}

// Random planted matrix: raters report the truth with their accuracy,
// otherwise a uniformly chosen wrong label; some cells are missing.
LabelMatrix planted_matrix(Rng& rng, int anchors, int raters, int labels,
                           std::vector<double> accuracy, std::vector<int>& truth,
                           double missing = 0.2) {
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> pick(0, labels - 1), other(1, labels - 1);
  std::vector<std::vector<int>> obs(anchors, std::vector<int>(raters, -1));
  truth.assign(anchors, 0);
  for (int i = 0; i < anchors; ++i) {
    truth[i] = pick(rng);
    bool any = false;
    for (int r = 0; r < raters; ++r) {
      if (u(rng) < missing && !(r == raters - 1 && !any)) continue;
      obs[i][r] = u(rng) < accuracy[r] ? truth[i] : (truth[i] + other(rng)) % labels;
      any = true;
    }
  }
  std::vector<std::string> names;
  for (int k = 0; k < labels; ++k) names.push_back(fmt::format("c{}", k));
  return matrix(names, obs);
}

void check_simplex(const std::vector<double>& p) {
  double s = 0;
  for (double v : p) {
    CHECK(v >= 0.0);
    s += v;
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
}

}  // namespace

TEST_CASE("unanimous raters give a confident posterior") {
  const auto m = matrix({"tumor", "fibroblast", "undetected"},
                        {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}});
  const auto r = em_infer(m);
  for (const auto& p : r.posteriors) CHECK(p[0] > 0.999);
  for (const auto& rm : r.raters) {
    for (const auto& row : rm.confusion) check_simplex(row);
  }
}

TEST_CASE("single rater map equals its labels") {
  const auto m = matrix({"a", "b", "c"}, {{0}, {1}, {2}, {1}, {1}});
  const auto r = em_infer(m);
  CHECK(r.map_labels == std::vector<std::size_t>{0, 1, 2, 1, 1});
}

TEST_CASE("inverting rater is recovered against an independent EM") {
  // Raters 0 and 1 are correct; rater 2 swaps labels 0 and 1.
  const std::vector<std::vector<int>> obs{
      {0, 0, 1}, {1, 1, 0}, {0, 0, 1}, {2, 2, 2}, {1, 1, 0}};
  const auto m = matrix({"x", "y", "z"}, obs);
  const auto r = em_infer(m);
  const auto o = oracle::dawid_skene(obs, 3, 0.7, 70, 1e-6);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (int k = 0; k < 3; ++k) CHECK(r.posteriors[i][k] == doctest::Approx(o.posteriors[i][k]).epsilon(1e-9));
  }
  CHECK(r.map_labels == std::vector<std::size_t>{0, 1, 0, 2, 1});
  CHECK(r.raters[2].confusion[0][0] < 0.01);
  CHECK(r.raters[2].confusion[0][1] > 0.99);
  CHECK(r.raters[2].quality < r.raters[0].quality);
}

TEST_CASE("em matches the oracle on random matrices") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> truth;
    const auto m = planted_matrix(rng, 30, 5, 4, {0.9, 0.8, 0.7, 0.6, 0.4}, truth);
    const auto r = em_infer(m);
    const auto o = oracle::dawid_skene(m.observed, 4, 0.7, 70, 1e-6);
    for (std::size_t i = 0; i < m.anchors.size(); ++i) {
      for (int k = 0; k < 4; ++k) {
        CHECK(r.posteriors[i][k] == doctest::Approx(o.posteriors[i][k]).epsilon(1e-7));
      }
    }
  }
}

TEST_CASE("log likelihood is non-decreasing and posteriors are simplex") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> truth;
    const auto m = planted_matrix(rng, 40, 6, 5, {0.9, 0.7, 0.6, 0.5, 0.4, 0.3}, truth, 0.3);
    const auto r = em_infer(m);
    REQUIRE(r.log_likelihood.size() == 71);
    for (std::size_t t = 1; t < r.log_likelihood.size(); ++t) {
      CHECK(r.log_likelihood[t] >= r.log_likelihood[t - 1] - 1e-9);
    }
    for (const auto& p : r.posteriors) check_simplex(p);
    check_simplex(r.priors);
    for (const auto& rm : r.raters) {
      for (const auto& row : rm.confusion) check_simplex(row);
    }
  }
}

TEST_CASE("perfect raters reproduce planted truth") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> truth;
    const auto m = planted_matrix(rng, 25, 4, 4, {1, 1, 1, 1}, truth);
    const auto r = em_infer(m);
    for (std::size_t i = 0; i < truth.size(); ++i) {
      CHECK(r.map_labels[i] == static_cast<std::size_t>(truth[i]));
    }
  }
}

TEST_CASE("rater and anchor order do not matter") {
  Rng rng(13);
  std::vector<int> truth;
  const auto m = planted_matrix(rng, 30, 5, 3, {0.9, 0.8, 0.6, 0.6, 0.5}, truth);
  const auto base = em_infer(m);

  auto shuffled = m;
  std::vector<std::size_t> rperm(m.raters.size()), aperm(m.anchors.size());
  std::iota(rperm.begin(), rperm.end(), 0);
  std::iota(aperm.begin(), aperm.end(), 0);
  std::shuffle(rperm.begin(), rperm.end(), rng);
  std::shuffle(aperm.begin(), aperm.end(), rng);
  for (std::size_t i = 0; i < aperm.size(); ++i) {
    shuffled.anchors[i] = m.anchors[aperm[i]];
    for (std::size_t r = 0; r < rperm.size(); ++r) {
      shuffled.observed[i][r] = m.observed[aperm[i]][rperm[r]];
    }
  }
  for (std::size_t r = 0; r < rperm.size(); ++r) shuffled.raters[r] = m.raters[rperm[r]];
  const auto other = em_infer(shuffled);
  for (std::size_t i = 0; i < aperm.size(); ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(other.posteriors[i][k] == doctest::Approx(base.posteriors[aperm[i]][k]).epsilon(1e-9));
    }
  }
}

TEST_CASE("em preconditions") {
  const auto m = matrix({"a", "b"}, {{0, -1}, {-1, -1}});
  CHECK_THROWS_AS(em_infer(m), DataError);
  const auto ok = matrix({"a", "b"}, {{0, 1}});
  EmOptions o;
  o.init_quality = 0.5;  // 1/L is uninformative
  CHECK_THROWS_AS(em_infer(ok, o), ConfigError);
  o.init_quality = 1.0;
  CHECK_THROWS_AS(em_infer(ok, o), ConfigError);
}

TEST_CASE("single-label corpus collapses to that label") {
  const auto m = matrix({"a", "b", "undetected"}, {{1, 1}, {1, 1}, {1, -1}});
  const auto r = em_infer(m);
  for (auto k : r.map_labels) CHECK(k == 1);
}

TEST_CASE("tolerance stops early") {
  Rng rng(2);
  std::vector<int> truth;
  const auto m = planted_matrix(rng, 30, 4, 3, {1, 1, 1, 1}, truth);
  EmOptions o;
  o.tolerance = 1e-6;
  const auto r = em_infer(m, o);
  CHECK(r.log_likelihood.size() < 71);
}

TEST_CASE("label matrix semantics") {
  const auto t = Taxonomy::default_taxonomy();
  // p3 covers f1 but misses the nucleus; p4 never looked at f1.
  const auto c = Corpus::build(
      {box_annotation("a", "f1", "p1", "tumor", box(0, 0)),
       box_annotation("b", "f1", "p2", "unlabeled", box(0, 0)),
       box_annotation("c", "f1", "p3", "tumor", box(50, 50)),
       box_annotation("d", "f2", "p4", "tumor", box(0, 0))},
      {{"p1", Tier::NP, {}}, {"p2", Tier::NP, {}}, {"p3", Tier::NP, {}}, {"p4", Tier::NP, {}}},
      {}, {{"f1", "eval", 100, 100}, {"f2", "eval", 100, 100}}, t);
  const std::vector<AnchorProposal> anchors{{"f1#1", "f1", {"a", "b"}, "a", box(0, 0)}};
  const std::vector<std::string> raters{"p1", "p2", "p3", "p4"};
  const auto m = build_label_matrix(c, anchors, t, raters);
  REQUIRE(m.observed.size() == 1);
  const int undetected = static_cast<int>(m.labels.size() - 1);
  CHECK(m.observed[0][0] == static_cast<int>(*t.class_index("tumor")));
  CHECK(m.observed[0][1] == static_cast<int>(*t.class_index("ambiguous")));
  CHECK(m.observed[0][2] == undetected);
  CHECK(m.observed[0][3] == LabelMatrix::kMissing);
}

namespace {

struct TwoTier {
  Corpus corpus;
  std::vector<AnchorProposal> anchors;
};

// Eight pathologists agree on twelve fibroblasts, which pins down their
// reliability. Then: anchor A has two pathologist members (the other six
// covered the FOV and missed it), anchor B has one, and anchor C has three.
// C's consensus is left to EM.
TwoTier decision_fixture() {
  const auto t = Taxonomy::default_taxonomy();
  std::vector<std::string> people_ids{"sp1", "jp1", "jp2", "jp3", "jp4", "jp5", "jp6", "jp7"};
  std::vector<Participant> people;
  for (const auto& id : people_ids) people.push_back({id, id == "sp1" ? Tier::SP : Tier::JP, {}});
  people.push_back({"np1", Tier::NP, {}});
  std::vector<Annotation> ann;
  std::vector<AnchorProposal> anchors;
  for (int n = 0; n < 12; ++n) {
    AnchorProposal a{fmt::format("f#{}", n + 1), "f", {}, "", box(30.0 * n, 0)};
    for (const auto& id : people_ids) {
      const auto aid = fmt::format("{}_{}", id, n);
      ann.push_back(box_annotation(aid, "f", id, "fibroblast", box(30.0 * n, 0)));
      a.members.push_back(aid);
    }
    a.medoid = a.members.front();
    anchors.push_back(std::move(a));
  }
  auto add = [&](const std::string& anchor, double y, std::vector<std::string> who) {
    AnchorProposal a{anchor, "f", {}, "", box(0, y)};
    for (const auto& id : who) {
      const auto aid = fmt::format("{}_{}", id, anchor);
      ann.push_back(box_annotation(aid, "f", id, "tumor", box(0, y)));
      a.members.push_back(aid);
    }
    std::sort(a.members.begin(), a.members.end());
    a.medoid = a.members.front();
    anchors.push_back(std::move(a));
  };
  add("A", 100, {"sp1", "jp1", "np1"});
  add("B", 200, {"sp1", "np1"});
  add("C", 300, {"sp1", "jp1", "jp2"});
  auto c = Corpus::build(std::move(ann), std::move(people), {}, {{"f", "eval", 500, 500}}, t);
  return {std::move(c), std::move(anchors)};
}

}  // namespace

TEST_CASE("two-rule nucleus decision truth table") {
  // Every (member count, consensus) combination against the rule.
  std::vector<AnchorProposal> anchors;
  TierInference fake;
  std::vector<std::size_t> counts;
  std::vector<bool> expected;
  for (std::size_t count = 0; count <= 3; ++count) {
    for (bool undetected : {false, true}) {
      const auto id = fmt::format("a{}{}", count, undetected);
      anchors.push_back({id, "f", {"x", "y"}, "x", box(0, 0)});
      fake.labels.push_back({id, {}, undetected ? "undetected" : "tumor", {}, false});
      counts.push_back(count);
      expected.push_back(count >= 2 && !undetected);
    }
  }
  CHECK(decide_nuclei(anchors, fake, counts) == expected);
  // Anchors the pathologist tier never saw are not nuclei.
  anchors.push_back({"ghost", "f", {"x", "y"}, "x", box(0, 0)});
  counts.push_back(3);
  expected.push_back(false);
  CHECK(decide_nuclei(anchors, fake, counts) == expected);
}

TEST_CASE("two-rule decision on inferred P-truth") {
  const auto fx = decision_fixture();
  const auto t = Taxonomy::default_taxonomy();
  const auto p = infer_tier(fx.corpus, fx.anchors, t, RaterGroup::pathologist);
  const auto counts = pathologist_member_counts(fx.corpus, fx.anchors);
  REQUIRE(counts.size() == 15);
  CHECK(counts[12] == 2);
  CHECK(counts[13] == 1);
  CHECK(counts[14] == 3);
  const auto nuclei = decide_nuclei(fx.anchors, p, counts);
  for (std::size_t i = 0; i < 12; ++i) CHECK(nuclei[i]);
  // Six of eight pathologists looked and saw nothing at A and B.
  CHECK(p.labels[12].map_label == "undetected");
  CHECK_FALSE(nuclei[12]);
  CHECK_FALSE(nuclei[13]);
  CHECK(nuclei[14] == (p.labels[14].map_label != "undetected"));
}

TEST_CASE("tier with no raters is an error") {
  testsupport::PlantedSpec spec;
  spec.raters = {{"n1"}, {"n2"}};
  const auto planted = testsupport::make_planted(spec);
  const auto set = build_anchors(planted.corpus, {});
  CHECK_THROWS_AS(infer_tier(planted.corpus, set.anchors, Taxonomy::default_taxonomy(),
                             RaterGroup::pathologist),
                  DataError);
}

TEST_CASE("duplicated annotations give identical labels per tier") {
  testsupport::PlantedSpec spec;
  spec.raters = {{"n1", Tier::NP, 0.8}, {"n2", Tier::NP, 0.7}, {"n3", Tier::NP, 0.9}};
  auto planted = testsupport::make_planted(spec);
  // Mirror every NP as a pathologist with identical marks.
  std::vector<Annotation> ann = planted.corpus.annotations();
  std::vector<Participant> people = planted.corpus.participants();
  for (const auto& a : planted.corpus.annotations()) {
    auto copy = a;
    copy.id = "P" + a.id;
    copy.participant_id = "P" + a.participant_id;
    ann.push_back(copy);
  }
  for (const auto& p : planted.corpus.participants()) people.push_back({"P" + p.id, Tier::SP, {}});
  const auto t = Taxonomy::default_taxonomy();
  const auto c = Corpus::build(ann, people, {}, planted.corpus.fovs(), t);
  const auto set = build_anchors(c, {});
  const auto np = infer_tier(c, set.anchors, t, RaterGroup::np);
  const auto path = infer_tier(c, set.anchors, t, RaterGroup::pathologist);
  REQUIRE(np.labels.size() == path.labels.size());
  for (std::size_t i = 0; i < np.labels.size(); ++i) {
    CHECK(np.labels[i].map_label == path.labels[i].map_label);
  }
}

TEST_CASE("boundary correctness") {
  using V = BoundaryVote;
  const std::vector<std::vector<V>> votes{
      {{"a", true}, {"b", true}, {"c", true}},
      {{"a", false}, {"b", false}, {"c", false}},
      {},
      {{"a", true}, {"b", true}, {"c", true}, {"d", false}},
  };
  const auto p = infer_boundary_correctness(votes);
  REQUIRE(p.size() == 4);
  CHECK(*p[0] > 0.999);
  CHECK(*p[1] < 0.001);
  CHECK_FALSE(p[2].has_value());
  CHECK(*p[3] > 0.5);

  // The 3-vs-1 case alone against the oracle.
  const auto single = infer_boundary_correctness({votes[3]});
  const auto o = oracle::dawid_skene({{0, 0, 0, 1}}, 2, 0.7, 70, 1e-6);
  CHECK(*single[0] == doctest::Approx(o.posteriors[0][0]).epsilon(1e-9));
  CHECK(*single[0] > 0.5);
}

TEST_CASE("boundary votes come from suggestion-linked anchors") {
  testsupport::PlantedSpec spec;
  spec.suggestions = true;
  spec.raters = {{"s1", Tier::SP, 1, 1, 1.0}, {"s2", Tier::SP, 1, 1, 1.0}, {"j1", Tier::JP, 1, 1, 0.0}};
  const auto planted = testsupport::make_planted(spec);
  const auto t = Taxonomy::default_taxonomy();
  const auto set = build_anchors(planted.corpus, {});
  const auto p = infer_tier(planted.corpus, set.anchors, t, RaterGroup::pathologist);
  for (const auto& l : p.labels) {
    REQUIRE(l.boundary_correct_posterior.has_value());
    CHECK(*l.boundary_correct_posterior > 0.5);
  }
}
