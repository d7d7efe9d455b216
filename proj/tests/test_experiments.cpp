#include <doctest.h>

#include "annotruth/error.hpp"
#include "annotruth/redundancy.hpp"
#include "annotruth/sampling_weights.hpp"
#include "support.hpp"

using namespace annotruth;

namespace {

ClassFovCounts table(std::vector<std::string> classes, std::vector<std::vector<double>> counts) {
  ClassFovCounts t;
  t.classes = std::move(classes);
  for (std::size_t f = 0; f < (counts.empty() ? 0 : counts[0].size()); ++f) {
    t.fovs.push_back(fmt::format("f{}", f));
  }
  t.counts = std::move(counts);
  return t;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

TEST_CASE("class weights") {
  const auto w = class_weights(table({"tumor", "fibroblast"}, {{3}, {1}}));
  CHECK(w.weights == std::vector<double>{0.25, 0.75});

  const auto eq = class_weights(table({"a", "b", "c", "d"}, {{2}, {2}, {2}, {2}}));
  for (double v : eq.weights) CHECK(v == 0.25);

  const auto amb = class_weights(table({"tumor", "ambiguous"}, {{5}, {100}}));
  CHECK(amb.weights == std::vector<double>{1.0, 0.0});

  const auto zero = class_weights(table({"tumor", "macrophage"}, {{4}, {0}}));
  CHECK(zero.weights == std::vector<double>{1.0, 0.0});
  CHECK(zero.warnings.size() == 1);

  CHECK_THROWS_AS(class_weights(table({"ambiguous"}, {{3}})), DataError);
  CHECK_THROWS_AS(class_weights(table({"a"}, {{-1}})), DataError);
}

TEST_CASE("fov weights") {
  const auto one = table({"tumor"}, {{7}});
  CHECK(fov_weights(one, {100}, class_weights(one)) == std::vector<double>{1.0});

  const auto two = table({"tumor", "fibroblast"}, {{3, 3}, {1, 1}});
  const auto w = fov_weights(two, {100, 200}, class_weights(two));
  CHECK(w[0] == doctest::Approx(2 * w[1]));
  CHECK(sum(w) == doctest::Approx(1.0));

  const auto amb = table({"tumor", "ambiguous"}, {{2, 0}, {0, 9}});
  const auto wa = fov_weights(amb, {10, 10}, class_weights(amb));
  CHECK(wa[1] == 0.0);
  CHECK(wa[0] == 1.0);

  CHECK_THROWS_AS(fov_weights(two, {100, 0}, class_weights(two)), DataError);
}

TEST_CASE("weights are scale invariant and normalised") {
  Rng rng(6);
  std::uniform_int_distribution<int> count(0, 20);
  std::uniform_real_distribution<double> area(50, 500);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<double>> c(4, std::vector<double>(5));
    for (auto& row : c) {
      for (auto& v : row) v = count(rng);
    }
    c[0][0] = 1;  // at least one positive count
    std::vector<double> areas(5);
    for (auto& a : areas) a = area(rng);
    const auto base = table({"tumor", "fibroblast", "lymphocyte", "ambiguous"}, c);
    auto scaled = base;
    for (auto& row : scaled.counts) {
      for (auto& v : row) v *= 7.5;
    }
    const auto wb = class_weights(base), ws = class_weights(scaled);
    CHECK(sum(wb.weights) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(wb.weights[3] == 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(wb.weights[i] >= 0.0);
      CHECK(ws.weights[i] == doctest::Approx(wb.weights[i]).epsilon(1e-12));
    }
    const auto fb = fov_weights(base, areas, wb), fs = fov_weights(scaled, areas, ws);
    CHECK(sum(fb) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t f = 0; f < 5; ++f) CHECK(fs[f] == doctest::Approx(fb[f]).epsilon(1e-12));
  }
}

TEST_CASE("mean and sd") {
  const std::vector<double> same(1000, 0.8371);
  const auto s = mean_sd(same);
  CHECK(s.mean == 0.8371);
  CHECK(s.sd == 0.0);
  const auto k = mean_sd(std::vector<double>{1, 2, 3, 4});
  CHECK(k.mean == 2.5);
  CHECK(k.sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(mean_sd(std::vector<double>{4}).sd == 0.0);
}

TEST_CASE("redundancy config validation") {
  RedundancyConfig c;
  c.nps_per_fov = 19;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.nps_per_fov = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.nps_per_fov = 3;
  c.realizations = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

namespace {

struct SimFixture {
  testsupport::Planted planted;
  std::vector<AnchorProposal> anchors;
  std::vector<InferredLabel> p_truth;
};

// Six NPs of mixed quality (one adversarial) and three accurate pathologists.
SimFixture sim_fixture() {
  testsupport::PlantedSpec spec;
  spec.fovs = 3;
  spec.nuclei_per_fov = 10;
  spec.seed = 99;
  const double acc[] = {0.9, 0.75, 0.7, 0.65, 0.6, 0.1};
  for (int i = 0; i < 6; ++i) spec.raters.push_back({fmt::format("np{}", i), Tier::NP, acc[i], 0.95});
  for (int i = 0; i < 3; ++i) spec.raters.push_back({fmt::format("sp{}", i), Tier::SP, 1.0});
  SimFixture fx{testsupport::make_planted(spec), {}, {}};
  fx.anchors = build_anchors(fx.planted.corpus, {}).anchors;
  const auto t = Taxonomy::default_taxonomy();
  auto p = infer_tier(fx.planted.corpus, fx.anchors, t, RaterGroup::pathologist);
  fx.p_truth = p.labels;
  return fx;
}

}  // namespace

TEST_CASE("redundancy simulation") {
  const auto fx = sim_fixture();
  const auto t = Taxonomy::default_taxonomy();
  RedundancyConfig c;
  c.nps_total = 6;
  c.realizations = 100;
  c.seed = 42;

  // Full-data NP accuracy for comparison.
  const auto np = infer_tier(fx.planted.corpus, fx.anchors, t, RaterGroup::np);
  double hits = 0;
  for (std::size_t i = 0; i < fx.p_truth.size(); ++i) {
    hits += np.labels[i].map_label == fx.p_truth[i].map_label;
  }
  const double full_accuracy = hits / static_cast<double>(fx.p_truth.size());

  c.nps_per_fov = 6;
  const auto all = simulate_redundancy(fx.planted.corpus, fx.anchors, t, fx.p_truth, c);
  CHECK(all.overall.mean == full_accuracy);
  CHECK(all.overall.sd == 0.0);

  c.nps_per_fov = 1;
  const auto one = simulate_redundancy(fx.planted.corpus, fx.anchors, t, fx.p_truth, c);
  CHECK(one.overall.mean < all.overall.mean);
  CHECK(one.overall.sd > 0.0);
  CHECK(one.accuracies.size() == 100);

  const auto again = simulate_redundancy(fx.planted.corpus, fx.anchors, t, fx.p_truth, c);
  CHECK(again.accuracies == one.accuracies);
  CHECK(again.per_class.size() == one.per_class.size());

  // nps_total below the corpus NP count is a configuration error.
  c.nps_total = 3;
  CHECK_THROWS_AS(simulate_redundancy(fx.planted.corpus, fx.anchors, t, fx.p_truth, c),
                  ConfigError);
}

TEST_CASE("simulated accuracy rises with k") {
  const auto fx = sim_fixture();
  const auto t = Taxonomy::default_taxonomy();
  RedundancyConfig c;
  c.nps_total = 6;
  c.realizations = 200;
  c.seed = 7;
  std::vector<RedundancyOutcome> out;
  for (int k = 1; k <= 6; ++k) {
    c.nps_per_fov = k;
    out.push_back(simulate_redundancy(fx.planted.corpus, fx.anchors, t, fx.p_truth, c));
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    CHECK(out[i].overall.mean >= out[i - 1].overall.mean - out[i - 1].overall.sd);
  }
}
