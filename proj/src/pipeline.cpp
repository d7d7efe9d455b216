#include "annotruth/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/core.h>
#include <fmt/ostream.h>
#include <json.hpp>

#include "annotruth/agreement.hpp"
#include "annotruth/artifacts.hpp"
#include "annotruth/bootstrap.hpp"
#include "annotruth/clustering.hpp"
#include "annotruth/corpus.hpp"
#include "annotruth/csv.hpp"
#include "annotruth/detection.hpp"
#include "annotruth/dtale.hpp"
#include "annotruth/error.hpp"
#include "annotruth/hypothesis_tests.hpp"
#include "annotruth/random.hpp"
#include "annotruth/redundancy.hpp"
#include "annotruth/roc.hpp"
#include "annotruth/sampling_weights.hpp"

#ifndef ANNOTRUTH_VERSION
#define ANNOTRUTH_VERSION "0.0.0"
#endif

namespace annotruth {

using json = nlohmann::json;

namespace {

constexpr std::pair<Command, std::string_view> kCommands[] = {
    {Command::cluster, "cluster"},   {Command::infer, "infer"},
    {Command::agree, "agree"},       {Command::evaluate, "evaluate"},
    {Command::simulate, "simulate"}, {Command::weights, "weights"},
    {Command::dtale, "dtale"},
};

// Sub-seed streams for the stochastic stages.
constexpr std::uint64_t kStreamSimulation = 1;
constexpr std::uint64_t kStreamBootstrap = 2;

void check_keys(const json& j, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(fmt::format("{} must be an object", where));
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
    }
  }
}

template <class T>
void read_key(const json& j, std::string_view key, T& target) {
  auto it = j.find(std::string(key));
  if (it == j.end() || it->is_null()) return;
  try {
    target = it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("config key '{}' has the wrong type", key));
  }
}

template <class T>
void read_key(const json& j, std::string_view key, std::optional<T>& target) {
  if (auto it = j.find(std::string(key)); it == j.end() || it->is_null()) return;
  T value{};
  read_key(j, key, value);
  target = value;
}

std::string fnv1a64_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace

std::string error_record(std::string_view kind, std::string_view message) {
  return json{{"error", kind}, {"message", message}}.dump(-1, ' ', false,
                                                       json::error_handler_t::replace);
}

namespace {

// State shared by the stage runners.
struct Context {
  const PipelineConfig& config;
  std::ostream& log;
  ArtifactHeader header;
  std::filesystem::path out;

  Taxonomy taxonomy() const {
    return config.taxonomy.empty() ? Taxonomy::default_taxonomy()
                                   : Taxonomy::load(config.resolve(config.taxonomy));
  }

  Corpus corpus(const Taxonomy& taxonomy) const {
    if (config.corpus.empty()) throw ConfigError("config names no corpus directory");
    return load_corpus(config.resolve(config.corpus), taxonomy);
  }

  std::set<std::string> datasets(const Corpus& corpus) const {
    std::set<std::string> tags(config.datasets.begin(), config.datasets.end());
    const auto present = corpus.datasets();
    for (const auto& tag : tags) {
      if (!present.count(tag)) throw ConfigError(fmt::format("unknown dataset '{}'", tag));
    }
    return tags.empty() ? present : tags;
  }

  std::filesystem::path artifact(std::string_view name) const { return out / name; }

  std::filesystem::path require(std::string_view name, std::string_view what,
                                std::string_view producer) const {
    auto path = artifact(name);
    if (!std::filesystem::exists(path)) {
      throw DataError(fmt::format("missing {}: {} not found; run `{}` first", what,
                                  path.string(), producer));
    }
    return path;
  }

  // Anchors of the configured datasets, in file order.
  std::vector<AnchorProposal> anchors(const Corpus& corpus) const {
    auto all = read_anchors(require(ArtifactNames::anchors, "anchors", "cluster"));
    const auto tags = datasets(corpus);
    std::vector<AnchorProposal> out;
    for (auto& a : all) {
      if (!corpus.has_fov(a.fov_id)) {
        throw DataError(fmt::format("anchor {} names unknown FOV {}", a.anchor_id, a.fov_id));
      }
      if (tags.count(corpus.fov(a.fov_id).dataset)) out.push_back(std::move(a));
    }
    return out;
  }

  InferenceReport inference(RaterGroup group) const {
    const std::string what = fmt::format("{} inference", to_string(group));
    return read_inference_report(
        require(ArtifactNames::inference(group), what, "infer"));
  }

  std::vector<RaterGroup> groups() const {
    if (config.tier) return {parse_rater_group(*config.tier)};
    return {RaterGroup::pathologist, RaterGroup::np};
  }

  EmOptions em() const {
    EmOptions o;
    o.init_quality = config.em.init_quality;
    o.iterations = config.em.iterations;
    o.tolerance = config.em.tolerance;
    return o;
  }
};

std::map<std::string, std::vector<AnchorProposal>> by_dataset(
    const Corpus& corpus, const std::vector<AnchorProposal>& anchors) {
  std::map<std::string, std::vector<AnchorProposal>> out;
  for (const auto& a : anchors) out[corpus.fov(a.fov_id).dataset].push_back(a);
  return out;
}

void run_cluster(const Context& ctx) {
  const auto taxonomy = ctx.taxonomy();
  const auto corpus = ctx.corpus(taxonomy);
  ClusterParams params{ctx.config.iou_threshold};
  const auto set = build_anchors(corpus, params, ctx.datasets(corpus));
  write_anchors(ctx.artifact(ArtifactNames::anchors), set.anchors, ctx.header);
  write_singletons(ctx.artifact(ArtifactNames::singletons), set.singletons, ctx.header);
  fmt::print(ctx.log, "cluster: {} anchors, {} singletons\n", set.anchors.size(),
             set.singletons.size());
}

void run_infer(const Context& ctx) {
  const auto taxonomy = ctx.taxonomy();
  const auto corpus = ctx.corpus(taxonomy);
  const auto anchors = ctx.anchors(corpus);
  const auto groups = ctx.groups();
  const auto options = ctx.em();
  const auto labels = taxonomy.inference_labels();

  std::map<RaterGroup, InferenceReport> reports;
  std::map<RaterGroup, std::vector<RaterRecord>> raters;
  for (auto g : groups) reports[g].labels = labels;

  for (const auto& [dataset, subset] : by_dataset(corpus, anchors)) {
    // The pathologist tier always runs: it decides which anchors are nuclei.
    auto pathologist = infer_tier(corpus, subset, taxonomy, RaterGroup::pathologist, options);
    const auto counts = pathologist_member_counts(corpus, subset);
    const auto nuclei = decide_nuclei(subset, pathologist, counts);
    std::map<std::string, bool, std::less<>> is_nucleus;
    for (std::size_t i = 0; i < subset.size(); ++i) is_nucleus[subset[i].anchor_id] = nuclei[i];

    for (auto g : groups) {
      auto result = g == RaterGroup::pathologist
                        ? std::move(pathologist)
                        : infer_tier(corpus, subset, taxonomy, g, options);
      for (auto& label : result.labels) {
        label.is_nucleus = is_nucleus.at(label.anchor_id);
        reports[g].rows.push_back(std::move(label));
      }
      for (std::size_t r = 0; r < result.em.raters.size(); ++r) {
        raters[g].push_back({dataset, result.em.raters[r].rater, result.rater_tiers[r],
                             result.em.raters[r]});
      }
      fmt::print(ctx.log, "infer: {} {}: {} anchors, {} raters\n", dataset,
                 to_string(g), result.em.anchors.size(), result.em.raters.size());
    }
  }
  for (auto g : groups) {
    write_inference_report(ctx.artifact(ArtifactNames::inference(g)), reports[g],
                           ctx.header);
    write_rater_report(ctx.artifact(ArtifactNames::raters(g)), labels, raters[g],
                       ctx.header);
  }
}

std::string_view scope_name(GroupLevel level) {
  return level == GroupLevel::class_ ? "class" : "super_class";
}

constexpr GroupLevel kLevels[] = {GroupLevel::class_, GroupLevel::super_class};

// Nucleus anchors according to the pathologist report.
std::vector<AnchorProposal> nucleus_anchors(const Context& ctx,
                                            const std::vector<AnchorProposal>& anchors) {
  std::set<std::string, std::less<>> nuclei;
  for (const auto& row : ctx.inference(RaterGroup::pathologist).rows) {
    if (row.is_nucleus) nuclei.insert(row.anchor_id);
  }
  std::vector<AnchorProposal> out;
  for (const auto& a : anchors) {
    if (nuclei.count(a.anchor_id)) out.push_back(a);
  }
  return out;
}

void run_agree(const Context& ctx) {
  const auto taxonomy = ctx.taxonomy();
  const auto corpus = ctx.corpus(taxonomy);
  const auto nuclei = nucleus_anchors(ctx, ctx.anchors(corpus));
  std::vector<MetricRecord> records;

  for (auto g : ctx.groups()) {
    std::vector<std::string> raters;
    for (const auto& p : corpus.participants()) {
      if (in_group(p.tier, g)) raters.push_back(p.id);
    }
    std::map<std::string, std::size_t, std::less<>> column;
    for (std::size_t r = 0; r < raters.size(); ++r) column[raters[r]] = r;

    // Classification agreement among detections: raters who did not mark
    // the nucleus are missing, not `undetected`.
    for (auto level : kLevels) {
      RatingTable table;
      for (const auto& a : nuclei) {
        std::vector<std::optional<std::string>> row(raters.size());
        for (const auto& id : a.members) {
          const auto& ann = corpus.annotation(id);
          auto it = column.find(ann.participant_id);
          if (it == column.end()) continue;
          row[it->second] = group_label(taxonomy.class_of(ann.raw_class), level, taxonomy);
        }
        table.push_back(std::move(row));
      }
      const std::string metric = fmt::format("alpha:{}", to_string(g));
      try {
        const double alpha = krippendorff_alpha(table);
        records.push_back({metric, std::string(scope_name(level)), alpha, {}, {}});
        fmt::print(ctx.log, "agree: {} {} = {} ({})\n", metric, scope_name(level),
                   format_double(alpha), to_string(agreement_band(alpha)));
      } catch (const DataError& e) {
        fmt::print(ctx.log, "agree: {} {} skipped: {}\n", metric, scope_name(level),
                   e.what());
      }

      if (level != GroupLevel::class_) continue;
      std::vector<double> kappas;
      for (std::size_t a = 0; a < raters.size(); ++a) {
        for (std::size_t b = a + 1; b < raters.size(); ++b) {
          std::vector<std::string> la, lb;
          for (const auto& row : table) {
            if (row[a] && row[b]) {
              la.push_back(*row[a]);
              lb.push_back(*row[b]);
            }
          }
          if (la.empty()) continue;
          const double k = cohen_kappa(la, lb);
          kappas.push_back(k);
          records.push_back({fmt::format("kappa:{}:{}", raters[a], raters[b]), "class",
                             k, {}, {}});
        }
      }
      if (!kappas.empty()) {
        records.push_back({fmt::format("kappa_mean:{}", to_string(g)), "class",
                           mean_sd(kappas).mean, {}, {}});
      }
    }
  }
  write_metric_report(ctx.artifact(ArtifactNames::agreement), records, ctx.header);
}

// One scored nucleus: P-truth label index and the evaluated labels.
struct Scored {
  std::size_t truth = 0;
  std::size_t predicted = 0;
  std::vector<double> scores;
};

struct Battery {
  std::vector<std::string> labels;
  std::vector<Scored> items;
};

Battery regroup(const Battery& b, GroupLevel level, const Taxonomy& taxonomy) {
  if (level == GroupLevel::class_) return b;
  Battery out;
  out.labels = taxonomy.level_labels(level, true);
  auto index = [&](std::size_t i) {
    const auto name = group_label(b.labels[i], level, taxonomy);
    return static_cast<std::size_t>(
        std::find(out.labels.begin(), out.labels.end(), name) - out.labels.begin());
  };
  for (const auto& s : b.items) {
    out.items.push_back({index(s.truth), index(s.predicted),
                         group_probabilities(s.scores, level, taxonomy)});
  }
  return out;
}

ConfusionMatrix confusion(const Battery& b, std::span<const std::size_t> idx) {
  ConfusionMatrix cm(b.labels);
  for (auto i : idx) cm.add(b.items[i].truth, b.items[i].predicted);
  return cm;
}

void add_with_ci(std::vector<MetricRecord>& records, const Context& ctx,
                 std::string metric, std::string_view scope, std::size_t n,
                 const ResampleMetric& fn, std::uint64_t stream) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const auto value = fn(all);
  if (!value) return;
  MetricRecord r{std::move(metric), std::string(scope), *value, {}, {}};
  BootstrapOptions options;
  options.resamples = static_cast<std::size_t>(ctx.config.evaluation.resamples);
  options.level = ctx.config.evaluation.level;
  options.seed = derive_seed(derive_seed(ctx.config.seed, kStreamBootstrap), stream);
  try {
    const auto ci = bootstrap_ci(n, fn, options);
    r.ci_low = ci.low;
    r.ci_high = ci.high;
  } catch (const DataError&) {
    // Interval left empty when resamples keep hitting undefined values.
  }
  records.push_back(std::move(r));
}

void battery_records(std::vector<MetricRecord>& records, const Context& ctx,
                     const Battery& b, std::string_view prefix, std::string_view scope,
                     std::uint64_t& stream) {
  const auto n = b.items.size();
  if (n == 0) return;
  add_with_ci(records, ctx, fmt::format("{}accuracy", prefix), scope, n,
              [&](std::span<const std::size_t> idx) -> std::optional<double> {
                return confusion(b, idx).accuracy();
              },
              stream++);
  add_with_ci(records, ctx, fmt::format("{}mcc", prefix), scope, n,
              [&](std::span<const std::size_t> idx) -> std::optional<double> {
                return mcc(confusion(b, idx));
              },
              stream++);
  for (auto mode : {Averaging::micro, Averaging::macro}) {
    add_with_ci(
        records, ctx,
        fmt::format("{}auroc_{}", prefix, mode == Averaging::micro ? "micro" : "macro"),
        scope, n,
        [&, mode](std::span<const std::size_t> idx) -> std::optional<double> {
          std::vector<std::vector<double>> scores;
          std::vector<std::size_t> truth;
          for (auto i : idx) {
            scores.push_back(b.items[i].scores);
            truth.push_back(b.items[i].truth);
          }
          try {
            return auroc(scores, truth, mode);
          } catch (const DataError&) {
            return std::nullopt;
          }
        },
        stream++);
  }
}

struct PredictionRow {
  ScoredDetection detection;
  std::string class_name;
};

std::vector<PredictionRow> read_predictions(const std::filesystem::path& path,
                                            const Corpus& corpus,
                                            const Taxonomy& taxonomy) {
  const auto t = read_csv(path, {"fov_id", "xmin", "ymin", "xmax", "ymax", "score", "class"});
  std::vector<PredictionRow> out;
  for (const auto& row : t.rows) {
    if (!corpus.has_fov(row.fields[0])) {
      throw DataError(fmt::format("{}:{}: unknown FOV '{}'", path.string(), row.line,
                                  row.fields[0]));
    }
    if (!taxonomy.class_index(row.fields[6])) {
      throw DataError(fmt::format("{}:{}: unknown class '{}'", path.string(), row.line,
                                  row.fields[6]));
    }
    BoundingBox box(parse_double(t, row, 1), parse_double(t, row, 2),
                    parse_double(t, row, 3), parse_double(t, row, 4));
    out.push_back({{row.fields[0], box, parse_double(t, row, 5)}, row.fields[6]});
  }
  return out;
}

void model_records(std::vector<MetricRecord>& records, const Context& ctx,
                   const Corpus& corpus, const Taxonomy& taxonomy,
                   const std::vector<AnchorProposal>& nuclei,
                   const std::map<std::string, std::string, std::less<>>& truth_class) {
  const auto tags = ctx.datasets(corpus);
  std::vector<PredictionRow> preds;
  for (auto& p : read_predictions(ctx.config.resolve(ctx.config.evaluation.predictions),
                                  corpus, taxonomy)) {
    if (tags.count(corpus.fov(p.detection.image).dataset)) preds.push_back(std::move(p));
  }
  std::vector<ScoredDetection> detections;
  for (const auto& p : preds) detections.push_back(p.detection);
  std::vector<TruthBox> truths;
  for (const auto& a : nuclei) truths.push_back({a.fov_id, a.medoid_box});
  records.push_back({"model_ap50", "overall", average_precision(detections, truths, 0.5), {}, {}});
  records.push_back({"model_map50_95", "overall", map_range(detections, truths), {}, {}});

  // Classification and segmentation accuracy over optimally matched pairs.
  std::map<std::string, std::vector<std::size_t>> pred_by_fov, truth_by_fov;
  for (std::size_t i = 0; i < preds.size(); ++i) pred_by_fov[preds[i].detection.image].push_back(i);
  for (std::size_t i = 0; i < nuclei.size(); ++i) truth_by_fov[nuclei[i].fov_id].push_back(i);
  std::vector<double> ious;
  std::vector<std::string> t_class, p_class;
  for (const auto& [fov, ti] : truth_by_fov) {
    auto it = pred_by_fov.find(fov);
    if (it == pred_by_fov.end()) continue;
    std::vector<BoundingBox> pb, tb;
    for (auto i : it->second) pb.push_back(preds[i].detection.box);
    for (auto i : ti) tb.push_back(nuclei[i].medoid_box);
    for (const auto& pair : match_detections(pb, tb, 0.5).pairs) {
      ious.push_back(pair.iou);
      p_class.push_back(preds[it->second[pair.prediction]].class_name);
      t_class.push_back(truth_class.at(nuclei[ti[pair.truth]].anchor_id));
    }
  }
  if (ious.empty()) return;
  std::sort(ious.begin(), ious.end());
  records.push_back({"model_matched_iou_median", "overall", quantile_sorted(ious, 0.5), {}, {}});
  for (auto level : kLevels) {
    std::vector<std::string> t, p;
    for (std::size_t i = 0; i < t_class.size(); ++i) {
      t.push_back(group_label(t_class[i], level, taxonomy));
      p.push_back(group_label(p_class[i], level, taxonomy));
    }
    const auto cm = ConfusionMatrix::from_pairs(t, p, taxonomy.level_labels(level, false));
    records.push_back({"model_accuracy", std::string(scope_name(level)), cm.accuracy(), {}, {}});
    records.push_back({"model_mcc", std::string(scope_name(level)), mcc(cm), {}, {}});
  }
}

void run_evaluate(const Context& ctx) {
  const auto taxonomy = ctx.taxonomy();
  const auto corpus = ctx.corpus(taxonomy);
  const auto nuclei = nucleus_anchors(ctx, ctx.anchors(corpus));
  const auto p_report = ctx.inference(RaterGroup::pathologist);
  const auto labels = taxonomy.inference_labels();
  if (p_report.labels != labels) {
    throw DataError("pathologist inference labels do not match the taxonomy");
  }
  auto label_index = [&](std::string_view name) {
    return static_cast<std::size_t>(std::find(labels.begin(), labels.end(), name) -
                                    labels.begin());
  };
  std::map<std::string, std::string, std::less<>> truth;
  for (const auto& row : p_report.rows) {
    if (row.is_nucleus) truth[row.anchor_id] = row.map_label;
  }

  std::vector<MetricRecord> records;
  std::uint64_t stream = 0;

  // Inferred NP labels against P-truth.
  if (std::filesystem::exists(ctx.artifact(ArtifactNames::inference(RaterGroup::np)))) {
    const auto np = ctx.inference(RaterGroup::np);
    if (np.labels != labels) throw DataError("NP inference labels do not match the taxonomy");
    Battery b{labels, {}};
    std::size_t detected = 0, called = 0, called_true = 0;
    for (const auto& row : np.rows) {
      auto it = truth.find(row.anchor_id);
      const bool says_nucleus = row.map_label != kUndetected;
      called += says_nucleus;
      called_true += says_nucleus && it != truth.end();
      if (it == truth.end()) continue;
      detected += says_nucleus;
      b.items.push_back({label_index(it->second), label_index(row.map_label), row.posterior});
    }
    if (!b.items.empty()) {
      records.push_back({"np_detection_recall", "overall",
                         static_cast<double>(detected) / static_cast<double>(b.items.size()),
                         {}, {}});
    }
    if (called > 0) {
      records.push_back({"np_detection_precision", "overall",
                         static_cast<double>(called_true) / static_cast<double>(called), {}, {}});
    }
    for (auto level : kLevels) {
      battery_records(records, ctx, regroup(b, level, taxonomy), "np_", scope_name(level),
                      stream);
    }
  }

  // Individual participants against P-truth, over the nuclei they marked.
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> marked;
  for (const auto& a : nuclei) {
    for (const auto& id : a.members) {
      const auto& ann = corpus.annotation(id);
      marked[ann.participant_id].emplace_back(truth.at(a.anchor_id),
                                              taxonomy.class_of(ann.raw_class));
    }
  }
  std::map<Tier, std::vector<double>> accuracy_by_tier;
  for (const auto& [pid, pairs] : marked) {
    for (auto level : kLevels) {
      std::vector<std::string> t, p;
      for (const auto& [tc, pc] : pairs) {
        t.push_back(group_label(tc, level, taxonomy));
        p.push_back(group_label(pc, level, taxonomy));
      }
      const auto cm = ConfusionMatrix::from_pairs(t, p, taxonomy.level_labels(level, false));
      const std::string scope(scope_name(level));
      records.push_back({fmt::format("participant_accuracy:{}", pid), scope, cm.accuracy(), {}, {}});
      records.push_back({fmt::format("participant_mcc:{}", pid), scope, mcc(cm), {}, {}});
      if (level == GroupLevel::class_) {
        accuracy_by_tier[corpus.participant(pid).tier].push_back(cm.accuracy());
      }
    }
  }
  std::vector<double> np_acc = accuracy_by_tier[Tier::NP], path_acc;
  for (auto tier : {Tier::JP, Tier::SP}) {
    path_acc.insert(path_acc.end(), accuracy_by_tier[tier].begin(), accuracy_by_tier[tier].end());
  }
  try {
    const auto test = mann_whitney_u(np_acc, path_acc);
    records.push_back({"mwu_u:participant_accuracy:np_vs_pathologist", "class", test.u, {}, {}});
    records.push_back({"mwu_p:participant_accuracy:np_vs_pathologist", "class", test.p_value, {}, {}});
  } catch (const DataError& e) {
    fmt::print(ctx.log, "evaluate: participant accuracy test skipped: {}\n", e.what());
  }

  if (!ctx.config.evaluation.predictions.empty()) {
    model_records(records, ctx, corpus, taxonomy, nuclei, truth);
  }
  write_metric_report(ctx.artifact(ArtifactNames::metrics), records, ctx.header);
  fmt::print(ctx.log, "evaluate: {} nuclei, {} metric records\n", nuclei.size(),
             records.size());
}

void run_simulate(const Context& ctx) {
  const auto taxonomy = ctx.taxonomy();
  const auto corpus = ctx.corpus(taxonomy);
  std::string dataset = ctx.config.simulation.dataset;
  if (dataset.empty()) {
    const auto tags = ctx.datasets(corpus);
    if (tags.size() != 1) {
      throw ConfigError("simulation.dataset is required when several datasets are in scope");
    }
    dataset = *tags.begin();
  } else if (!corpus.datasets().count(dataset)) {
    throw ConfigError(fmt::format("unknown dataset '{}'", dataset));
  }

  std::vector<AnchorProposal> anchors;
  for (auto& a : read_anchors(ctx.require(ArtifactNames::anchors, "anchors", "cluster"))) {
    if (corpus.has_fov(a.fov_id) && corpus.fov(a.fov_id).dataset == dataset) {
      anchors.push_back(std::move(a));
    }
  }
  std::set<std::string, std::less<>> in_scope;
  for (const auto& a : anchors) in_scope.insert(a.anchor_id);
  std::vector<InferredLabel> p_truth;
  for (auto& row : ctx.inference(RaterGroup::pathologist).rows) {
    if (row.is_nucleus && in_scope.count(row.anchor_id)) p_truth.push_back(std::move(row));
  }
  if (p_truth.empty()) throw DataError(fmt::format("no P-truth nuclei in dataset '{}'", dataset));

  const auto stage_seed = derive_seed(ctx.config.seed, kStreamSimulation);
  std::vector<RedundancyOutcome> outcomes;
  for (int k : ctx.config.simulation.k) {
    RedundancyConfig rc;
    rc.nps_total = ctx.config.simulation.nps_total;
    rc.nps_per_fov = k;
    rc.realizations = ctx.config.simulation.realizations;
    rc.seed = derive_seed(stage_seed, static_cast<std::uint64_t>(k));
    outcomes.push_back(simulate_redundancy(corpus, anchors, taxonomy, p_truth, rc, ctx.em()));
    fmt::print(ctx.log, "simulate: k={} mean accuracy {} sd {}\n", k,
               format_double(outcomes.back().overall.mean),
               format_double(outcomes.back().overall.sd));
  }
  write_simulation_report(ctx.artifact(ArtifactNames::simulation), outcomes, ctx.header);
}

void run_weights(const Context& ctx) {
  const auto taxonomy = ctx.taxonomy();
  const auto corpus = ctx.corpus(taxonomy);
  const auto tags = ctx.datasets(corpus);
  ClassFovCounts counts;
  counts.classes = taxonomy.classes();
  std::map<std::string, std::size_t, std::less<>> fov_col;
  std::vector<double> areas;
  for (const auto& f : corpus.fovs()) {
    if (!tags.count(f.dataset)) continue;
    fov_col[f.id] = counts.fovs.size();
    counts.fovs.push_back(f.id);
    areas.push_back(f.area());
  }
  counts.counts.assign(counts.classes.size(), std::vector<double>(counts.fovs.size(), 0.0));
  for (const auto& a : corpus.annotations()) {
    auto it = fov_col.find(a.fov_id);
    if (it == fov_col.end()) continue;
    counts.counts[*taxonomy.class_index(taxonomy.class_of(a.raw_class))][it->second] += 1.0;
  }
  const auto wc = class_weights(counts);
  for (const auto& w : wc.warnings) fmt::print(ctx.log, "weights: warning: {}\n", w);
  const auto wf = fov_weights(counts, areas, wc);

  {
    std::ofstream out;
    auto path = ctx.artifact(ArtifactNames::class_weights);
    out.open(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    out << ctx.header.line() << "\nclass,weight\n";
    for (std::size_t c = 0; c < wc.classes.size(); ++c) {
      fmt::print(out, "{},{}\n", wc.classes[c], format_double(wc.weights[c]));
    }
  }
  auto path = ctx.artifact(ArtifactNames::fov_weights);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << ctx.header.line() << "\nfov_id,weight\n";
  for (std::size_t f = 0; f < counts.fovs.size(); ++f) {
    fmt::print(out, "{},{}\n", counts.fovs[f], format_double(wf[f]));
  }
  fmt::print(ctx.log, "weights: {} classes, {} FOVs\n", wc.classes.size(), counts.fovs.size());
}

void run_dtale(const Context& ctx) {
  if (ctx.config.dtale.input.empty()) throw ConfigError("dtale.input is not set");
  const auto input = read_dtale_input(ctx.config.resolve(ctx.config.dtale.input));
  DtaleOptions options;
  options.max_depth = ctx.config.dtale.max_depth;
  options.min_leaf = ctx.config.dtale.min_leaf;
  const auto tree = fit_tree(input, options);
  const auto stats = node_stats(tree, input);
  write_dtale_tree(ctx.artifact(ArtifactNames::dtale_tree), tree, ctx.header);
  write_dtale_stats(ctx.artifact(ArtifactNames::dtale_stats), stats, ctx.header);
  write_dtale_explanations(ctx.artifact(ArtifactNames::dtale_explanations),
                           explain(tree, stats, ExplainMode::representative),
                           explain(tree, stats, ExplainMode::discriminative), ctx.header);
  fmt::print(ctx.log, "dtale: {} nodes, depth {}\n", tree.nodes().size(), tree.depth());
}

}  // namespace

std::string_view to_string(Command command) {
  for (const auto& [c, name] : kCommands) {
    if (c == command) return name;
  }
  return "?";
}

Command parse_command(std::string_view name) {
  for (const auto& [c, n] : kCommands) {
    if (n == name) return c;
  }
  throw ConfigError(fmt::format("unknown command '{}'", name));
}

std::string ArtifactNames::inference(RaterGroup group) {
  return fmt::format("inference_{}.csv", to_string(group));
}

std::string ArtifactNames::raters(RaterGroup group) {
  return fmt::format("raters_{}.csv", to_string(group));
}

PipelineConfig PipelineConfig::parse(std::string_view json_text,
                                     const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("invalid JSON: {}", e.what()));
  }
  check_keys(j, "config",
             {"corpus", "taxonomy", "out", "datasets", "iou_threshold", "tier", "em",
              "simulation", "dtale", "evaluation", "seed"});
  PipelineConfig c;
  c.base_dir = base_dir;
  read_key(j, "corpus", c.corpus);
  read_key(j, "taxonomy", c.taxonomy);
  read_key(j, "out", c.out);
  read_key(j, "datasets", c.datasets);
  read_key(j, "iou_threshold", c.iou_threshold);
  read_key(j, "tier", c.tier);
  read_key(j, "seed", c.seed);
  if (auto it = j.find("em"); it != j.end()) {
    check_keys(*it, "em", {"init_quality", "iterations", "tolerance"});
    read_key(*it, "init_quality", c.em.init_quality);
    read_key(*it, "iterations", c.em.iterations);
    read_key(*it, "tolerance", c.em.tolerance);
  }
  if (auto it = j.find("simulation"); it != j.end()) {
    check_keys(*it, "simulation", {"dataset", "nps_total", "k", "realizations"});
    read_key(*it, "dataset", c.simulation.dataset);
    read_key(*it, "nps_total", c.simulation.nps_total);
    read_key(*it, "k", c.simulation.k);
    read_key(*it, "realizations", c.simulation.realizations);
  }
  if (auto it = j.find("dtale"); it != j.end()) {
    check_keys(*it, "dtale", {"input", "max_depth", "min_leaf"});
    read_key(*it, "input", c.dtale.input);
    read_key(*it, "max_depth", c.dtale.max_depth);
    read_key(*it, "min_leaf", c.dtale.min_leaf);
  }
  if (auto it = j.find("evaluation"); it != j.end()) {
    check_keys(*it, "evaluation", {"predictions", "resamples", "level"});
    read_key(*it, "predictions", c.evaluation.predictions);
    read_key(*it, "resamples", c.evaluation.resamples);
    read_key(*it, "level", c.evaluation.level);
  }
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot read config {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  auto base = path.parent_path();
  return parse(buffer.str(), base.empty() ? std::filesystem::path(".") : base);
}

std::string PipelineConfig::canonical() const {
  json j{
      {"corpus", corpus},
      {"taxonomy", taxonomy},
      {"out", out},
      {"datasets", datasets},
      {"iou_threshold", iou_threshold},
      {"tier", tier ? json(*tier) : json(nullptr)},
      {"seed", seed},
      {"em",
       {{"init_quality", em.init_quality},
        {"iterations", em.iterations},
        {"tolerance", em.tolerance ? json(*em.tolerance) : json(nullptr)}}},
      {"simulation",
       {{"dataset", simulation.dataset},
        {"nps_total", simulation.nps_total},
        {"k", simulation.k},
        {"realizations", simulation.realizations}}},
      {"dtale",
       {{"input", dtale.input},
        {"max_depth", dtale.max_depth},
        {"min_leaf", dtale.min_leaf}}},
      {"evaluation",
       {{"predictions", evaluation.predictions},
        {"resamples", evaluation.resamples},
        {"level", evaluation.level}}},
  };
  return j.dump();
}

std::string PipelineConfig::hash() const { return fnv1a64_hex(canonical()); }

void PipelineConfig::validate() const {
  ClusterParams{iou_threshold}.validate();
  if (tier) parse_rater_group(*tier);
  if (em.iterations < 1) throw ConfigError("em.iterations must be >= 1");
  if (!(em.init_quality > 0.0 && em.init_quality < 1.0)) {
    throw ConfigError("em.init_quality must lie in (0, 1)");
  }
  if (em.tolerance && !(*em.tolerance >= 0.0)) {
    throw ConfigError("em.tolerance must be >= 0");
  }
  if (simulation.k.empty()) throw ConfigError("simulation.k must list at least one value");
  for (int k : simulation.k) {
    RedundancyConfig rc;
    rc.nps_total = simulation.nps_total;
    rc.nps_per_fov = k;
    rc.realizations = simulation.realizations;
    rc.validate();
  }
  DtaleOptions d;
  d.max_depth = dtale.max_depth;
  d.min_leaf = dtale.min_leaf;
  d.validate();
  if (evaluation.resamples < 100) throw ConfigError("evaluation.resamples must be >= 100");
  if (!(evaluation.level > 0.0 && evaluation.level < 1.0)) {
    throw ConfigError("evaluation.level must lie in (0, 1)");
  }
  if (out.empty()) throw ConfigError("out must not be empty");
}

std::filesystem::path PipelineConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

int execute(Command command, const PipelineConfig& config, std::ostream& log,
            std::ostream& err) {
  try {
    config.validate();
    Context ctx{config, log, {ANNOTRUTH_VERSION, config.hash()}, config.out_dir()};
    std::filesystem::create_directories(ctx.out);
    switch (command) {
      case Command::cluster: run_cluster(ctx); break;
      case Command::infer: run_infer(ctx); break;
      case Command::agree: run_agree(ctx); break;
      case Command::evaluate: run_evaluate(ctx); break;
      case Command::simulate: run_simulate(ctx); break;
      case Command::weights: run_weights(ctx); break;
      case Command::dtale: run_dtale(ctx); break;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << error_record("config", e.what()) << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << error_record("data", e.what()) << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << error_record("data", e.what()) << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << error_record("internal", e.what()) << '\n';
    return kExitInternal;
  }
}

}  // namespace annotruth
