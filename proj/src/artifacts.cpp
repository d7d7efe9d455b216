#include "annotruth/artifacts.hpp"

#include <fstream>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "annotruth/csv.hpp"
#include "annotruth/error.hpp"

namespace annotruth {

std::string ArtifactHeader::line() const {
  return fmt::format("# annotruth {} config={}", version, config_hash);
}

namespace {

std::ofstream open_artifact(const std::filesystem::path& path,
                            const ArtifactHeader& header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << header.line() << '\n';
  return out;
}

std::string optional_number(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

void write_anchors(const std::filesystem::path& path,
                   const std::vector<AnchorProposal>& anchors,
                   const ArtifactHeader& header) {
  auto out = open_artifact(path, header);
  out << "anchor_id,fov_id,xmin,ymin,xmax,ymax,medoid,members\n";
  for (const auto& a : anchors) {
    fmt::print(out, "{},{},{},{},{},{},{},{}\n", a.anchor_id, a.fov_id,
               format_double(a.medoid_box.xmin()), format_double(a.medoid_box.ymin()),
               format_double(a.medoid_box.xmax()), format_double(a.medoid_box.ymax()),
               a.medoid, join(a.members, ";"));
  }
}

std::vector<AnchorProposal> read_anchors(const std::filesystem::path& path) {
  const auto t = read_csv(path, {"anchor_id", "fov_id", "xmin", "ymin", "xmax",
                                 "ymax", "medoid", "members"});
  std::vector<AnchorProposal> out;
  for (const auto& row : t.rows) {
    const double x0 = parse_double(t, row, 2), y0 = parse_double(t, row, 3);
    const double x1 = parse_double(t, row, 4), y1 = parse_double(t, row, 5);
    auto members = split_fields(row.fields[7], ';');
    if (members.size() < 2) {
      throw DataError(fmt::format("{}:{}: anchor needs at least two members",
                                  path.string(), row.line));
    }
    out.push_back({row.fields[0], row.fields[1], std::move(members), row.fields[6],
                   BoundingBox(x0, y0, x1, y1)});
  }
  return out;
}

void write_singletons(const std::filesystem::path& path,
                      const std::vector<std::string>& ids,
                      const ArtifactHeader& header) {
  auto out = open_artifact(path, header);
  out << "annotation_id\n";
  for (const auto& id : ids) out << id << '\n';
}

void write_inference_report(const std::filesystem::path& path,
                            const InferenceReport& report,
                            const ArtifactHeader& header) {
  auto out = open_artifact(path, header);
  out << "anchor_id,is_nucleus,map_label";
  for (const auto& label : report.labels) out << ",p_" << label;
  out << ",boundary_posterior\n";
  for (const auto& row : report.rows) {
    if (row.posterior.size() != report.labels.size()) {
      throw DataError("posterior width does not match the report labels");
    }
    fmt::print(out, "{},{},{}", row.anchor_id, row.is_nucleus ? 1 : 0, row.map_label);
    for (double p : row.posterior) out << ',' << format_double(p);
    out << ',' << optional_number(row.boundary_correct_posterior) << '\n';
  }
}

InferenceReport read_inference_report(const std::filesystem::path& path) {
  const auto t = read_csv(path, {}, HeaderPolicy::any);
  const auto& h = t.header;
  if (h.size() < 5 || h[0] != "anchor_id" || h[1] != "is_nucleus" ||
      h[2] != "map_label" || h.back() != "boundary_posterior") {
    throw DataError(fmt::format("{}: not an inference report", path.string()));
  }
  InferenceReport report;
  for (std::size_t c = 3; c + 1 < h.size(); ++c) {
    if (h[c].rfind("p_", 0) != 0) {
      throw DataError(fmt::format("{}: unexpected column '{}'", path.string(), h[c]));
    }
    report.labels.push_back(h[c].substr(2));
  }
  for (const auto& row : t.rows) {
    InferredLabel label;
    label.anchor_id = row.fields[0];
    label.is_nucleus = parse_int(t, row, 1) != 0;
    label.map_label = row.fields[2];
    for (std::size_t c = 3; c + 1 < h.size(); ++c) {
      label.posterior.push_back(parse_double(t, row, c));
    }
    if (!row.fields.back().empty()) {
      label.boundary_correct_posterior = parse_double(t, row, h.size() - 1);
    }
    report.rows.push_back(std::move(label));
  }
  return report;
}

void write_rater_report(const std::filesystem::path& path,
                        const std::vector<std::string>& labels,
                        const std::vector<RaterRecord>& raters,
                        const ArtifactHeader& header) {
  auto out = open_artifact(path, header);
  out << "# labels: " << join(labels, ";") << '\n';
  out << "dataset,participant_id,tier,quality,confusion\n";
  for (const auto& r : raters) {
    std::vector<std::string> rows;
    for (const auto& row : r.model.confusion) {
      std::vector<std::string> cells;
      for (double v : row) cells.push_back(format_double(v));
      rows.push_back(join(cells, ";"));
    }
    fmt::print(out, "{},{},{},{},{}\n", r.dataset, r.participant_id,
               to_string(r.tier), format_double(r.model.quality), join(rows, "|"));
  }
}

void write_metric_report(const std::filesystem::path& path,
                         const std::vector<MetricRecord>& records,
                         const ArtifactHeader& header) {
  auto out = open_artifact(path, header);
  out << "metric,scope,value,ci_low,ci_high\n";
  for (const auto& r : records) {
    fmt::print(out, "{},{},{},{},{}\n", r.metric, r.scope, format_double(r.value),
               optional_number(r.ci_low), optional_number(r.ci_high));
  }
}

std::vector<MetricRecord> read_metric_report(const std::filesystem::path& path) {
  const auto t = read_csv(path, {"metric", "scope", "value", "ci_low", "ci_high"});
  std::vector<MetricRecord> out;
  for (const auto& row : t.rows) {
    MetricRecord r{row.fields[0], row.fields[1], parse_double(t, row, 2), {}, {}};
    if (!row.fields[3].empty()) r.ci_low = parse_double(t, row, 3);
    if (!row.fields[4].empty()) r.ci_high = parse_double(t, row, 4);
    out.push_back(std::move(r));
  }
  return out;
}

void write_simulation_report(const std::filesystem::path& path,
                             const std::vector<RedundancyOutcome>& outcomes,
                             const ArtifactHeader& header) {
  auto out = open_artifact(path, header);
  out << "k,realization_count,class,mean_accuracy,sd\n";
  for (const auto& o : outcomes) {
    fmt::print(out, "{},{},overall,{},{}\n", o.k, o.realizations,
               format_double(o.overall.mean), format_double(o.overall.sd));
    for (const auto& [cls, stat] : o.per_class) {
      fmt::print(out, "{},{},{},{},{}\n", o.k, o.realizations, cls,
                 format_double(stat.mean), format_double(stat.sd));
    }
  }
}

DtaleInput read_dtale_input(const std::filesystem::path& path) {
  const auto t = read_csv(path, {}, HeaderPolicy::any);
  const auto& h = t.header;
  if (h.size() < 5 || h[0] != "nucleus_id" || h[1] != "emb_x" || h[2] != "emb_y" ||
      h[3] != "model_class") {
    throw DataError(fmt::format(
        "{}: header must start with nucleus_id,emb_x,emb_y,model_class and name "
        "at least one feature",
        path.string()));
  }
  DtaleInput input;
  input.feature_names.assign(h.begin() + 4, h.end());
  for (const auto& row : t.rows) {
    DtaleRow r;
    r.id = row.fields[0];
    r.embedding = {parse_double(t, row, 1), parse_double(t, row, 2)};
    r.model_class = row.fields[3];
    for (std::size_t c = 4; c < h.size(); ++c) r.features.push_back(parse_double(t, row, c));
    input.rows.push_back(std::move(r));
  }
  input.validate();
  return input;
}

void write_dtale_input(const std::filesystem::path& path, const DtaleInput& input) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << "nucleus_id,emb_x,emb_y,model_class";
  for (const auto& f : input.feature_names) out << ',' << f;
  out << '\n';
  for (const auto& r : input.rows) {
    fmt::print(out, "{},{},{},{}", r.id, format_double(r.embedding[0]),
               format_double(r.embedding[1]), r.model_class);
    for (double v : r.features) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_dtale_tree(const std::filesystem::path& path, const DtaleTree& tree,
                      const ArtifactHeader& header) {
  auto out = open_artifact(path, header);
  // Preorder ids make a plain scan a depth-first listing.
  for (const auto& n : tree.nodes()) {
    const std::string indent(static_cast<std::size_t>(n.depth) * 2, ' ');
    if (n.is_leaf()) {
      fmt::print(out, "{}node {} n={} sse={} leaf mean=({}, {})\n", indent, n.id,
                 n.members.size(), format_double(n.sse), format_double(n.mean[0]),
                 format_double(n.mean[1]));
    } else {
      fmt::print(out, "{}node {} n={} sse={} split {} <= {} left={} right={}\n",
                 indent, n.id, n.members.size(), format_double(n.sse),
                 tree.feature_names()[*n.feature], format_double(n.threshold), n.left,
                 n.right);
    }
  }
}

void write_dtale_stats(const std::filesystem::path& path, const NodeStats& stats,
                       const ArtifactHeader& header) {
  auto out = open_artifact(path, header);
  out << "node_id,class,precision,recall,f1\n";
  for (std::size_t n = 0; n < stats.table.size(); ++n) {
    for (std::size_t c = 0; c < stats.classes.size(); ++c) {
      const auto& s = stats.table[n][c];
      fmt::print(out, "{},{},{},{},{}\n", n, stats.classes[c], format_double(s.precision),
                 format_double(s.recall), format_double(s.f1));
    }
  }
}

void write_dtale_explanations(
    const std::filesystem::path& path,
    const std::map<std::string, Explanation>& representative,
    const std::map<std::string, Explanation>& discriminative,
    const ArtifactHeader& header) {
  auto out = open_artifact(path, header);
  out << "mode,class,node_id,precision,recall,f1,path\n";
  auto emit = [&](std::string_view mode, const std::map<std::string, Explanation>& m) {
    for (const auto& [cls, e] : m) {
      fmt::print(out, "{},{},{},{},{},{},{}\n", mode, cls, e.node,
                 format_double(e.stats.precision), format_double(e.stats.recall),
                 format_double(e.stats.f1), format_path(e.path));
    }
  };
  emit("representative", representative);
  emit("discriminative", discriminative);
}

}  // namespace annotruth
