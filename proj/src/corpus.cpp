#include "annotruth/corpus.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "annotruth/csv.hpp"
#include "annotruth/error.hpp"

namespace annotruth {

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::NP: return "NP";
    case Tier::JP: return "JP";
    case Tier::SP: return "SP";
  }
  return "?";
}

std::string_view to_string(AnnotationKind kind) {
  return kind == AnnotationKind::box ? "box" : "click";
}

Tier parse_tier(std::string_view text) {
  if (text == "NP") return Tier::NP;
  if (text == "JP") return Tier::JP;
  if (text == "SP") return Tier::SP;
  throw DataError(fmt::format("unknown participant tier '{}'", text));
}

bool is_pathologist(Tier tier) { return tier != Tier::NP; }

namespace {

template <typename T>
std::map<std::string, std::size_t, std::less<>> index_by_id(
    std::vector<T>& items, std::string_view what) {
  std::sort(items.begin(), items.end(),
            [](const T& a, const T& b) { return a.id < b.id; });
  std::map<std::string, std::size_t, std::less<>> index;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].id.empty()) throw DataError(fmt::format("{} with empty id", what));
    if (!index.emplace(items[i].id, i).second) {
      throw DataError(fmt::format("duplicate {} id '{}'", what, items[i].id));
    }
  }
  return index;
}

template <typename T>
const T& lookup(const std::vector<T>& items,
                const std::map<std::string, std::size_t, std::less<>>& index,
                std::string_view id, std::string_view what) {
  auto it = index.find(id);
  if (it == index.end()) throw DataError(fmt::format("unknown {} '{}'", what, id));
  return items[it->second];
}

std::vector<Point> parse_polygon(const CsvTable& t, const CsvRow& row,
                                 std::size_t col) {
  std::vector<Point> out;
  const std::string& text = row.fields[col];
  if (text.empty()) return out;
  for (const auto& vertex : split_fields(text, ';')) {
    const CsvRow xy{row.line, split_fields(vertex, ' ')};
    if (xy.fields.size() != 2) {
      throw DataError(fmt::format("{}:{}: malformed polygon vertex '{}'",
                                  t.source.string(), row.line, vertex));
    }
    const CsvTable vertex_table{t.source, {"polygon.x", "polygon.y"}, {}};
    out.push_back({parse_double(vertex_table, xy, 0),
                   parse_double(vertex_table, xy, 1)});
  }
  if (out.size() < 3) {
    throw DataError(fmt::format("{}:{}: polygon needs at least 3 vertices",
                                t.source.string(), row.line));
  }
  return out;
}

std::string polygon_text(const std::vector<Point>& polygon) {
  std::vector<std::string> parts;
  for (const auto& p : polygon) {
    parts.push_back(format_double(p.x) + " " + format_double(p.y));
  }
  return join(parts, ";");
}

BoundingBox parse_box(const CsvTable& t, const CsvRow& row, std::size_t first) {
  const double x0 = parse_double(t, row, first);
  const double y0 = parse_double(t, row, first + 1);
  const double x1 = parse_double(t, row, first + 2);
  const double y1 = parse_double(t, row, first + 3);
  try {
    return BoundingBox(x0, y0, x1, y1);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}:{}: {}", t.source.string(), row.line, e.what()));
  }
}

}  // namespace

Corpus Corpus::build(std::vector<Annotation> annotations,
                     std::vector<Participant> participants,
                     std::vector<Suggestion> suggestions, std::vector<Fov> fovs,
                     const Taxonomy& taxonomy) {
  Corpus c;
  c.fovs_ = std::move(fovs);
  c.participants_ = std::move(participants);
  c.suggestions_ = std::move(suggestions);
  c.fov_index_ = index_by_id(c.fovs_, "fov");
  c.participant_index_ = index_by_id(c.participants_, "participant");
  c.suggestion_index_ = index_by_id(c.suggestions_, "suggestion");

  for (const auto& f : c.fovs_) {
    if (!(f.width > 0.0) || !(f.height > 0.0)) {
      throw DataError(fmt::format("fov '{}' has non-positive size", f.id));
    }
  }
  for (const auto& s : c.suggestions_) {
    if (!c.fov_index_.contains(s.fov_id)) {
      throw DataError(fmt::format("suggestion '{}' references unknown fov '{}'",
                                  s.id, s.fov_id));
    }
  }
  for (auto& p : c.participants_) p.fovs_annotated.clear();

  c.annotations_ = std::move(annotations);
  for (std::size_t i = 0; i < c.annotations_.size(); ++i) {
    Annotation& a = c.annotations_[i];
    if (a.id.empty()) throw DataError("annotation with empty id");
    if (!c.annotation_index_.emplace(a.id, i).second) {
      throw DataError(fmt::format("duplicate annotation id '{}'", a.id));
    }
    if (!c.fov_index_.contains(a.fov_id)) {
      throw DataError(fmt::format("annotation '{}' references unknown fov '{}'",
                                  a.id, a.fov_id));
    }
    auto pit = c.participant_index_.find(a.participant_id);
    if (pit == c.participant_index_.end()) {
      throw DataError(
          fmt::format("annotation '{}' references unknown participant '{}'",
                      a.id, a.participant_id));
    }
    if (!taxonomy.has_raw(a.raw_class)) {
      throw DataError(fmt::format("annotation '{}': unknown raw class '{}'", a.id,
                                  a.raw_class));
    }
    if (a.kind == AnnotationKind::click) {
      if (!a.suggestion_id || !a.click_point) {
        throw DataError(fmt::format(
            "click annotation '{}' needs a click point and a suggestion", a.id));
      }
      auto sit = c.suggestion_index_.find(*a.suggestion_id);
      if (sit == c.suggestion_index_.end()) {
        throw DataError(
            fmt::format("click annotation '{}' references unknown suggestion '{}'",
                        a.id, *a.suggestion_id));
      }
      const Suggestion& s = c.suggestions_[sit->second];
      if (s.fov_id != a.fov_id) {
        throw DataError(fmt::format(
            "click annotation '{}' and suggestion '{}' lie in different fovs",
            a.id, s.id));
      }
      a.box = s.box;
    } else if (a.suggestion_id || a.click_point) {
      throw DataError(fmt::format(
          "box annotation '{}' must not carry click or suggestion fields", a.id));
    }
    c.participants_[pit->second].fovs_annotated.insert(a.fov_id);
  }
  return c;
}

const Annotation& Corpus::annotation(std::string_view id) const {
  return lookup(annotations_, annotation_index_, id, "annotation");
}
const Participant& Corpus::participant(std::string_view id) const {
  return lookup(participants_, participant_index_, id, "participant");
}
const Fov& Corpus::fov(std::string_view id) const {
  return lookup(fovs_, fov_index_, id, "fov");
}
const Suggestion& Corpus::suggestion(std::string_view id) const {
  return lookup(suggestions_, suggestion_index_, id, "suggestion");
}
bool Corpus::has_fov(std::string_view id) const { return fov_index_.contains(id); }

std::set<std::string> Corpus::datasets() const {
  std::set<std::string> out;
  for (const auto& f : fovs_) out.insert(f.dataset);
  return out;
}

bool operator==(const Corpus& a, const Corpus& b) {
  auto same_annotation = [](const Annotation& x, const Annotation& y) {
    return x.id == y.id && x.fov_id == y.fov_id &&
           x.participant_id == y.participant_id && x.kind == y.kind &&
           x.box == y.box && x.click_point == y.click_point &&
           x.suggestion_id == y.suggestion_id && x.raw_class == y.raw_class;
  };
  auto same_participant = [](const Participant& x, const Participant& y) {
    return x.id == y.id && x.tier == y.tier && x.fovs_annotated == y.fovs_annotated;
  };
  auto same_suggestion = [](const Suggestion& x, const Suggestion& y) {
    return x.id == y.id && x.fov_id == y.fov_id && x.box == y.box &&
           x.polygon == y.polygon;
  };
  auto same_fov = [](const Fov& x, const Fov& y) {
    return x.id == y.id && x.dataset == y.dataset && x.width == y.width &&
           x.height == y.height;
  };
  return std::equal(a.annotations_.begin(), a.annotations_.end(),
                    b.annotations_.begin(), b.annotations_.end(), same_annotation) &&
         std::equal(a.participants_.begin(), a.participants_.end(),
                    b.participants_.begin(), b.participants_.end(),
                    same_participant) &&
         std::equal(a.suggestions_.begin(), a.suggestions_.end(),
                    b.suggestions_.begin(), b.suggestions_.end(),
                    same_suggestion) &&
         std::equal(a.fovs_.begin(), a.fovs_.end(), b.fovs_.begin(),
                    b.fovs_.end(), same_fov);
}

Corpus load_corpus(const std::filesystem::path& dir, const Taxonomy& taxonomy) {
  std::vector<Fov> fovs;
  {
    const auto t = read_csv(dir / CorpusFiles::fovs,
                            {"fov_id", "dataset", "width", "height"});
    for (const auto& row : t.rows) {
      fovs.push_back({row.fields[0], row.fields[1], parse_double(t, row, 2),
                      parse_double(t, row, 3)});
    }
  }

  std::vector<Participant> participants;
  {
    const auto t = read_csv(dir / CorpusFiles::participants,
                            {"participant_id", "tier"});
    for (const auto& row : t.rows) {
      try {
        participants.push_back({row.fields[0], parse_tier(row.fields[1]), {}});
      } catch (const DataError& e) {
        throw DataError(fmt::format("{}:{}: {}", t.source.string(), row.line, e.what()));
      }
    }
  }

  std::vector<Suggestion> suggestions;
  if (std::filesystem::exists(dir / CorpusFiles::suggestions)) {
    const auto t = read_csv(dir / CorpusFiles::suggestions,
                            {"suggestion_id", "fov_id", "xmin", "ymin", "xmax",
                             "ymax", "polygon"});
    for (const auto& row : t.rows) {
      suggestions.push_back({row.fields[0], row.fields[1], parse_box(t, row, 2),
                             parse_polygon(t, row, 6)});
    }
  }

  std::vector<Annotation> annotations;
  const auto t = read_csv(dir / CorpusFiles::annotations,
                          {"id", "fov_id", "participant_id", "kind", "raw_class",
                           "xmin", "ymin", "xmax", "ymax", "click_x", "click_y",
                           "suggestion_id"});
  for (const auto& row : t.rows) {
    Annotation a;
    a.id = row.fields[0];
    a.fov_id = row.fields[1];
    a.participant_id = row.fields[2];
    a.raw_class = row.fields[4];
    const std::string& kind = row.fields[3];
    if (kind == "box") {
      a.kind = AnnotationKind::box;
      a.box = parse_box(t, row, 5);
      if (!row.fields[9].empty() || !row.fields[10].empty() ||
          !row.fields[11].empty()) {
        throw DataError(fmt::format("{}:{}: box record carries click fields",
                                    t.source.string(), row.line));
      }
    } else if (kind == "click") {
      a.kind = AnnotationKind::click;
      for (std::size_t col = 5; col < 9; ++col) {
        if (!row.fields[col].empty()) {
          throw DataError(fmt::format(
              "{}:{}: click record must leave box columns empty",
              t.source.string(), row.line));
        }
      }
      a.click_point = Point{parse_double(t, row, 9), parse_double(t, row, 10)};
      if (row.fields[11].empty()) {
        throw DataError(fmt::format("{}:{}: click record without suggestion_id",
                                    t.source.string(), row.line));
      }
      a.suggestion_id = row.fields[11];
    } else {
      throw DataError(fmt::format("{}:{}: unknown annotation kind '{}'",
                                  t.source.string(), row.line, kind));
    }
    annotations.push_back(std::move(a));
  }

  try {
    return Corpus::build(std::move(annotations), std::move(participants),
                         std::move(suggestions), std::move(fovs), taxonomy);
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", dir.string(), e.what()));
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](std::string_view name) {
    std::ofstream out(dir / name);
    if (!out) throw DataError(fmt::format("cannot write {}", (dir / name).string()));
    return out;
  };
  {
    auto out = open(CorpusFiles::fovs);
    out << "fov_id,dataset,width,height\n";
    for (const auto& f : corpus.fovs()) {
      fmt::print(out, "{},{},{},{}\n", f.id, f.dataset, format_double(f.width),
                 format_double(f.height));
    }
  }
  {
    auto out = open(CorpusFiles::participants);
    out << "participant_id,tier\n";
    for (const auto& p : corpus.participants()) {
      fmt::print(out, "{},{}\n", p.id, to_string(p.tier));
    }
  }
  {
    auto out = open(CorpusFiles::suggestions);
    out << "suggestion_id,fov_id,xmin,ymin,xmax,ymax,polygon\n";
    for (const auto& s : corpus.suggestions()) {
      fmt::print(out, "{},{},{},{},{},{},{}\n", s.id, s.fov_id,
                 format_double(s.box.xmin()), format_double(s.box.ymin()),
                 format_double(s.box.xmax()), format_double(s.box.ymax()),
                 polygon_text(s.polygon));
    }
  }
  auto out = open(CorpusFiles::annotations);
  out << "id,fov_id,participant_id,kind,raw_class,xmin,ymin,xmax,ymax,click_x,"
         "click_y,suggestion_id\n";
  for (const auto& a : corpus.annotations()) {
    if (a.kind == AnnotationKind::box) {
      fmt::print(out, "{},{},{},box,{},{},{},{},{},,,\n", a.id, a.fov_id,
                 a.participant_id, a.raw_class, format_double(a.box.xmin()),
                 format_double(a.box.ymin()), format_double(a.box.xmax()),
                 format_double(a.box.ymax()));
    } else {
      fmt::print(out, "{},{},{},click,{},,,,,{},{},{}\n", a.id, a.fov_id,
                 a.participant_id, a.raw_class, format_double(a.click_point->x),
                 format_double(a.click_point->y), *a.suggestion_id);
    }
  }
}

}  // namespace annotruth
