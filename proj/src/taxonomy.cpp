#include "annotruth/taxonomy.hpp"

#include <fstream>

#include <fmt/core.h>
#include <fmt/ostream.h>

#include "annotruth/csv.hpp"
#include "annotruth/error.hpp"

namespace annotruth {

Taxonomy::Taxonomy(std::vector<Entry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw DataError("taxonomy has no entries");
  std::map<std::string, std::string, std::less<>> class_super;
  for (const auto& e : entries_) {
    if (e.raw.empty() || e.class_name.empty() || e.super_class.empty()) {
      throw DataError("taxonomy entry with empty token");
    }
    if (e.raw == kUndetected || e.class_name == kUndetected ||
        e.super_class == kUndetected) {
      throw DataError("`undetected` is reserved and cannot appear in a taxonomy");
    }
    if (raw_index_.contains(e.raw)) {
      throw DataError(fmt::format("raw class '{}' listed twice in taxonomy", e.raw));
    }
    raw_index_.emplace(e.raw, raw_.size());
    raw_.push_back(e.raw);

    if (auto it = class_super.find(e.class_name); it != class_super.end()) {
      if (it->second != e.super_class) {
        throw DataError(fmt::format(
            "class '{}' maps to two super-classes ('{}' and '{}')", e.class_name,
            it->second, e.super_class));
      }
    } else {
      class_super.emplace(e.class_name, e.super_class);
      class_index_.emplace(e.class_name, classes_.size());
      classes_.push_back(e.class_name);
      if (!super_index_.contains(e.super_class)) {
        super_index_.emplace(e.super_class, supers_.size());
        supers_.push_back(e.super_class);
      }
      super_of_class_.push_back(super_index_.at(e.super_class));
    }
  }
}

Taxonomy Taxonomy::default_taxonomy() {
  return Taxonomy({
      {"tumor", "tumor", "tumor"},
      {"mitotic_figure", "mitotic_figure", "tumor"},
      {"fibroblast", "fibroblast", "stromal"},
      {"macrophage", "macrophage", "stromal"},
      {"lymphocyte", "lymphocyte", "sTILs"},
      {"plasma_cell", "plasma_cell", "sTILs"},
      {"other", "other", "other"},
      {"ambiguous", "ambiguous", "ambiguous"},
      {"unlabeled", "ambiguous", "ambiguous"},
  });
}

Taxonomy Taxonomy::load(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path, {"raw", "class", "super_class"},
                                  HeaderPolicy::optional);
  std::vector<Entry> entries;
  entries.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    entries.push_back({row.fields[0], row.fields[1], row.fields[2]});
  }
  try {
    return Taxonomy(std::move(entries));
  } catch (const DataError& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void Taxonomy::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << "raw,class,super_class\n";
  for (const auto& e : entries_) {
    fmt::print(out, "{},{},{}\n", e.raw, e.class_name, e.super_class);
  }
}

bool Taxonomy::has_raw(std::string_view raw) const {
  return raw_index_.contains(raw);
}

const std::string& Taxonomy::class_of(std::string_view raw) const {
  auto it = raw_index_.find(raw);
  if (it == raw_index_.end()) {
    throw DataError(fmt::format("unknown raw class '{}'", raw));
  }
  return entries_[it->second].class_name;
}

const std::string& Taxonomy::super_of(std::string_view class_name) const {
  auto it = class_index_.find(class_name);
  if (it == class_index_.end()) {
    throw DataError(fmt::format("unknown class '{}'", class_name));
  }
  return supers_[super_of_class_[it->second]];
}

std::optional<std::size_t> Taxonomy::class_index(std::string_view name) const {
  auto it = class_index_.find(name);
  if (it == class_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Taxonomy::super_index(std::string_view name) const {
  auto it = super_index_.find(name);
  if (it == super_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Taxonomy::inference_labels() const {
  return level_labels(GroupLevel::class_, true);
}

std::vector<std::string> Taxonomy::level_labels(GroupLevel level,
                                                bool with_undetected) const {
  std::vector<std::string> out =
      level == GroupLevel::class_ ? classes_ : supers_;
  if (with_undetected) out.emplace_back(kUndetected);
  return out;
}

std::vector<double> group_probabilities(std::span<const double> p,
                                        GroupLevel level,
                                        const Taxonomy& taxonomy) {
  const std::size_t n_classes = taxonomy.classes().size();
  const bool with_undetected = p.size() == n_classes + 1;
  if (p.size() != n_classes && !with_undetected) {
    throw ConfigError(fmt::format(
        "probability vector has {} entries; taxonomy has {} classes", p.size(),
        n_classes));
  }
  if (level == GroupLevel::class_) return {p.begin(), p.end()};

  const std::size_t n_groups = taxonomy.super_classes().size();
  std::vector<double> out(n_groups + (with_undetected ? 1 : 0), 0.0);
  for (std::size_t c = 0; c < n_classes; ++c) {
    const auto& super = taxonomy.super_of(taxonomy.classes()[c]);
    out[*taxonomy.super_index(super)] += p[c];
  }
  if (with_undetected) out.back() = p.back();
  return out;
}

std::string group_label(std::string_view class_name, GroupLevel level,
                        const Taxonomy& taxonomy) {
  if (class_name == kUndetected || level == GroupLevel::class_) {
    return std::string(class_name);
  }
  return taxonomy.super_of(class_name);
}

}  // namespace annotruth
