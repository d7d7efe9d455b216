#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace annotruth {

inline constexpr std::string_view kAmbiguous = "ambiguous";
inline constexpr std::string_view kUndetected = "undetected";

enum class GroupLevel { class_, super_class };

// Three-level nucleus class hierarchy: raw class -> class -> super-class.
//
// Classes and super-classes are ordered by first appearance in the taxonomy
// definition; that order is the canonical index order for every probability
// vector in the library. `undetected` is an inference-only pseudo-class that
// may be appended after the last class (or super-class) and always groups to
// itself.
class Taxonomy {
 public:
  struct Entry {
    std::string raw;
    std::string class_name;
    std::string super_class;
  };

  explicit Taxonomy(std::vector<Entry> entries);

  // Built-in default with the nucleus classes used throughout the pipeline.
  static Taxonomy default_taxonomy();

  // Reads `raw,class,super_class` lines. A leading header line with exactly
  // those column names is accepted; blank lines and `#` comments are skipped.
  static Taxonomy load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const std::vector<Entry>& entries() const { return entries_; }
  const std::vector<std::string>& raw_classes() const { return raw_; }
  const std::vector<std::string>& classes() const { return classes_; }
  const std::vector<std::string>& super_classes() const { return supers_; }

  bool has_raw(std::string_view raw) const;
  // Throws DataError for an unknown raw class.
  const std::string& class_of(std::string_view raw) const;
  const std::string& super_of(std::string_view class_name) const;

  std::optional<std::size_t> class_index(std::string_view class_name) const;
  std::optional<std::size_t> super_index(std::string_view super_name) const;

  // Class labels followed by `undetected`: the label space used by inference.
  std::vector<std::string> inference_labels() const;

  // Names of the target level (plus `undetected` when `with_undetected`).
  std::vector<std::string> level_labels(GroupLevel level,
                                        bool with_undetected) const;

 private:
  std::vector<Entry> entries_;
  std::vector<std::string> raw_;
  std::vector<std::string> classes_;
  std::vector<std::string> supers_;
  std::map<std::string, std::size_t, std::less<>> raw_index_;
  std::map<std::string, std::size_t, std::less<>> class_index_;
  std::map<std::string, std::size_t, std::less<>> super_index_;
  std::vector<std::size_t> super_of_class_;
};

// Sums class probabilities into their groups at `level`. `p` is indexed by
// taxonomy classes, optionally followed by one `undetected` entry, which is
// carried through unchanged as the last output entry. Throws ConfigError on a
// length mismatch.
std::vector<double> group_probabilities(std::span<const double> p,
                                        GroupLevel level,
                                        const Taxonomy& taxonomy);

// Maps a class (or `undetected`) label to its group label at `level`.
std::string group_label(std::string_view class_name, GroupLevel level,
                        const Taxonomy& taxonomy);

}  // namespace annotruth
