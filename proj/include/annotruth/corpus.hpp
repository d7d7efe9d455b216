#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "annotruth/geometry.hpp"
#include "annotruth/taxonomy.hpp"

namespace annotruth {

enum class Tier { NP, JP, SP };
enum class AnnotationKind { box, click };

std::string_view to_string(Tier tier);
std::string_view to_string(AnnotationKind kind);
Tier parse_tier(std::string_view text);
bool is_pathologist(Tier tier);

// One participant's mark on one FOV. For clicks, `box` is the footprint
// inherited from the approved suggestion.
struct Annotation {
  std::string id;
  std::string fov_id;
  std::string participant_id;
  AnnotationKind kind = AnnotationKind::box;
  BoundingBox box{0, 0, 1, 1};
  std::optional<Point> click_point;
  std::optional<std::string> suggestion_id;
  std::string raw_class;
};

struct Participant {
  std::string id;
  Tier tier = Tier::NP;
  std::set<std::string> fovs_annotated;
};

struct Suggestion {
  std::string id;
  std::string fov_id;
  BoundingBox box{0, 0, 1, 1};
  std::vector<Point> polygon;  // optional boundary; empty when not supplied
};

struct Fov {
  std::string id;
  std::string dataset;
  double width = 0.0;
  double height = 0.0;
  double area() const { return width * height; }
};

// Validated, immutable collection of annotations and their context tables.
// Participants, FOVs and suggestions are stored sorted by id; annotations
// keep file order.
class Corpus {
 public:
  // Validates referential integrity, taxonomy membership and id uniqueness.
  // Participant FOV sets are recomputed from the annotations. Throws
  // DataError naming the offending record.
  static Corpus build(std::vector<Annotation> annotations,
                      std::vector<Participant> participants,
                      std::vector<Suggestion> suggestions, std::vector<Fov> fovs,
                      const Taxonomy& taxonomy);

  const std::vector<Annotation>& annotations() const { return annotations_; }
  const std::vector<Participant>& participants() const { return participants_; }
  const std::vector<Suggestion>& suggestions() const { return suggestions_; }
  const std::vector<Fov>& fovs() const { return fovs_; }

  const Annotation& annotation(std::string_view id) const;
  const Participant& participant(std::string_view id) const;
  const Fov& fov(std::string_view id) const;
  const Suggestion& suggestion(std::string_view id) const;
  bool has_fov(std::string_view id) const;

  // Sorted set of dataset tags present in the FOV table.
  std::set<std::string> datasets() const;

  friend bool operator==(const Corpus& a, const Corpus& b);

 private:
  std::vector<Annotation> annotations_;
  std::vector<Participant> participants_;
  std::vector<Suggestion> suggestions_;
  std::vector<Fov> fovs_;
  std::map<std::string, std::size_t, std::less<>> annotation_index_;
  std::map<std::string, std::size_t, std::less<>> participant_index_;
  std::map<std::string, std::size_t, std::less<>> suggestion_index_;
  std::map<std::string, std::size_t, std::less<>> fov_index_;
};

// Corpus directory layout (all files comma-separated with a mandatory header):
//
//   annotations.csv   id,fov_id,participant_id,kind,raw_class,
//                     xmin,ymin,xmax,ymax,click_x,click_y,suggestion_id
//   participants.csv  participant_id,tier
//   fovs.csv          fov_id,dataset,width,height
//   suggestions.csv   suggestion_id,fov_id,xmin,ymin,xmax,ymax,polygon
//                     (optional file; polygon is `x y;x y;...` or empty)
//
// Box records leave click_x, click_y and suggestion_id empty. Click records
// leave the box columns empty and inherit the suggestion's box.
struct CorpusFiles {
  static constexpr std::string_view annotations = "annotations.csv";
  static constexpr std::string_view participants = "participants.csv";
  static constexpr std::string_view fovs = "fovs.csv";
  static constexpr std::string_view suggestions = "suggestions.csv";
};

Corpus load_corpus(const std::filesystem::path& dir, const Taxonomy& taxonomy);
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

}  // namespace annotruth
