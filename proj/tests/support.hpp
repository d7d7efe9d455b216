#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "annotruth/clustering.hpp"
#include "annotruth/corpus.hpp"
#include "annotruth/random.hpp"
#include "annotruth/taxonomy.hpp"

namespace testsupport {

using namespace annotruth;

inline BoundingBox box(double x, double y, double w = 10, double h = 10) {
  return BoundingBox(x, y, x + w, y + h);
}

inline Annotation box_annotation(std::string id, std::string fov, std::string who,
                                 std::string raw, BoundingBox b) {
  Annotation a;
  a.id = std::move(id);
  a.fov_id = std::move(fov);
  a.participant_id = std::move(who);
  a.kind = AnnotationKind::box;
  a.box = b;
  a.raw_class = std::move(raw);
  return a;
}

// Fresh directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() /
             fmt::format("annotruth_test_{}_{}", name, ::getpid());
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

struct RaterSpec {
  std::string id;
  Tier tier = Tier::NP;
  double accuracy = 1.0;   // chance of reporting the true class
  double detection = 1.0;  // chance of marking a nucleus at all
  double click_rate = 0.0; // chance of approving the suggestion instead of drawing
  std::vector<std::string> fovs;  // empty: every FOV
};

struct PlantedSpec {
  int fovs = 3;
  int nuclei_per_fov = 12;
  std::vector<RaterSpec> raters;
  std::vector<std::string> classes{"tumor", "fibroblast", "lymphocyte", "plasma_cell"};
  std::string dataset = "eval";
  double jitter = 1.0;
  std::uint64_t seed = 1;
  bool suggestions = false;
};

struct Planted {
  Corpus corpus;
  std::vector<std::string> nucleus_fov;
  std::vector<BoundingBox> nucleus_box;
  std::vector<std::string> truth;  // planted class per nucleus

  // Planted nucleus whose box contains the anchor's medoid centre.
  std::size_t nucleus_of(const AnchorProposal& a) const {
    const double cx = 0.5 * (a.medoid_box.xmin() + a.medoid_box.xmax());
    const double cy = 0.5 * (a.medoid_box.ymin() + a.medoid_box.ymax());
    for (std::size_t n = 0; n < nucleus_box.size(); ++n) {
      const auto& b = nucleus_box[n];
      if (nucleus_fov[n] == a.fov_id && cx >= b.xmin() - 3 && cx <= b.xmax() + 3 &&
          cy >= b.ymin() - 3 && cy <= b.ymax() + 3) {
        return n;
      }
    }
    return nucleus_box.size();
  }
};

// Nuclei on a grid with 40 px pitch and 20 px boxes, so only marks of the
// same nucleus overlap. Rater marks are jittered copies of the nucleus box.
inline Planted make_planted(const PlantedSpec& spec,
                            const Taxonomy& taxonomy = Taxonomy::default_taxonomy()) {
  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> shift(-spec.jitter, spec.jitter);
  Planted out{Corpus::build({}, {}, {}, {}, taxonomy), {}, {}, {}};

  std::vector<Fov> fovs;
  std::vector<Suggestion> suggestions;
  const int cols = 6;
  for (int f = 0; f < spec.fovs; ++f) {
    const auto fid = fmt::format("f{:02}", f);
    fovs.push_back({fid, spec.dataset, 400.0, 400.0});
    for (int n = 0; n < spec.nuclei_per_fov; ++n) {
      const double x = 10 + 40.0 * (n % cols), y = 10 + 40.0 * (n / cols);
      out.nucleus_fov.push_back(fid);
      out.nucleus_box.push_back(box(x, y, 20, 20));
      out.truth.push_back(spec.classes[static_cast<std::size_t>(
          unit(rng) * static_cast<double>(spec.classes.size())) % spec.classes.size()]);
      if (spec.suggestions) {
        suggestions.push_back({fmt::format("s{}", out.truth.size() - 1), fid,
                               box(x, y, 20, 20), {}});
      }
    }
  }

  std::vector<Participant> participants;
  std::vector<Annotation> annotations;
  for (const auto& r : spec.raters) {
    participants.push_back({r.id, r.tier, {}});
    for (std::size_t n = 0; n < out.truth.size(); ++n) {
      const auto& fid = out.nucleus_fov[n];
      if (!r.fovs.empty() &&
          std::find(r.fovs.begin(), r.fovs.end(), fid) == r.fovs.end()) {
        continue;
      }
      // Every rater leaves at least one mark per covered FOV: the first
      // nucleus is always found, so FOV coverage is unambiguous.
      const bool first = n == 0 || out.nucleus_fov[n - 1] != fid;
      const double u_detect = unit(rng), u_class = unit(rng), u_click = unit(rng);
      const double dx = shift(rng), dy = shift(rng);
      if (!first && u_detect >= r.detection) continue;
      std::string cls = out.truth[n];
      if (u_class >= r.accuracy) {
        std::vector<std::string> others;
        for (const auto& c : spec.classes) {
          if (c != cls) others.push_back(c);
        }
        cls = others[static_cast<std::size_t>(u_click * 1e6) % others.size()];
      }
      Annotation a;
      a.id = fmt::format("{}_{:04}", r.id, n);
      a.fov_id = fid;
      a.participant_id = r.id;
      a.raw_class = cls;
      const auto& b = out.nucleus_box[n];
      if (spec.suggestions && unit(rng) < r.click_rate) {
        a.kind = AnnotationKind::click;
        a.suggestion_id = fmt::format("s{}", n);
        a.click_point = Point{b.xmin() + 10, b.ymin() + 10};
      } else {
        a.box = BoundingBox(b.xmin() + dx, b.ymin() + dy, b.xmax() + dx, b.ymax() + dy);
      }
      annotations.push_back(std::move(a));
    }
  }
  out.corpus = Corpus::build(std::move(annotations), std::move(participants),
                             std::move(suggestions), std::move(fovs), taxonomy);
  return out;
}

}  // namespace testsupport
