#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "annotruth/inference.hpp"

namespace annotruth {

enum class Command { cluster, infer, agree, evaluate, simulate, weights, dtale };

std::string_view to_string(Command command);
// Throws ConfigError for an unknown name.
Command parse_command(std::string_view name);

// Exit statuses of execute().
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInternal = 70;

struct PipelineConfig {
  // Paths as written; relative ones resolve against base_dir.
  std::string corpus;
  std::string taxonomy;  // empty: built-in default
  std::string out = "out";
  std::filesystem::path base_dir = ".";

  std::vector<std::string> datasets;  // empty: every dataset in the corpus
  double iou_threshold = 0.25;
  std::optional<std::string> tier;    // np or pathologist; empty: both

  struct Em {
    double init_quality = 0.7;
    int iterations = 70;
    std::optional<double> tolerance;
  } em;

  struct Simulation {
    std::string dataset;  // empty: the only configured dataset
    int nps_total = 18;
    std::vector<int> k{1, 2, 3, 4, 5, 6};
    int realizations = 1000;
  } simulation;

  struct Dtale {
    std::string input;
    int max_depth = 7;
    int min_leaf = 250;
  } dtale;

  struct Evaluation {
    std::string predictions;  // optional model detections
    int resamples = 1000;
    double level = 0.95;
  } evaluation;

  std::uint64_t seed = 0;

  // Parses the JSON text. Unknown keys and ill-typed values are ConfigError.
  static PipelineConfig parse(std::string_view json_text,
                              const std::filesystem::path& base_dir = ".");
  static PipelineConfig load(const std::filesystem::path& path);

  // Canonical JSON form (keys sorted); base_dir is not part of it.
  std::string canonical() const;
  // FNV-1a 64 of canonical(), as 16 hex digits.
  std::string hash() const;

  void validate() const;
  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path out_dir() const { return resolve(out); }
};

// Artifact file names inside the output directory.
struct ArtifactNames {
  static constexpr std::string_view anchors = "anchors.csv";
  static constexpr std::string_view singletons = "singletons.csv";
  static std::string inference(RaterGroup group);
  static std::string raters(RaterGroup group);
  static constexpr std::string_view agreement = "agreement.csv";
  static constexpr std::string_view metrics = "metrics.csv";
  static constexpr std::string_view simulation = "simulation.csv";
  static constexpr std::string_view class_weights = "class_weights.csv";
  static constexpr std::string_view fov_weights = "fov_weights.csv";
  static constexpr std::string_view dtale_tree = "dtale_tree.txt";
  static constexpr std::string_view dtale_stats = "dtale_stats.csv";
  static constexpr std::string_view dtale_explanations = "dtale_explanations.csv";
};

// One-line JSON error record: {"error": kind, "message": message}.
std::string error_record(std::string_view kind, std::string_view message);

// Runs one stage. Stages talk to each other only through files in the output
// directory. Failures are reported as one JSON line on `err`
// ({"error": kind, "message": ...}) and mapped to the kExit* statuses.
int execute(Command command, const PipelineConfig& config, std::ostream& log,
            std::ostream& err);

}  // namespace annotruth
