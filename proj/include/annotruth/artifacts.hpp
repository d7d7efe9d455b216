#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "annotruth/clustering.hpp"
#include "annotruth/dtale.hpp"
#include "annotruth/inference.hpp"
#include "annotruth/redundancy.hpp"

namespace annotruth {

// Provenance line written at the top of every artifact:
//   # annotruth <version> config=<hash>
struct ArtifactHeader {
  std::string version;
  std::string config_hash;

  std::string line() const;
};

// anchors.csv: anchor_id,fov_id,xmin,ymin,xmax,ymax,medoid,members
// (members joined with ';').
void write_anchors(const std::filesystem::path& path,
                   const std::vector<AnchorProposal>& anchors,
                   const ArtifactHeader& header);
std::vector<AnchorProposal> read_anchors(const std::filesystem::path& path);

// singletons.csv: annotation_id
void write_singletons(const std::filesystem::path& path,
                      const std::vector<std::string>& ids,
                      const ArtifactHeader& header);

struct InferenceReport {
  std::vector<std::string> labels;
  std::vector<InferredLabel> rows;
};

// anchor_id,is_nucleus,map_label,p_<label>...,boundary_posterior
// (boundary_posterior empty when absent).
void write_inference_report(const std::filesystem::path& path,
                            const InferenceReport& report,
                            const ArtifactHeader& header);
InferenceReport read_inference_report(const std::filesystem::path& path);

struct RaterRecord {
  std::string dataset;
  std::string participant_id;
  Tier tier = Tier::NP;
  RaterModel model;
};

// dataset,participant_id,tier,quality,confusion -- confusion rows joined
// with '|' and entries with ';', label order given in a `# labels:` line.
void write_rater_report(const std::filesystem::path& path,
                        const std::vector<std::string>& labels,
                        const std::vector<RaterRecord>& raters,
                        const ArtifactHeader& header);

struct MetricRecord {
  std::string metric;
  std::string scope;  // class, super_class or overall
  double value = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
};

// metric,scope,value,ci_low,ci_high
void write_metric_report(const std::filesystem::path& path,
                         const std::vector<MetricRecord>& records,
                         const ArtifactHeader& header);
std::vector<MetricRecord> read_metric_report(const std::filesystem::path& path);

// k,realization_count,class,mean_accuracy,sd (class `overall` is the micro
// accuracy).
void write_simulation_report(const std::filesystem::path& path,
                             const std::vector<RedundancyOutcome>& outcomes,
                             const ArtifactHeader& header);

// nucleus_id,emb_x,emb_y,model_class,<feature columns...>
DtaleInput read_dtale_input(const std::filesystem::path& path);
void write_dtale_input(const std::filesystem::path& path, const DtaleInput& input);

// Indented text, one node per line.
void write_dtale_tree(const std::filesystem::path& path, const DtaleTree& tree,
                      const ArtifactHeader& header);
// node_id,class,precision,recall,f1
void write_dtale_stats(const std::filesystem::path& path, const NodeStats& stats,
                       const ArtifactHeader& header);
// mode,class,node_id,precision,recall,f1,path
void write_dtale_explanations(
    const std::filesystem::path& path,
    const std::map<std::string, Explanation>& representative,
    const std::map<std::string, Explanation>& discriminative,
    const ArtifactHeader& header);

}  // namespace annotruth
