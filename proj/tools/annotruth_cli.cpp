// annotruth command-line front end.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "annotruth/error.hpp"
#include "annotruth/pipeline.hpp"

using namespace annotruth;

int main(int argc, char** argv) {
  CLI::App app{"Inferred ground truth from multi-rater nucleus annotations"};
  app.set_version_flag("--version", std::string(ANNOTRUTH_VERSION));
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::string out;
  std::string corpus;
  std::string taxonomy;
  std::optional<double> iou_threshold;
  std::optional<std::string> tier;
  std::vector<int> k;
  std::optional<int> realizations;
  std::optional<std::uint64_t> seed;

  app.add_option("--config", config_path, "JSON pipeline config");
  app.add_option("--out", out, "Output directory");
  app.add_option("--corpus", corpus, "Corpus directory");
  app.add_option("--taxonomy", taxonomy, "Taxonomy file");
  app.add_option("--iou-threshold", iou_threshold, "Minimum IOU for clustering");
  app.add_option("--tier", tier, "Rater group")->check(CLI::IsMember({"np", "pathologist"}));
  app.add_option("--k", k, "NPs kept per FOV (repeatable)")->delimiter(',');
  app.add_option("--realizations", realizations, "Simulation realizations");
  app.add_option("--seed", seed, "Master seed");

  const char* commands[] = {"cluster", "infer", "agree", "evaluate",
                            "simulate", "weights", "dtale"};
  for (const char* name : commands) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  PipelineConfig config;
  try {
    if (!config_path.empty()) config = PipelineConfig::load(config_path);
  } catch (const ConfigError& e) {
    std::cerr << error_record("config", e.what()) << '\n';
    return kExitConfig;
  }
  // Paths given on the command line are relative to the working directory.
  auto absolute = [](const std::string& p) { return std::filesystem::absolute(p).string(); };
  if (!out.empty()) config.out = absolute(out);
  if (!corpus.empty()) config.corpus = absolute(corpus);
  if (!taxonomy.empty()) config.taxonomy = absolute(taxonomy);
  if (iou_threshold) config.iou_threshold = *iou_threshold;
  if (tier) config.tier = *tier;
  if (!k.empty()) config.simulation.k = k;
  if (realizations) config.simulation.realizations = *realizations;
  if (seed) config.seed = *seed;

  const auto command = parse_command(app.get_subcommands().front()->get_name());
  return execute(command, config, std::cout, std::cerr);
}
