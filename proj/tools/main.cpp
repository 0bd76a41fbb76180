#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "llmrerank/config.hpp"
#include "llmrerank/error.hpp"
#include "llmrerank/workflow.hpp"

using namespace llmrerank;

int main(int argc, char** argv) {
  CLI::App app{"LLM re-ranking evaluation harness"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  app.add_option("--config", config_file, "INI config file")->check(CLI::ExistingFile);

  // Every config key doubles as a --section.key flag that overrides the file.
  std::map<std::string, std::string> flag_values;
  for (const auto& key : config_keys()) {
    app.add_option("--" + key, flag_values[key], "override " + key);
  }

  auto* ingest = app.add_subcommand("ingest", "Load ratings and items, split, and write the run directory");
  auto* run = app.add_subcommand("run", "Generate slates, re-rank them, and write the report");
  auto* dataset = app.add_subcommand("build-dataset", "Write SFT and DPO training files");

  auto* human = app.add_subcommand("human-eval", "Compare two files of Likert scores with a t-test");
  std::string ratings_a, ratings_b;
  HumanEvalOptions human_options;
  human->add_option("ratings_a", ratings_a, "scores for model A")->required();
  human->add_option("ratings_b", ratings_b, "scores for model B")->required();
  human->add_flag("--paired", human_options.paired, "paired t-test (same raters, same order)");
  human->add_flag("--equal-variance", human_options.equal_variance, "pooled-variance Student test");

  auto* export_cmd = app.add_subcommand("export-slates", "Write generated slates as JSONL");
  std::string export_path;
  export_cmd->add_option("--out", export_path, "destination (default <run_dir>/slates.jsonl)");

  auto* import_cmd = app.add_subcommand("import-slates", "Validate external slates and store them in the run directory");
  std::string import_path;
  import_cmd->add_option("slates", import_path, "JSONL slates file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (human->parsed()) return cmd_human_eval(ratings_a, ratings_b, human_options, std::cout);

    ConfigMap overrides;
    for (const auto& key : config_keys()) {
      if (app.count("--" + key) > 0) overrides[key] = flag_values[key];
    }
    const auto config = load_config(config_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_file),
                                    overrides);

    if (ingest->parsed()) return cmd_ingest(config, std::cout);
    if (run->parsed()) return cmd_run(config, std::cout);
    if (dataset->parsed()) return cmd_build_dataset(config, std::cout);
    if (export_cmd->parsed()) return cmd_export_slates(config, export_path, std::cout);
    if (import_cmd->parsed()) return cmd_import_slates(config, import_path, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
