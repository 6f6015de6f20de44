// gaugeflow: batch runner for the flow and Morse experiments.
//
//   gaugeflow <kind> --config FILE [--out DIR] [--seed N]
//
// Exit codes: 0 pass, 1 tolerance failure, 2 invalid input, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "gaugeflow/experiments.hpp"

namespace fs = std::filesystem;
using namespace gaugeflow;

namespace {

std::string output_dir(const std::string& flag, const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("GAUGEFLOW_OUT"); env && *env) return env;
  if (!cfg.out.empty()) return cfg.out;
  return "out";
}

int run(const std::string& kind, const std::string& config_path, const std::string& out_flag,
        const std::optional<std::uint64_t>& seed) {
  ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : parse_config(read_file(config_path));
  if (!cfg.kind.empty() && cfg.kind != kind)
    throw InvalidInput("config kind '" + cfg.kind + "' does not match subcommand '" + kind + "'");
  cfg.kind = kind;
  if (seed) cfg.seed = seed;
  if (!cfg.init.empty() && fs::path(cfg.init).is_relative() && !config_path.empty())
    cfg.init = (fs::path(config_path).parent_path() / cfg.init).string();

  const Report rep = run_experiment(cfg);
  const fs::path dir = output_dir(out_flag, cfg);
  fs::create_directories(dir);
  for (const auto& f : rep.files) write_file((dir / f.name).string(), f.content);
  write_file((dir / "summary.csv").string(), rep.summary_csv(cfg));

  for (const auto& [k, v] : rep.summary) std::cout << k << " = " << v << "\n";
  std::cout << kind << ": " << (rep.pass ? "PASS" : "FAIL") << "  (" << dir.string() << ")\n";
  return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Yang-Mills and loop-space flow experiments"};
  app.require_subcommand(1);
  std::string config_path, out_flag;
  std::optional<std::uint64_t> seed;

  for (const char* kind : kExperimentKinds) {
    CLI::App* sub = app.add_subcommand(kind, std::string("run the ") + kind + " experiment");
    sub->add_option("--config", config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_flag, "output directory (default: $GAUGEFLOW_OUT, config 'out', ./out)");
    sub->add_option("--seed", seed, "overrides the config seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string kind = app.get_subcommands().front()->get_name();
  try {
    return run(kind, config_path, out_flag, seed);
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
