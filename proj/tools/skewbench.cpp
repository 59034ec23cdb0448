// skewbench <experiment> --config <path> [--seed U64] [--format csv|json] [--out <path>] [--paper-scale]
//
// exit codes: 0 ok, 2 configuration / usage error, 3 runtime error

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "skewsync/skewsync.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clock-skew estimator benchmark"};
  std::string experiment, config_path, format = "csv", out_path;
  std::optional<std::uint64_t> seed;
  bool paper_scale = false;

  app.add_option("experiment", experiment, "compare | period-sweep | unc-inject | granularity-sweep | flood")
      ->required();
  app.add_option("--config", config_path, "key = value config file")->required();
  app.add_option("--seed", seed, "root seed (overrides the config)");
  app.add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--out", out_path, "output file (default: stdout)");
  app.add_flag("--paper-scale", paper_scale, "use paper_duration_s instead of duration_s");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    skewsync::SimConfig cfg = skewsync::load_config(config_path, experiment);
    if (seed) cfg.seed = *seed;
    const auto fmt = skewsync::parse_format(format);
    const skewsync::RunReport report = skewsync::run_experiment(experiment, cfg, paper_scale);
    if (out_path.empty())
      std::cout << skewsync::render(report, fmt);
    else
      skewsync::emit(report, fmt, out_path);
  } catch (const skewsync::ConfigError& e) {
    std::cerr << "skewbench: config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "skewbench: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
