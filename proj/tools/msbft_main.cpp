#include <iostream>

#include <CLI11.hpp>

#include "campaign/campaign.hpp"
#include "msbft/types.hpp"

namespace {

namespace cm = msbft::campaign;

int cmd_run(const std::string& path, const std::string& out_dir, unsigned workers) {
  const auto config = cm::load_config(path);
  const auto result = cm::run_experiment(config, workers);
  const std::filesystem::path out = out_dir.empty() ? std::filesystem::path("out") / config.name : std::filesystem::path(out_dir);
  cm::write_outputs(out, config, result);
  std::cout << config.name << ": " << result.rows << " rows, " << result.failures << " failed -> "
            << out.string() << "\n";
  return result.passed() ? 0 : 1;
}

int cmd_verify(const cm::AcceptanceOptions& base) {
  auto options = base;
  options.on_result = [](const cm::CriterionResult& r) { std::cout << cm::format_result(r) << std::endl; };
  const auto results = cm::run_acceptance(options);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale Byzantine agreement simulator and reliability calculator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  unsigned workers = 1;
  auto* run = app.add_subcommand("run", "Run the campaign described by a JSON configuration");
  run->add_option("config", config_path, "Campaign configuration")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (default out/<name>)");
  run->add_option("--workers", workers, "Worker threads; does not affect outputs")->check(CLI::PositiveNumber);

  cm::AcceptanceOptions acceptance;
  std::string report_dir;
  auto* verify = app.add_subcommand("verify", "Run the acceptance suite and print one line per criterion");
  verify->add_flag("--inject-kernel-bug", acceptance.inject_kernel_bug,
                   "Run campaigns with a deliberately broken kernel (negative control)");
  verify->add_option("--only", acceptance.only, "Criteria to run (default all)")->check(CLI::Range(1, 8));
  verify->add_option("--workers", acceptance.workers, "Worker threads for the first pass")
      ->check(CLI::PositiveNumber);
  verify->add_option("--rerun-workers", acceptance.rerun_workers, "Worker threads for the determinism rerun")
      ->check(CLI::PositiveNumber);
  verify->add_option("--out", report_dir, "Also write each campaign's CSV and manifest under this directory");

  std::string topo_path;
  auto* topo = app.add_subcommand("topo-export", "Print the topology of a configuration as JSON");
  topo->add_option("config", topo_path, "Campaign configuration")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out_dir, workers);
    if (*verify) {
      if (!report_dir.empty()) acceptance.out_dir = report_dir;
      return cmd_verify(acceptance);
    }
    if (*topo) {
      std::cout << cm::export_topology(cm::load_config(topo_path)).dump(2) << "\n";
      return 0;
    }
  } catch (const msbft::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
