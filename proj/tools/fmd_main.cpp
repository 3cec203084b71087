#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fmd/error.hpp"
#include "fmd/run.hpp"

namespace {

void add_run_options(CLI::App& cmd, fmd::RunConfig& cfg, std::string& kernel, std::string& algo) {
  auto& s = cfg.search;
  cmd.add_option("--domain", cfg.domain, "driving | indoor | custom name")->capture_default_str();
  cmd.add_option("--catalog", cfg.catalog, "catalog file (default: bundled for domain)");
  cmd.add_option("--rules", cfg.rules, "rule file (default: bundled for domain)");
  cmd.add_option("--target", cfg.target, "synthetic:<scenario> | replay:<records.log> | subprocess:<command>");
  cmd.add_option("--algo", algo, "random | beam | gpts")->capture_default_str();
  cmd.add_option("--budget", s.budget, "total inferences B")->capture_default_str();
  cmd.add_option("--samples", s.m, "samples per set m")->capture_default_str();
  cmd.add_option("--beam-width", s.beam_width, "beam width k")->capture_default_str();
  cmd.add_option("--max-depth", s.max_depth, "maximum concepts per set D")->capture_default_str();
  cmd.add_option("--lambda", s.lambda, "diversity weight")->capture_default_str();
  cmd.add_option("--tau", s.tau, "failure threshold")->capture_default_str();
  cmd.add_option("--beam-budget", s.beam_budget, "GPTS beam-phase budget")->capture_default_str();
  cmd.add_option("--pool-size", s.pool_size, "Thompson proposal pool")->capture_default_str();
  cmd.add_option("--kernel", kernel, "dotproduct | rbf")->capture_default_str();
  cmd.add_option("--noise", s.kernel.noise_variance, "white-noise variance")->capture_default_str();
  cmd.add_flag("--noise-grid", s.noise_grid, "pick noise from {0.01,0.05,0.1} by marginal likelihood");
  cmd.add_option("--seed", s.seed, "root seed")->capture_default_str();
  cmd.add_flag("--recognition", cfg.probe_recognition, "collect recognition probes when the target supports them");
  cmd.add_option("--out", cfg.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted failure-mode search over concept compositions"};
  app.require_subcommand(1);

  fmd::RunConfig cfg;
  std::string kernel = "dotproduct";
  std::string algo = "gpts";
  std::string config_file;

  auto* search = app.add_subcommand("search", "run one search");
  add_run_options(*search, cfg, kernel, algo);
  search->add_option("--config", config_file, "rerun from a config.snapshot (flags are ignored)");

  auto* sweep = app.add_subcommand("sweep", "one search per grid point");
  add_run_options(*sweep, cfg, kernel, algo);
  std::string grid_text;
  sweep->add_option("--grid", grid_text, "e.g. 'beam_width=1,5,10;samples=5,10'")->required();

  std::string run_dir;
  std::size_t top_n = 10;
  int val_m = 20;
  std::string target_override;
  auto* validate = app.add_subcommand("validate", "re-evaluate the top sets of a finished run");
  validate->add_option("run", run_dir, "run directory")->required();
  validate->add_option("--top", top_n, "number of sets")->capture_default_str();
  validate->add_option("--samples", val_m, "samples per set")->capture_default_str();
  validate->add_option("--target", target_override, "target spec (default: the run's target)");

  fmd::TransferOptions topt;
  std::string transfer_target;
  std::string baseline_mfr;
  auto* transfer = app.add_subcommand("transfer", "evaluate a run's top sets on another target");
  transfer->add_option("run", run_dir, "source run directory")->required();
  transfer->add_option("--target", transfer_target, "target spec")->required();
  transfer->add_option("--top", topt.top_n, "number of sets")->capture_default_str();
  transfer->add_option("--samples", topt.m, "samples per set")->capture_default_str();
  transfer->add_option("--baseline-mfr", baseline_mfr, "known random-baseline MFR; skips the 200-set random run");
  transfer->add_option("--out", topt.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*search || *sweep) {
      if (!config_file.empty()) {
        const auto out = cfg.out;
        cfg = fmd::RunConfig::from_snapshot(config_file);
        if (!out.empty()) cfg.out = out;
      } else {
        cfg.search.algo = fmd::algo_from_string(algo);
        cfg.search.kernel.family = fmd::kernel_family_from_string(kernel);
      }
    }
    if (*search) {
      fmd::cmd_search(cfg, std::cout);
    } else if (*sweep) {
      const auto grid = fmd::parse_grid(grid_text);
      fmd::cmd_sweep(cfg, grid, std::cout);
    } else if (*validate) {
      fmd::cmd_validate(run_dir, top_n, val_m, std::cout, target_override);
    } else if (*transfer) {
      if (!baseline_mfr.empty()) {
        topt.random_baseline = false;
        topt.baseline_mfr = std::stod(baseline_mfr);
      }
      fmd::cmd_transfer(run_dir, transfer_target, topt, std::cout);
    }
  } catch (const fmd::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fmd::CatalogError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
