#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "rloss/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Online sensitivity sub-sampling for episodic RL"};
  app.require_subcommand(1);

  rloss::CommandOptions run_opts;
  std::uint64_t seed = 0;
  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("--spec", run_opts.spec_path, "experiment spec file")->required();
    sub->add_option("--out", run_opts.out, "output root");
    sub->add_option("--seed", seed, "override the run seed (drops sweep seeds)");
    sub->add_flag("--force", run_opts.force, "replace an existing output directory");
    sub->add_flag("--trace", run_opts.trace, "write planner and bisection traces");
  };
  auto* run = app.add_subcommand("run", "run one experiment (or every expansion of its sweep)");
  add_run_options(run);
  auto* sweep = app.add_subcommand("sweep", "run a sweep and aggregate it");
  add_run_options(sweep);
  sweep->add_option("--parallel", run_opts.parallel, "concurrent runs")->check(CLI::PositiveNumber);

  rloss::DiagOptions diag_opts;
  auto* diag = app.add_subcommand("diag", "post-hoc checks on a run directory");
  diag->add_option("check", diag_opts.check, "distortion | optimism | eluder | cover")->required();
  diag->add_option("--dir", diag_opts.dir, "run directory")->required();
  diag->add_option("--pairs", diag_opts.pairs, "function pairs for the distortion audit");
  diag->add_option("--eps", diag_opts.eps, "eluder resolution (default 1/T)");
  diag->add_option("--seed", diag_opts.seed, "audit seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rloss::kExitValidation;
  }

  try {
    if (run->parsed() || sweep->parsed()) {
      if ((run->parsed() ? run : sweep)->count("--seed")) run_opts.seed = seed;
      return run->parsed() ? rloss::cmd_run(run_opts, std::cout, std::cerr)
                           : rloss::cmd_sweep(run_opts, std::cout, std::cerr);
    }
    return rloss::cmd_diag(diag_opts, std::cout, std::cerr);
  } catch (const rloss::InvalidInput& e) {
    std::cerr << e.what() << "\n";
    return rloss::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return rloss::kExitRuntime;
  }
}
