#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "cnls/experiment.hpp"
#include "cnls/version.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "experiment config (JSON)")
      ->required();
  sub->add_option("--out", args.out_dir, "output directory override");
  sub->add_option("--seed", args.seed, "seed override");
}

cnls::ExperimentConfig load(const CommonArgs& args) {
  cnls::ExperimentConfig cfg = cnls::load_config_file(args.config_path);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.seed >= 0) {
    cfg.seed = static_cast<unsigned long>(args.seed);
    cfg.solver.seed = cfg.seed;
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coupled Schrodinger bound-state experiments"};
  app.set_version_flag("--version", CNLS_VERSION);
  app.require_subcommand(1);

  CommonArgs spectrum_args, solve_args, verify_args;
  bool corrupt_stencil = false;

  CLI::App* spectrum =
      app.add_subcommand("spectrum", "eigenvalue table of the linear pencil");
  add_common(spectrum, spectrum_args);
  CLI::App* solve =
      app.add_subcommand("solve", "bound-state search over the lambda list");
  add_common(solve, solve_args);
  CLI::App* verify =
      app.add_subcommand("verify", "oracle and invariant suites");
  add_common(verify, verify_args);
  verify
      ->add_flag("--corrupt-stencil", corrupt_stencil,
                 "perturb the independent stencil (negative control)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);  // --help, --version
    app.exit(err);
    return cnls::kExitUsage;
  }

  try {
    if (spectrum->parsed()) return cnls::run_spectrum(load(spectrum_args));
    if (solve->parsed()) return cnls::run_solve(load(solve_args));
    if (verify->parsed())
      return cnls::run_verify(load(verify_args), corrupt_stencil);
  } catch (const cnls::ConfigError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return cnls::kExitUsage;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return cnls::kExitSolveFailed;
  }
  return cnls::kExitUsage;
}
