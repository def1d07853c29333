#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "timedreach/pipeline.hpp"

namespace tr = timedreach;

namespace {

// 0: success, 2: validation/input error, 3: solver did not converge.
constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNoConvergence = 3;

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int cmd_build(const tr::BuildConfig& cfg, const std::string& out_dir) {
  tr::BuildArtifacts art = tr::run_build(cfg);
  print_warnings(art.warnings);
  tr::write_build_outputs(art, cfg, out_dir);
  std::printf("grid: %lld points, %zu inputs\n",
              static_cast<long long>(art.grid.num_points()), art.inputs.size());
  std::printf("delta: %s (= %.17g), stability bound %.17g%s\n", art.delta.str().c_str(),
              art.delta.to_double(), art.delta_bound, art.delta_auto ? " [auto]" : "");
  std::printf("kernel: %zu transitions, worst row sum error %.3g\n", art.kernel.succ.size(),
              art.consistency.worst_row_sum_err);
  std::printf("clock space: %lld valuations\n",
              static_cast<long long>(art.ticks.total_valuations()));
  std::printf("product: %lld states, %lld transitions\n",
              static_cast<long long>(art.product.num_states()),
              static_cast<long long>(art.product.num_transitions()));
  std::printf("wrote %s\n", out_dir.c_str());
  return kExitOk;
}

int cmd_solve(const tr::SolveConfig& cfg) {
  tr::SolveResult res = tr::run_solve(cfg);
  const tr::ProductMdp mdp = tr::load_product_dir(cfg.dir);
  std::printf("value at initial state: %.17g\n", res.value[mdp.init_id]);
  std::printf("%s, %d sweeps, final residual %.3g\n", res.converged ? "converged" : "NOT CONVERGED",
              res.iterations, res.residuals.empty() ? 0.0 : res.residuals.back());
  std::printf("wrote value.csv, policy.csv, convergence.csv in %s\n", cfg.dir.c_str());
  if (!res.converged) {
    std::cerr << "error: value iteration did not converge within " << cfg.max_iters
              << " sweeps (tol " << cfg.tol << ")\n";
    return kExitNoConvergence;
  }
  return kExitOk;
}

int cmd_simulate(const tr::SimulateConfig& cfg) {
  const tr::EstimateReport rep = tr::run_simulate(cfg);
  std::printf("trials: %d  accepted: %d  rejected: %d  timeouts: %d  policy misses: %d\n",
              rep.trials, rep.accepted, rep.rejected, rep.timeouts, rep.policy_misses);
  std::printf("estimate: %.6f +/- %.6f (95%%)\n", rep.p_hat, rep.half_width);
  std::ifstream est(cfg.dir + "/estimate.json");
  if (est) {
    nlohmann::json j;
    est >> j;
    if (j.contains("value_at_init"))
      std::printf("solved value at initial state: %.6f (|diff| %.6f, %s the interval)\n",
                  j["value_at_init"].get<double>(), j["value_abs_error"].get<double>(),
                  j["value_within_interval"].get<bool>() ? "inside" : "OUTSIDE");
  }
  std::printf("wrote estimate.json, trajectories.csv in %s\n", cfg.dir.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "timedreach: policy synthesis for stochastic dynamics under timed "
      "reachability specifications"};
  app.require_subcommand(1);
  // `--h` is the mesh-width option, so help must not claim the short -h.
  const auto long_help = [](CLI::App* a) { a->set_help_flag("--help", "print help and exit"); };
  long_help(&app);

  tr::BuildConfig bcfg;
  std::string out_dir;
  CLI::App* build = app.add_subcommand(
      "build", "discretize a model, compose it with an automaton, write the product");
  long_help(build);
  build->add_option("--model", bcfg.model_path, "model json file")->required();
  build->add_option("--automaton", bcfg.automaton_path, "automaton json file")->required();
  build->add_option("--h", bcfg.h, "grid step per dimension (one value broadcasts)")
      ->required()
      ->delimiter(',');
  build->add_option("--delta", bcfg.delta_text,
                    "sample period as an exact rational (default: auto-select)");
  build->add_option("--epsilon", bcfg.epsilon, "input discretization width")
      ->check(CLI::PositiveNumber);
  build->add_flag("--override-delta-bound", bcfg.override_delta_bound,
                  "accept a delta above the stability bound (rows are clamped and renormalized)");
  build->add_flag("--export-kernel", bcfg.export_kernel, "also write kernel.csv");
  build
      ->add_option_function<std::string>(
          "--coverage",
          [&bcfg](const std::string& v) {
            bcfg.coverage =
                v == "full" ? tr::ProductCoverage::full : tr::ProductCoverage::reachable;
          },
          "product state coverage: full (default; simulation-safe) or reachable")
      ->check(CLI::IsMember({"full", "reachable"}));
  build->add_option("--out", out_dir, "output directory")->required();

  tr::SolveConfig scfg;
  CLI::App* solve = app.add_subcommand("solve", "run the reachability optimization on a product");
  long_help(solve);
  solve->add_option("--dir,--out", scfg.dir, "directory written by 'build'")->required();
  solve->add_option("--tol", scfg.tol, "sup-norm stopping tolerance")->check(CLI::PositiveNumber);
  solve->add_option("--max-iters", scfg.max_iters, "sweep limit")->check(CLI::PositiveNumber);
  solve->add_flag("--gauss-seidel", scfg.gauss_seidel, "in-place sweeps instead of synchronous");

  tr::SimulateConfig mcfg;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Monte Carlo validation of a policy on the dynamics");
  long_help(simulate);
  simulate->add_option("--dir,--out", mcfg.dir, "directory written by 'build' + 'solve'")
      ->required();
  simulate->add_option("--model", mcfg.model_path, "model json (default: from manifest)");
  simulate->add_option("--automaton", mcfg.automaton_path,
                       "automaton json (default: from manifest)");
  simulate->add_option("--trials", mcfg.trials, "number of rollouts")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", mcfg.seed, "base seed for the per-trial streams");
  simulate->add_option("--em-substeps", mcfg.em_substeps, "integrator steps per sample period")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--max-ticks", mcfg.max_ticks,
                       "rollout horizon in ticks (default: twice the clock cap)");
  simulate->add_option("--keep", mcfg.keep_trajectories,
                       "number of full trajectories to write to trajectories.csv");

  std::string frag_spec, frag_out;
  CLI::App* fragment =
      app.add_subcommand("fragment", "build a staged reachability automaton from a description");
  long_help(fragment);
  fragment->add_option("--spec", frag_spec, "stage description json")->required();
  fragment->add_option("--out", frag_out, "automaton output file")->required();

  tr::BuildConfig ccfg;
  CLI::App* check = app.add_subcommand("check", "validate a model/automaton pair without writing");
  long_help(check);
  check->add_option("--model", ccfg.model_path, "model json file")->required();
  check->add_option("--automaton", ccfg.automaton_path, "automaton json file");
  check->add_option("--h", ccfg.h, "grid step per dimension")->required()->delimiter(',');
  check->add_option("--delta", ccfg.delta_text, "sample period to check (default: auto)");
  check->add_option("--epsilon", ccfg.epsilon, "input discretization width")
      ->check(CLI::PositiveNumber);
  check->add_flag("--override-delta-bound", ccfg.override_delta_bound,
                  "treat an oversized delta as acceptable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (build->parsed()) return cmd_build(bcfg, out_dir);
    if (solve->parsed()) return cmd_solve(scfg);
    if (simulate->parsed()) return cmd_simulate(mcfg);
    if (fragment->parsed()) {
      tr::run_fragment(frag_spec, frag_out);
      std::printf("wrote %s\n", frag_out.c_str());
      return kExitOk;
    }
    if (check->parsed()) {
      const tr::CheckReport rep = tr::run_check(ccfg);
      for (const auto& line : rep.lines) std::printf("%s\n", line.c_str());
      return rep.ok ? kExitOk : kExitValidation;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}
