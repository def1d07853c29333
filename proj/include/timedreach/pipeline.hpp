#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "timedreach/dynamics.hpp"
#include "timedreach/grid.hpp"
#include "timedreach/markov_kernel.hpp"
#include "timedreach/product_mdp.hpp"
#include "timedreach/runtime.hpp"
#include "timedreach/solver.hpp"
#include "timedreach/timed_automaton.hpp"

namespace timedreach {

// Orchestration shared by the command-line driver and the integration tests:
// each stage reads and writes a working directory so that long pipelines can
// be resumed and artifacts inspected.
//
// Directory layout after a full run:
//   manifest.json             parameters, counts, check results, fingerprints
//   product_header.json       product metadata (delta, caps, inputs, hashes)
//   product_states.csv        id,xindex,q,tick_*,goal
//   product_transitions.csv   src,input,dst,prob
//   kernel.csv                state_id,input_id,succ_id,prob   (opt-in)
//   value.csv                 id,value
//   policy.csv                id,input_id,u_*   ("# product=0x..." comment)
//   convergence.csv           iter,residual
//   estimate.json             Monte Carlo verdict counts and interval
//   trajectories.csv          trial,tick,t,x_*,q,clk_*,u_*,status

std::uint64_t file_hash(const std::string& path);

// Largest delta of the form 1/m, m a positive integer, below the bound.
Rational auto_delta(double bound);

struct BuildConfig {
  std::string model_path;
  std::string automaton_path;
  std::vector<double> h;    // one entry per state dimension, or one broadcast entry
  std::string delta_text;   // exact rational, e.g. "1/5" or "0.2"; empty selects automatically
  double epsilon = 0.25;    // input discretization width
  bool override_delta_bound = false;
  bool export_kernel = false;
  // Full coverage keeps simulated trajectories inside the policy table; see
  // ProductCoverage.  "reachable" shrinks artifacts when no simulation follows.
  ProductCoverage coverage = ProductCoverage::full;
};

struct BuildArtifacts {
  ParsedModel parsed;
  TimedAutomaton automaton;
  Grid grid;
  std::vector<Eigen::VectorXd> inputs;
  double delta_bound = 0;
  bool delta_auto = false;
  Rational delta;
  AlignmentReport alignment;
  MarkovKernel kernel;
  KernelBuildStats kernel_stats;
  ConsistencyReport consistency;
  DeterminismReport determinism;
  TickSpace ticks;
  ProductMdp product;
  std::vector<std::string> warnings;
};

// Full synthesis front end: load, validate, discretize, compose.  Throws
// stage-prefixed errors on any validation failure (unless overridden where a
// documented override exists).
BuildArtifacts run_build(const BuildConfig& cfg);

void write_build_outputs(const BuildArtifacts& art, const BuildConfig& cfg,
                         const std::string& out_dir);

ProductMdp load_product_dir(const std::string& dir);

void write_value_csv(const std::string& path, const Eigen::VectorXd& value);
Eigen::VectorXd read_value_csv(const std::string& path, std::int64_t num_states);
void write_policy_csv(const std::string& path, const ProductMdp& mdp,
                      const std::vector<int>& policy);
std::vector<int> read_policy_csv(const std::string& path, const ProductMdp& mdp);
void write_convergence_csv(const std::string& path, const std::vector<double>& residuals);

struct SolveConfig {
  std::string dir;  // directory produced by run_build
  double tol = 1e-9;
  int max_iters = 100000;
  bool gauss_seidel = false;
};

// Loads the product, runs the optimization, writes value/policy/convergence
// and folds the solve summary into manifest.json.  A non-converged result is
// still written (the caller decides how loudly to fail).
SolveResult run_solve(const SolveConfig& cfg);

struct SimulateConfig {
  std::string dir;             // directory produced by run_build + run_solve
  std::string model_path;      // empty: taken from the manifest
  std::string automaton_path;  // empty: taken from the manifest
  int trials = 10000;
  std::uint64_t seed = 1;
  int em_substeps = 10;
  std::int64_t max_ticks = 0;
  int keep_trajectories = 10;
};

// Monte Carlo validation of a synthesized policy against the continuous
// dynamics; writes estimate.json and trajectories.csv.
EstimateReport run_simulate(const SimulateConfig& cfg);

// Builds a reachability automaton from a small staged description and writes
// it as a regular automaton file.
void run_fragment(const std::string& spec_path, const std::string& out_path);

struct CheckReport {
  bool ok = true;
  std::vector<std::string> lines;  // one human-readable line per check
};

// Validation-only pass over a model/automaton pair: parses both, checks label
// alignment, the delta bound, local consistency at the automatic delta, and
// automaton determinism.  Never writes files.
CheckReport run_check(const BuildConfig& cfg);

}  // namespace timedreach
