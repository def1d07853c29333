#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "timedreach/dynamics.hpp"
#include "timedreach/grid.hpp"
#include "timedreach/product_mdp.hpp"
#include "timedreach/timed_automaton.hpp"

namespace timedreach {

enum class RunStatus { accepted, rejected, timeout };
const char* run_status_str(RunStatus s);

struct TrajectoryStep {
  std::int64_t tick = 0;
  Eigen::VectorXd x;                // continuous state at t = tick * delta
  int q = 0;                        // location after reading this sample
  std::vector<std::int64_t> ticks;  // discretized clocks after this sample
  int input = -1;                   // input id held over the next period; -1 on the last row
};

struct TrajectoryRecord {
  std::vector<TrajectoryStep> steps;
  RunStatus status = RunStatus::timeout;
  bool policy_miss = false;  // trajectory left the policy's state coverage
};

struct RunOptions {
  int em_substeps = 10;        // integrator steps per sample period
  std::int64_t max_ticks = 0;  // 0: twice the largest clock cap, plus slack
};

// Independent, reproducible stream for one trial of one experiment.
std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial);

// Closed-loop rollout of a synthesized policy on the original dynamics: the
// continuous state is sampled every delta, labeled, fed to the monitor
// automaton, and the input for the next period is looked up in the policy at
// the product state of the snapped cell.  A product state never constructed
// during synthesis counts as a policy miss and the run is scored rejected.
TrajectoryRecord run_policy_trajectory(const SdeModel& model, const Labeling& lab,
                                       const Grid& grid, const TimedAutomaton& a,
                                       const TickSpace& ts, const ProductMdp& mdp,
                                       const std::vector<int>& policy, const Eigen::VectorXd& x0,
                                       std::mt19937_64& rng, const RunOptions& opt = {});

struct EstimateReport {
  int trials = 0;
  int accepted = 0;
  int rejected = 0;
  int timeouts = 0;
  int policy_misses = 0;
  double p_hat = 0;
  double half_width = 0;  // normal-approximation 95% interval
};

// Repeated rollouts with per-trial streams derived from `seed`; optionally
// keeps the first `keep_first` full records for export.
EstimateReport monte_carlo_estimate(const SdeModel& model, const Labeling& lab, const Grid& grid,
                                    const TimedAutomaton& a, const TickSpace& ts,
                                    const ProductMdp& mdp, const std::vector<int>& policy,
                                    const Eigen::VectorXd& x0, int trials, std::uint64_t seed,
                                    const RunOptions& opt = {},
                                    std::vector<TrajectoryRecord>* keep = nullptr,
                                    int keep_first = 0);

// Offline re-check of a finished rollout from its label sequence alone; must
// agree with the online monitor whenever the run settled.
Verdict point_based_check(const TimedAutomaton& a, const std::vector<SymbolSet>& labels,
                          const Rational& delta);

struct ChainEstimate {
  int trials = 0;
  int accepted = 0;
  double p_hat = 0;
  double half_width = 0;
};

// Rollouts of the product chain itself (no dynamics): the sampled acceptance
// frequency must match the solved value of the initial state.
ChainEstimate simulate_product_chain(const ProductMdp& mdp, const std::vector<int>& policy,
                                     int trials, std::uint64_t seed, std::int64_t max_steps = 0);

void export_trajectories_csv(const std::vector<TrajectoryRecord>& records, const ProductMdp& mdp,
                             std::ostream& out);

}  // namespace timedreach
