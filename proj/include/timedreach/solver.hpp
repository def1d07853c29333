#pragma once

#include <Eigen/Core>
#include <vector>

#include "timedreach/dynamics.hpp"
#include "timedreach/product_mdp.hpp"

namespace timedreach {

// Finite input set on an epsilon-net over the input box: each axis is split
// into the fewest uniform cells of width <= epsilon, endpoints included, and
// the axes are combined as a Cartesian product.  A zero-width axis
// contributes its single point.
std::vector<Eigen::VectorXd> discretize_inputs(const std::vector<Interval>& box, double epsilon);

struct SolveOptions {
  double tol = 1e-9;
  int max_iters = 100000;
  bool gauss_seidel = false;  // in-place sweeps; default is synchronous (Jacobi)
  Eigen::VectorXd reward;     // per-state; empty means the unit goal reward
};

struct SolveResult {
  Eigen::VectorXd value;
  std::vector<int> policy;
  bool converged = false;
  int iterations = 0;
  std::vector<double> residuals;  // sup-norm change, one entry per sweep
};

// One synchronous backup: out(s) = r(s) + max_a sum_s' P(s'|s,a) v(s'), with
// the sink pinned at zero.  Returns the sup-norm change; ties between inputs
// resolve to the smallest input id when `policy` is given.
double bellman_backup(const ProductMdp& mdp, const Eigen::VectorXd& reward,
                      const Eigen::VectorXd& v, Eigen::VectorXd& out, std::vector<int>* policy);

// Fixed point of the backup from v = 0; the value at the initial state is the
// maximal probability of reaching a goal state.
SolveResult value_iteration(const ProductMdp& mdp, const SolveOptions& opt = {});

// Greedy policy with respect to an arbitrary value function.
std::vector<int> extract_policy(const ProductMdp& mdp, const Eigen::VectorXd& value);

// Value of a fixed stationary policy, by the same iteration and stopping rule.
SolveResult evaluate_policy(const ProductMdp& mdp, const std::vector<int>& policy,
                            const SolveOptions& opt = {});

}  // namespace timedreach
