#include "timedreach/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace timedreach {

std::vector<Eigen::VectorXd> discretize_inputs(const std::vector<Interval>& box, double epsilon) {
  if (epsilon <= 0) throw std::invalid_argument("inputs: epsilon must be positive");
  const int m = static_cast<int>(box.size());
  std::vector<std::vector<double>> axis(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double w = box[static_cast<std::size_t>(i)].width();
    if (w < 0) throw std::invalid_argument("inputs: empty input interval");
    // smallest cell count with width/cells <= epsilon; tolerate exact fits
    const int cells = w == 0 ? 0 : static_cast<int>(std::ceil(w / epsilon - 1e-9));
    auto& pts = axis[static_cast<std::size_t>(i)];
    if (cells == 0) {
      pts.push_back(box[static_cast<std::size_t>(i)].lo);
    } else {
      for (int k = 0; k <= cells; ++k)
        pts.push_back(box[static_cast<std::size_t>(i)].lo + w * k / cells);
    }
  }
  std::vector<Eigen::VectorXd> out;
  Eigen::VectorXd u(m);
  std::vector<std::size_t> at(static_cast<std::size_t>(m), 0);
  while (true) {
    for (int i = 0; i < m; ++i) u[i] = axis[static_cast<std::size_t>(i)][at[static_cast<std::size_t>(i)]];
    out.push_back(u);
    int d = m - 1;
    for (; d >= 0; --d) {
      if (++at[static_cast<std::size_t>(d)] < axis[static_cast<std::size_t>(d)].size()) break;
      at[static_cast<std::size_t>(d)] = 0;
    }
    if (d < 0) break;
  }
  return out;
}

double bellman_backup(const ProductMdp& mdp, const Eigen::VectorXd& reward,
                      const Eigen::VectorXd& v, Eigen::VectorXd& out, std::vector<int>* policy) {
  const std::int64_t n = mdp.num_states();
  out.resize(n);
  if (policy) policy->assign(static_cast<std::size_t>(n), 0);
  double residual = 0;
  for (std::int64_t s = 0; s < n; ++s) {
    double nv;
    if (s == mdp.sink_id) {
      nv = 0;
    } else {
      double best = -1;
      int best_in = 0;
      for (int in = 0; in < mdp.num_inputs; ++in) {
        const auto row = mdp.row(s, in);
        double q = 0;
        for (std::int64_t e = 0; e < row.size; ++e) q += row.prob[e] * v[row.succ[e]];
        if (q > best) {
          best = q;
          best_in = in;
        }
      }
      nv = reward[s] + best;
      if (policy) (*policy)[static_cast<std::size_t>(s)] = best_in;
    }
    residual = std::max(residual, std::abs(nv - v[s]));
    out[s] = nv;
  }
  return residual;
}

namespace {

Eigen::VectorXd default_reward(const ProductMdp& mdp) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(mdp.num_states());
  for (std::int64_t s = 0; s < mdp.num_states(); ++s)
    if (mdp.goal[static_cast<std::size_t>(s)]) r[s] = 1;
  return r;
}

// Shared loop for optimization (policy == nullptr) and evaluation.
SolveResult iterate(const ProductMdp& mdp, const SolveOptions& opt,
                    const std::vector<int>* fixed_policy) {
  const std::int64_t n = mdp.num_states();
  const Eigen::VectorXd reward = opt.reward.size() ? opt.reward : default_reward(mdp);
  if (reward.size() != n) throw std::invalid_argument("solver: reward length mismatch");
  if (fixed_policy && static_cast<std::int64_t>(fixed_policy->size()) != n)
    throw std::invalid_argument("solver: policy length mismatch");

  SolveResult res;
  res.value = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd next(n);
  for (int it = 0; it < opt.max_iters; ++it) {
    double residual = 0;
    Eigen::VectorXd& dst = opt.gauss_seidel ? res.value : next;
    for (std::int64_t s = 0; s < n; ++s) {
      double nv;
      if (s == mdp.sink_id) {
        nv = 0;
      } else if (fixed_policy) {
        const auto row = mdp.row(s, (*fixed_policy)[static_cast<std::size_t>(s)]);
        double q = 0;
        for (std::int64_t e = 0; e < row.size; ++e) q += row.prob[e] * res.value[row.succ[e]];
        nv = reward[s] + q;
      } else {
        double best = -1;
        for (int in = 0; in < mdp.num_inputs; ++in) {
          const auto row = mdp.row(s, in);
          double q = 0;
          for (std::int64_t e = 0; e < row.size; ++e) q += row.prob[e] * res.value[row.succ[e]];
          best = std::max(best, q);
        }
        nv = reward[s] + best;
      }
      residual = std::max(residual, std::abs(nv - res.value[s]));
      dst[s] = nv;
    }
    if (!opt.gauss_seidel) res.value.swap(next);
    res.residuals.push_back(residual);
    res.iterations = it + 1;
    if (residual <= opt.tol) {
      res.converged = true;
      break;
    }
  }
  if (fixed_policy)
    res.policy = *fixed_policy;
  else
    res.policy = extract_policy(mdp, res.value);
  return res;
}

}  // namespace

SolveResult value_iteration(const ProductMdp& mdp, const SolveOptions& opt) {
  return iterate(mdp, opt, nullptr);
}

std::vector<int> extract_policy(const ProductMdp& mdp, const Eigen::VectorXd& value) {
  std::vector<int> policy(static_cast<std::size_t>(mdp.num_states()), 0);
  for (std::int64_t s = 0; s < mdp.num_states(); ++s) {
    if (s == mdp.sink_id) continue;
    double best = -1;
    for (int in = 0; in < mdp.num_inputs; ++in) {
      const auto row = mdp.row(s, in);
      double q = 0;
      for (std::int64_t e = 0; e < row.size; ++e) q += row.prob[e] * value[row.succ[e]];
      if (q > best) {  // strict: ties keep the smallest input id
        best = q;
        policy[static_cast<std::size_t>(s)] = in;
      }
    }
  }
  return policy;
}

SolveResult evaluate_policy(const ProductMdp& mdp, const std::vector<int>& policy,
                            const SolveOptions& opt) {
  return iterate(mdp, opt, &policy);
}

}  // namespace timedreach
