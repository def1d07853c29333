#include "timedreach/markov_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace timedreach {

namespace {

void require_diagonal(const SdeModel& m) {
  if (!m.diagonal_diffusion)
    throw std::invalid_argument(
        "kernel: construction requires a square, structurally diagonal diffusion matrix");
}

// Diagonal of gg' at x.
Eigen::VectorXd diffusion_diag(const SdeModel& m, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd g = diffusion_eval(m, x);
  return (g * g.transpose()).diagonal();
}

}  // namespace

double max_delta(const SdeModel& m, const Grid& grid, const std::vector<Eigen::VectorXd>& inputs) {
  require_diagonal(m);
  if (inputs.empty()) throw std::invalid_argument("kernel: empty input set");
  const int n = grid.dims();
  double worst_denom = 0;
  for (std::int64_t id = 0; id < grid.num_points(); ++id) {
    const Eigen::VectorXd x = grid.point(id);
    const Eigen::VectorXd gg = diffusion_diag(m, x);
    for (const Eigen::VectorXd& u : inputs) {
      const Eigen::VectorXd f = drift_eval(m, x, u);
      double denom = 0;
      for (int i = 0; i < n; ++i)
        denom += gg[i] / (grid.h[i] * grid.h[i]) + std::abs(f[i]) / grid.h[i];
      worst_denom = std::max(worst_denom, denom);
    }
  }
  if (worst_denom == 0)
    throw std::invalid_argument("kernel: drift and diffusion vanish everywhere, no admissible delta");
  return 1.0 / worst_denom;
}

MarkovKernel build_kernel(const SdeModel& m, const Grid& grid,
                          const std::vector<Eigen::VectorXd>& inputs, const Rational& delta,
                          bool allow_oversized_delta, KernelBuildStats* stats) {
  require_diagonal(m);
  if (!delta.positive()) throw std::invalid_argument("kernel: delta must be positive");
  if (inputs.empty()) throw std::invalid_argument("kernel: empty input set");

  const int n = grid.dims();
  const double dt = delta.to_double();
  MarkovKernel k;
  k.num_states = grid.num_points();
  k.num_inputs = static_cast<int>(inputs.size());
  k.delta = delta;
  k.row_ptr.reserve(k.num_states * k.num_inputs + 1);
  k.row_ptr.push_back(0);

  std::vector<std::pair<std::int64_t, double>> entries;
  for (std::int64_t id = 0; id < k.num_states; ++id) {
    const std::vector<int> idx = grid.unflatten(id);
    const Eigen::VectorXd x = grid.point(id);
    const Eigen::VectorXd gg = diffusion_diag(m, x);
    for (int a = 0; a < k.num_inputs; ++a) {
      const Eigen::VectorXd f = drift_eval(m, x, inputs[a]);
      entries.clear();
      double outgoing = 0;
      for (int i = 0; i < n; ++i) {
        const double diff = gg[i] / (2 * grid.h[i] * grid.h[i]);
        const double up = dt * (diff + std::max(f[i], 0.0) / grid.h[i]);
        const double dn = dt * (diff + std::max(-f[i], 0.0) / grid.h[i]);
        outgoing += up + dn;
        if (up > 0) {
          std::vector<int> t = idx;
          t[i] = grid.neighbor_index(idx[i], i, +1);
          entries.emplace_back(grid.flatten(t), up);
        }
        if (dn > 0) {
          std::vector<int> t = idx;
          t[i] = grid.neighbor_index(idx[i], i, -1);
          entries.emplace_back(grid.flatten(t), dn);
        }
      }
      double self = 1.0 - outgoing;
      if (self < -1e-15) {
        if (!allow_oversized_delta) throw DeltaBoundError(id, a, 1.0 / (outgoing / dt));
        if (stats) {
          ++stats->renormalized_rows;
          stats->worst_row_deficit = std::min(stats->worst_row_deficit, self);
        }
        for (auto& e : entries) e.second /= outgoing;
        self = 0;
      } else if (self < 0) {
        self = 0;  // rounding dust at the exact bound
      }
      if (self > 0) entries.emplace_back(id, self);

      std::sort(entries.begin(), entries.end());
      std::int64_t prev = -1;
      for (const auto& [s, p] : entries) {
        if (s == prev) {
          k.prob.back() += p;  // boundary redirects can collide
        } else {
          k.succ.push_back(s);
          k.prob.push_back(p);
          prev = s;
        }
      }
      k.row_ptr.push_back(static_cast<std::int64_t>(k.succ.size()));
    }
  }
  return k;
}

ConsistencyReport audit_local_consistency(const MarkovKernel& k, const SdeModel& m,
                                          const Grid& grid,
                                          const std::vector<Eigen::VectorXd>& inputs) {
  require_diagonal(m);
  const int n = grid.dims();
  const double dt = k.delta.to_double();
  ConsistencyReport rep;

  for (std::int64_t id = 0; id < k.num_states; ++id) {
    const std::vector<int> idx = grid.unflatten(id);
    bool interior = true;
    for (int i = 0; i < n && interior; ++i)
      if (!grid.periodic[i] && (idx[i] == 0 || idx[i] == grid.count[i] - 1)) interior = false;
    if (!interior) continue;

    const Eigen::VectorXd x = grid.point(id);
    const Eigen::VectorXd gg = diffusion_diag(m, x);
    for (int a = 0; a < k.num_inputs; ++a) {
      const Eigen::VectorXd f = drift_eval(m, x, inputs[a]);
      const MarkovKernel::Row row = k.row(id, a);

      Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd second = Eigen::VectorXd::Zero(n);
      double sum = 0;
      for (std::int64_t e = 0; e < row.size; ++e) {
        sum += row.prob[e];
        const std::vector<int> sidx = grid.unflatten(row.succ[e]);
        for (int i = 0; i < n; ++i) {
          int di = sidx[i] - idx[i];
          if (grid.periodic[i]) {  // wrap-aware displacement, steps are +-1 cell
            if (di > grid.count[i] / 2) di -= grid.count[i];
            if (di < -grid.count[i] / 2) di += grid.count[i];
          }
          const double dx = di * grid.h[i];
          mean[i] += row.prob[e] * dx;
          second[i] += row.prob[e] * dx * dx;
        }
      }
      rep.worst_row_sum_err = std::max(rep.worst_row_sum_err, std::abs(sum - 1.0));
      for (int i = 0; i < n; ++i) {
        const double want_mean = dt * f[i];
        const double want_var =
            dt * gg[i] + dt * grid.h[i] * std::abs(f[i]) - dt * dt * f[i] * f[i];
        const double var = second[i] - mean[i] * mean[i];
        rep.worst_mean_err = std::max(rep.worst_mean_err, std::abs(mean[i] - want_mean));
        rep.worst_var_err = std::max(rep.worst_var_err, std::abs(var - want_var));
      }
      ++rep.interior_pairs;
    }
  }
  return rep;
}

void export_kernel_csv(const MarkovKernel& k, std::ostream& out) {
  out << "state_id,input_id,succ_id,prob\n";
  char buf[32];
  for (std::int64_t s = 0; s < k.num_states; ++s) {
    for (int a = 0; a < k.num_inputs; ++a) {
      const MarkovKernel::Row row = k.row(s, a);
      for (std::int64_t e = 0; e < row.size; ++e) {
        std::snprintf(buf, sizeof buf, "%.17g", row.prob[e]);
        out << s << ',' << a << ',' << row.succ[e] << ',' << buf << '\n';
      }
    }
  }
}

}  // namespace timedreach
