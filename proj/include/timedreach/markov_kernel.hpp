#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "timedreach/grid.hpp"
#include "timedreach/rational.hpp"

namespace timedreach {

// One-step transition kernel of the approximating chain, stored as compressed
// rows keyed by (state, input).  Every row is a probability distribution.
struct MarkovKernel {
  std::int64_t num_states = 0;
  int num_inputs = 0;
  Rational delta;  // sample period, exact

  std::vector<std::int64_t> row_ptr;  // num_states * num_inputs + 1
  std::vector<std::int64_t> succ;
  std::vector<double> prob;

  struct Row {
    const std::int64_t* succ;
    const double* prob;
    std::int64_t size;
  };
  Row row(std::int64_t state, int input) const {
    const std::int64_t r = state * num_inputs + input;
    return {succ.data() + row_ptr[r], prob.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
};

// Raised when the sample period makes some stay-put probability negative.
struct DeltaBoundError : std::runtime_error {
  std::int64_t state;
  int input;
  double bound;
  DeltaBoundError(std::int64_t s, int a, double b)
      : std::runtime_error("kernel: delta too large at state " + std::to_string(s) + ", input " +
                           std::to_string(a) + "; largest admissible delta is " +
                           std::to_string(b)),
        state(s),
        input(a),
        bound(b) {}
};

// Largest admissible sample period: min over grid points and inputs of
// 1 / sum_i [ (gg')_ii / h_i^2 + |f_i(x,a)| / h_i ].
double max_delta(const SdeModel& m, const Grid& grid, const std::vector<Eigen::VectorXd>& inputs);

struct KernelBuildStats {
  std::int64_t renormalized_rows = 0;  // rows clamped under an oversized delta
  double worst_row_deficit = 0;        // most negative stay-put probability seen
};

// Builds the locally consistent kernel for diagonal diffusion:
//   P(x, a, x +- h_i e_i) = delta * [ (gg')_ii / (2 h_i^2) + f_i^{+-}(x,a)/h_i ]
//   P(x, a, x)            = 1 - delta * sum_i [ (gg')_ii / h_i^2 + |f_i(x,a)|/h_i ]
// Probability mass leaving the box is redirected to the boundary point.
// With allow_oversized_delta, rows whose stay-put probability goes negative
// are clamped at zero and renormalized; otherwise that raises DeltaBoundError.
MarkovKernel build_kernel(const SdeModel& m, const Grid& grid,
                          const std::vector<Eigen::VectorXd>& inputs, const Rational& delta,
                          bool allow_oversized_delta = false, KernelBuildStats* stats = nullptr);

struct ConsistencyReport {
  std::int64_t interior_pairs = 0;
  double worst_mean_err = 0;  // max |E[dx_i] - delta f_i|
  double worst_var_err = 0;   // max |Var[dx_i] - (delta (gg')_ii + delta h_i |f_i| - delta^2 f_i^2)|
  double worst_row_sum_err = 0;
};

// Checks the one-step moments of every interior (state, input) pair against
// the closed forms above.
ConsistencyReport audit_local_consistency(const MarkovKernel& k, const SdeModel& m,
                                          const Grid& grid,
                                          const std::vector<Eigen::VectorXd>& inputs);

void export_kernel_csv(const MarkovKernel& k, std::ostream& out);

}  // namespace timedreach
