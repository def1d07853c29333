#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "timedreach/dynamics.hpp"

namespace timedreach {

// Uniform grid over the model's state box.  Non-periodic dimensions carry
// points lo, lo+h, ..., hi (h must divide the width); periodic dimensions
// drop the duplicate seam point.  Point i represents the half-open cell
// [x_i, x_i + h); the outermost face of the box belongs to the last cell.
struct Grid {
  std::vector<double> lo;
  std::vector<double> h;
  std::vector<int> count;
  std::vector<bool> periodic;

  int dims() const { return static_cast<int>(count.size()); }

  std::int64_t num_points() const {
    std::int64_t n = 1;
    for (int c : count) n *= c;
    return n;
  }

  std::vector<int> unflatten(std::int64_t id) const;
  std::int64_t flatten(const std::vector<int>& idx) const;
  Eigen::VectorXd point(std::int64_t id) const;

  // Cell containing x (wraps periodic coordinates, clamps the rest).
  std::int64_t snap(const Eigen::VectorXd& x) const;

  // Index of the neighbor one step along `dim`; periodic wraps, non-periodic
  // sticks at the boundary (returns the same index).
  int neighbor_index(int idx, int dim, int dir) const;
};

Grid build_grid(const SdeModel& m, const std::vector<double>& h);

struct AlignmentViolation {
  std::int64_t cell = 0;
  int prop = 0;
};

struct AlignmentReport {
  bool ok = true;
  std::vector<AlignmentViolation> violations;
};

// Verifies that every grid cell is label-homogeneous: each proposition's
// region either covers the whole cell or misses it entirely.  Exact for
// unions of axis-aligned boxes (arrangement midpoint test per cell).
AlignmentReport check_label_alignment(const Labeling& lab, const Grid& grid);

}  // namespace timedreach
