#include "timedreach/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace timedreach {

namespace {
constexpr double kDivTol = 1e-9;  // relative tolerance for h dividing the box
}

std::vector<int> Grid::unflatten(std::int64_t id) const {
  std::vector<int> idx(count.size());
  for (int d = dims() - 1; d >= 0; --d) {
    idx[d] = static_cast<int>(id % count[d]);
    id /= count[d];
  }
  return idx;
}

std::int64_t Grid::flatten(const std::vector<int>& idx) const {
  std::int64_t id = 0;
  for (int d = 0; d < dims(); ++d) id = id * count[d] + idx[d];
  return id;
}

Eigen::VectorXd Grid::point(std::int64_t id) const {
  const std::vector<int> idx = unflatten(id);
  Eigen::VectorXd x(dims());
  for (int d = 0; d < dims(); ++d) x[d] = lo[d] + idx[d] * h[d];
  return x;
}

std::int64_t Grid::snap(const Eigen::VectorXd& x) const {
  std::vector<int> idx(count.size());
  for (int d = 0; d < dims(); ++d) {
    double v = x[d];
    if (periodic[d]) {
      const double w = count[d] * h[d];
      double t = std::fmod(v - lo[d], w);
      if (t < 0) t += w;
      int i = static_cast<int>(std::floor(t / h[d] + kDivTol));
      if (i >= count[d]) i = 0;  // seam dust wraps
      idx[d] = i;
    } else {
      int i = static_cast<int>(std::floor((v - lo[d]) / h[d] + kDivTol));
      idx[d] = std::clamp(i, 0, count[d] - 1);
    }
  }
  return flatten(idx);
}

int Grid::neighbor_index(int idx, int dim, int dir) const {
  int i = idx + dir;
  if (periodic[dim]) {
    if (i < 0) i += count[dim];
    if (i >= count[dim]) i -= count[dim];
    return i;
  }
  return std::clamp(i, 0, count[dim] - 1);
}

Grid build_grid(const SdeModel& m, const std::vector<double>& h) {
  if (static_cast<int>(h.size()) != m.dim_x)
    throw std::invalid_argument("grid: h must have one entry per state dimension");
  Grid g;
  for (int d = 0; d < m.dim_x; ++d) {
    if (!(h[d] > 0)) throw std::invalid_argument("grid: h must be positive");
    const double width = m.state_box[d].width();
    const double ratio = width / h[d];
    const double r = std::round(ratio);
    if (r < 1 || std::abs(ratio - r) > kDivTol * std::max(1.0, ratio))
      throw std::invalid_argument("grid: h = " + std::to_string(h[d]) +
                                  " does not divide the box width on dimension " +
                                  std::to_string(d + 1));
    g.lo.push_back(m.state_box[d].lo);
    g.h.push_back(h[d]);
    g.periodic.push_back(m.periodic[d]);
    g.count.push_back(static_cast<int>(r) + (m.periodic[d] ? 0 : 1));
  }
  return g;
}

namespace {

struct DimIv {
  double lo, hi;
};

// Region boxes in "extended" coordinates: a face on the state-box top of a
// non-periodic dimension is pushed past the last cell so plain half-open
// interval tests apply uniformly (the outermost point belongs to it).
std::vector<std::vector<DimIv>> extended_region(const Labeling& lab, int prop, const Grid& grid) {
  std::vector<std::vector<DimIv>> out;
  for (const Box& b : lab.regions[prop]) {
    std::vector<DimIv> ivs;
    for (int d = 0; d < grid.dims(); ++d) {
      double hi = b.dims[d].hi;
      if (!lab.periodic[d]) {
        const double top = lab.state_box[d].hi;
        if (std::abs(hi - top) <= 1e-9 * std::max(1.0, lab.state_box[d].width()))
          hi = top + grid.h[d];
      }
      ivs.push_back({b.dims[d].lo, hi});
    }
    out.push_back(std::move(ivs));
  }
  return out;
}

bool point_in(const std::vector<std::vector<DimIv>>& boxes, const std::vector<double>& p) {
  for (const auto& b : boxes) {
    bool in = true;
    for (std::size_t d = 0; d < p.size() && in; ++d)
      in = p[d] >= b[d].lo && p[d] < b[d].hi;
    if (in) return true;
  }
  return false;
}

}  // namespace

AlignmentReport check_label_alignment(const Labeling& lab, const Grid& grid) {
  AlignmentReport rep;
  const int n = grid.dims();
  const std::int64_t npts = grid.num_points();

  for (std::size_t p = 0; p < lab.propositions.size(); ++p) {
    const auto boxes = extended_region(lab, static_cast<int>(p), grid);
    for (std::int64_t id = 0; id < npts; ++id) {
      const std::vector<int> idx = grid.unflatten(id);
      std::vector<DimIv> cell(n);
      for (int d = 0; d < n; ++d) {
        cell[d].lo = grid.lo[d] + idx[d] * grid.h[d];
        cell[d].hi = cell[d].lo + grid.h[d];
      }
      // Quick classification against each box, then an exact arrangement
      // test for cells that partially overlap the union.
      bool any_overlap = false, covered = false;
      for (const auto& b : boxes) {
        bool overlap = true, cover = true;
        for (int d = 0; d < n; ++d) {
          overlap = overlap && std::max(cell[d].lo, b[d].lo) < std::min(cell[d].hi, b[d].hi);
          cover = cover && b[d].lo <= cell[d].lo + 1e-12 && cell[d].hi <= b[d].hi + 1e-12;
        }
        any_overlap = any_overlap || overlap;
        covered = covered || cover;
      }
      if (!any_overlap || covered) continue;

      // Arrangement: cut the cell along every box edge crossing it, then
      // sample one interior point per sub-cell.
      std::vector<std::vector<double>> cuts(n);
      for (int d = 0; d < n; ++d) {
        cuts[d].push_back(cell[d].lo);
        cuts[d].push_back(cell[d].hi);
        for (const auto& b : boxes) {
          for (double e : {b[d].lo, b[d].hi})
            if (e > cell[d].lo + 1e-12 && e < cell[d].hi - 1e-12) cuts[d].push_back(e);
        }
        std::sort(cuts[d].begin(), cuts[d].end());
        cuts[d].erase(std::unique(cuts[d].begin(), cuts[d].end(),
                                  [](double a, double b) { return std::abs(a - b) <= 1e-12; }),
                      cuts[d].end());
      }
      std::vector<int> sub(n, 0);
      std::vector<double> mid(n);
      bool seen_in = false, seen_out = false;
      for (;;) {
        for (int d = 0; d < n; ++d) mid[d] = 0.5 * (cuts[d][sub[d]] + cuts[d][sub[d] + 1]);
        (point_in(boxes, mid) ? seen_in : seen_out) = true;
        if (seen_in && seen_out) break;
        int d = n - 1;
        while (d >= 0 && sub[d] + 2 >= static_cast<int>(cuts[d].size())) {
          sub[d] = 0;
          --d;
        }
        if (d < 0) break;
        ++sub[d];
      }
      if (seen_in && seen_out) {
        rep.ok = false;
        rep.violations.push_back({id, static_cast<int>(p)});
      }
    }
  }
  return rep;
}

}  // namespace timedreach
