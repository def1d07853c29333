#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "timedreach/expression.hpp"

namespace timedreach {

struct Interval {
  double lo = 0;
  double hi = 0;
  double width() const { return hi - lo; }
};

// Set of atomic propositions holding at a point, as a bitmask over the
// labeling's proposition order (at most 32 propositions).
using SymbolSet = std::uint32_t;

struct Box {
  std::vector<Interval> dims;
};

// Proposition regions: unions of axis-aligned boxes.  Membership is half-open
// ([lo, hi) per dimension) so that adjacent regions never double-label a
// point, except that a box face coinciding with the state-box upper bound on
// a non-periodic dimension is closed (the outermost point belongs to it).
struct Labeling {
  std::vector<std::string> propositions;       // sorted, defines bit order
  std::vector<std::vector<Box>> regions;       // per proposition
  std::vector<Interval> state_box;             // copied from the model
  std::vector<bool> periodic;

  int prop_index(const std::string& name) const;  // -1 when absent
};

// Controlled SDE  dx = f(x,u) dt + g(x) dW  on a box, some dimensions
// periodic.  Drift/diffusion entries are expressions over x1..xn, u1..um.
struct SdeModel {
  int dim_x = 0;
  int dim_w = 0;
  int dim_u = 0;
  std::vector<Interval> state_box;   // n entries
  std::vector<bool> periodic;        // n entries
  std::vector<Interval> input_box;   // m entries
  std::vector<Expression> drift;     // n entries
  std::vector<std::vector<Expression>> diffusion;  // n x k
  std::vector<std::string> diffusion_text;         // row-major source text
  bool diagonal_diffusion = false;   // structurally diagonal (n == k, off-diag "0")
  Eigen::VectorXd initial_state;

  // Wraps periodic coordinates into [lo, lo+period) and reports whether a
  // non-periodic coordinate lies inside the box (within tolerance).
  double wrap(int dim, double v) const;
  bool inside(const Eigen::VectorXd& x) const;
};

struct ParsedModel {
  SdeModel model;
  Labeling labeling;
};

// Document errors carry the failing key / context in the message.
struct ModelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when an evaluation argument escapes its declared domain.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ParsedModel parse_model(const nlohmann::json& doc);
ParsedModel load_model_file(const std::string& path);

Eigen::VectorXd drift_eval(const SdeModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& u);
Eigen::MatrixXd diffusion_eval(const SdeModel& m, const Eigen::VectorXd& x);

SymbolSet label_of(const Labeling& lab, const Eigen::VectorXd& x);
std::string symbol_str(const Labeling& lab, SymbolSet s);

struct EmResult {
  Eigen::VectorXd x;
  bool hit_boundary = false;  // some non-periodic coordinate was clamped
};

// One explicit Euler-Maruyama step of length dt driven by `noise` (k standard
// normal draws).  Periodic coordinates wrap; the rest clamp to the box.
EmResult em_step(const SdeModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                 double dt, const Eigen::VectorXd& noise);

}  // namespace timedreach
