#include "timedreach/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace timedreach {

namespace {

constexpr double kBoxTol = 1e-9;

double get_number(const nlohmann::json& j, const std::string& where) {
  if (!j.is_number()) throw ModelError("model: " + where + " must be a number");
  return j.get<double>();
}

std::vector<Interval> parse_intervals(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ModelError("model: " + where + " must be an array of [lo, hi] pairs");
  std::vector<Interval> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2)
      throw ModelError("model: " + where + " entries must be [lo, hi] pairs");
    Interval iv{get_number(e[0], where), get_number(e[1], where)};
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.lo < iv.hi) )
      throw ModelError("model: " + where + " interval [" + std::to_string(iv.lo) + ", " +
                       std::to_string(iv.hi) + "] is empty or unbounded");
    out.push_back(iv);
  }
  return out;
}

}  // namespace

int Labeling::prop_index(const std::string& name) const {
  const auto it = std::find(propositions.begin(), propositions.end(), name);
  return it == propositions.end() ? -1 : static_cast<int>(it - propositions.begin());
}

double SdeModel::wrap(int dim, double v) const {
  const Interval& b = state_box[dim];
  const double w = b.width();
  double t = std::fmod(v - b.lo, w);
  if (t < 0) t += w;
  double r = b.lo + t;
  if (r >= b.hi) r = b.lo;  // fmod dust at the seam
  return r;
}

bool SdeModel::inside(const Eigen::VectorXd& x) const {
  if (x.size() != dim_x) return false;
  for (int i = 0; i < dim_x; ++i) {
    if (periodic[i]) continue;
    const Interval& b = state_box[i];
    const double slack = kBoxTol * std::max(1.0, b.width());
    if (x[i] < b.lo - slack || x[i] > b.hi + slack) return false;
  }
  return true;
}

ParsedModel parse_model(const nlohmann::json& doc) {
  ParsedModel out;
  SdeModel& m = out.model;

  for (const char* key : {"dim", "state_box", "inputs", "drift", "diffusion", "initial_state"})
    if (!doc.contains(key)) throw ModelError(std::string("model: missing key '") + key + "'");

  if (!doc["dim"].is_number_integer() || doc["dim"].get<int>() < 1)
    throw ModelError("model: dim must be a positive integer");
  m.dim_x = doc["dim"].get<int>();

  m.state_box = parse_intervals(doc["state_box"], "state_box");
  if (static_cast<int>(m.state_box.size()) != m.dim_x)
    throw ModelError("model: state_box has " + std::to_string(m.state_box.size()) +
                     " entries, expected dim = " + std::to_string(m.dim_x));

  m.periodic.assign(m.dim_x, false);
  if (doc.contains("periodic")) {
    for (const auto& e : doc["periodic"]) {
      if (!e.is_number_integer()) throw ModelError("model: periodic entries must be dimension indices");
      const int d = e.get<int>();
      if (d < 1 || d > m.dim_x)
        throw ModelError("model: periodic index " + std::to_string(d) + " out of range 1.." +
                         std::to_string(m.dim_x));
      m.periodic[d - 1] = true;
    }
  }

  m.input_box = parse_intervals(doc["inputs"], "inputs");
  m.dim_u = static_cast<int>(m.input_box.size());
  if (m.dim_u < 1) throw ModelError("model: inputs must declare at least one interval");

  std::map<std::string, double> constants;
  if (doc.contains("constants")) {
    for (const auto& [k, v] : doc["constants"].items())
      constants[k] = get_number(v, "constants." + k);
  }

  if (!doc["drift"].is_array() || static_cast<int>(doc["drift"].size()) != m.dim_x)
    throw ModelError("model: drift must list dim expressions");
  for (const auto& e : doc["drift"])
    m.drift.push_back(Expression::parse(e.get<std::string>(), m.dim_x, m.dim_u, constants));

  const auto& g = doc["diffusion"];
  if (!g.is_array() || static_cast<int>(g.size()) != m.dim_x)
    throw ModelError("model: diffusion must have dim rows");
  m.dim_w = static_cast<int>(g[0].size());
  if (m.dim_w < 1) throw ModelError("model: diffusion rows must be non-empty");
  for (const auto& row : g) {
    if (!row.is_array() || static_cast<int>(row.size()) != m.dim_w)
      throw ModelError("model: diffusion rows must all have the same length");
    std::vector<Expression> r;
    for (const auto& e : row) {
      m.diffusion_text.push_back(e.get<std::string>());
      r.push_back(Expression::parse(e.get<std::string>(), m.dim_x, m.dim_u, constants));
    }
    m.diffusion.push_back(std::move(r));
  }
  // Structurally diagonal: square and every off-diagonal entry is literally 0.
  m.diagonal_diffusion = (m.dim_w == m.dim_x);
  if (m.diagonal_diffusion) {
    for (int i = 0; i < m.dim_x && m.diagonal_diffusion; ++i)
      for (int j = 0; j < m.dim_w; ++j)
        if (i != j) {
          const std::string& t = m.diffusion_text[i * m.dim_w + j];
          double v = 0;
          try {
            v = std::stod(t);
          } catch (...) {
            v = 1;  // non-literal entry: treat as possibly nonzero
          }
          if (v != 0) {
            m.diagonal_diffusion = false;
            break;
          }
        }
  }

  const auto& x0 = doc["initial_state"];
  if (!x0.is_array() || static_cast<int>(x0.size()) != m.dim_x)
    throw ModelError("model: initial_state must list dim numbers");
  m.initial_state.resize(m.dim_x);
  for (int i = 0; i < m.dim_x; ++i) m.initial_state[i] = get_number(x0[i], "initial_state");
  if (!m.inside(m.initial_state)) throw ModelError("model: initial_state outside state_box");

  Labeling& lab = out.labeling;
  lab.state_box = m.state_box;
  lab.periodic = m.periodic;
  if (doc.contains("labels")) {
    for (const auto& [name, boxes] : doc["labels"].items()) {
      lab.propositions.push_back(name);  // nlohmann objects iterate sorted by key
      std::vector<Box> region;
      if (!boxes.is_array()) throw ModelError("model: labels." + name + " must be an array of boxes");
      for (const auto& bj : boxes) {
        Box b{parse_intervals(bj, "labels." + name)};
        if (static_cast<int>(b.dims.size()) != m.dim_x)
          throw ModelError("model: labels." + name + " box must have dim intervals");
        for (int i = 0; i < m.dim_x; ++i) {
          const double slack = kBoxTol * std::max(1.0, m.state_box[i].width());
          if (b.dims[i].lo < m.state_box[i].lo - slack || b.dims[i].hi > m.state_box[i].hi + slack)
            throw ModelError("model: labels." + name + " box leaves the state_box on dimension " +
                             std::to_string(i + 1));
        }
        region.push_back(std::move(b));
      }
      lab.regions.push_back(std::move(region));
    }
  }
  if (lab.propositions.size() > 32) throw ModelError("model: at most 32 propositions supported");
  return out;
}

ParsedModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("model: not found: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(std::string("model: ") + e.what());
  }
  return parse_model(doc);
}

Eigen::VectorXd drift_eval(const SdeModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  if (!m.inside(x)) throw DomainError("drift_eval: state outside state_box");
  if (u.size() != m.dim_u) throw DomainError("drift_eval: input dimension mismatch");
  for (int j = 0; j < m.dim_u; ++j) {
    const double slack = kBoxTol * std::max(1.0, m.input_box[j].width());
    if (u[j] < m.input_box[j].lo - slack || u[j] > m.input_box[j].hi + slack)
      throw DomainError("drift_eval: input outside input space");
  }
  Eigen::VectorXd f(m.dim_x);
  for (int i = 0; i < m.dim_x; ++i) f[i] = m.drift[i].eval(x, u);
  return f;
}

Eigen::MatrixXd diffusion_eval(const SdeModel& m, const Eigen::VectorXd& x) {
  if (!m.inside(x)) throw DomainError("diffusion_eval: state outside state_box");
  static const Eigen::VectorXd no_u;
  Eigen::MatrixXd g(m.dim_x, m.dim_w);
  for (int i = 0; i < m.dim_x; ++i)
    for (int j = 0; j < m.dim_w; ++j) g(i, j) = m.diffusion[i][j].eval(x, no_u);
  return g;
}

namespace {

// Half-open membership with the closed-top exception on non-periodic dims.
bool in_region_dim(const Labeling& lab, int dim, const Interval& riv, double v) {
  double hi = riv.hi;
  if (!lab.periodic[dim]) {
    const double top = lab.state_box[dim].hi;
    const double slack = kBoxTol * std::max(1.0, lab.state_box[dim].width());
    if (std::abs(riv.hi - top) <= slack) hi = top + 1.0;  // closed at the outer face
  }
  return v >= riv.lo && v < hi;
}

double wrap_coord(const Labeling& lab, int dim, double v) {
  const Interval& b = lab.state_box[dim];
  const double w = b.width();
  double t = std::fmod(v - b.lo, w);
  if (t < 0) t += w;
  double r = b.lo + t;
  if (r >= b.hi) r = b.lo;
  return r;
}

}  // namespace

SymbolSet label_of(const Labeling& lab, const Eigen::VectorXd& x) {
  SymbolSet s = 0;
  const int n = static_cast<int>(lab.state_box.size());
  for (std::size_t p = 0; p < lab.propositions.size(); ++p) {
    for (const Box& b : lab.regions[p]) {
      bool in = true;
      for (int i = 0; i < n && in; ++i) {
        const double v = lab.periodic[i] ? wrap_coord(lab, i, x[i]) : x[i];
        in = in_region_dim(lab, i, b.dims[i], v);
      }
      if (in) {
        s |= (SymbolSet{1} << p);
        break;
      }
    }
  }
  return s;
}

std::string symbol_str(const Labeling& lab, SymbolSet s) {
  std::string out = "{";
  bool first = true;
  for (std::size_t p = 0; p < lab.propositions.size(); ++p) {
    if (s & (SymbolSet{1} << p)) {
      if (!first) out += ",";
      out += lab.propositions[p];
      first = false;
    }
  }
  return out + "}";
}

EmResult em_step(const SdeModel& m, const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                 double dt, const Eigen::VectorXd& noise) {
  if (noise.size() != m.dim_w) throw DomainError("em_step: noise dimension mismatch");
  if (!(dt > 0)) throw DomainError("em_step: dt must be positive");
  const Eigen::VectorXd f = drift_eval(m, x, u);
  const Eigen::MatrixXd g = diffusion_eval(m, x);
  EmResult r;
  r.x = x + f * dt + g * (std::sqrt(dt) * noise);
  for (int i = 0; i < m.dim_x; ++i) {
    if (m.periodic[i]) {
      r.x[i] = m.wrap(i, r.x[i]);
    } else {
      const Interval& b = m.state_box[i];
      if (r.x[i] < b.lo) {
        r.x[i] = b.lo;
        r.hit_boundary = true;
      } else if (r.x[i] > b.hi) {
        r.x[i] = b.hi;
        r.hit_boundary = true;
      }
    }
  }
  return r;
}

}  // namespace timedreach
