#include "timedreach/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "timedreach/hash.hpp"

namespace timedreach {

namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("io: cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("io: cannot read '" + path + "'");
  return in;
}

nlohmann::json read_json(const std::string& path, const std::string& stage) {
  auto in = open_in(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(stage + ": bad json in '" + path + "': " + e.what());
  }
  return doc;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string join_path(const std::string& dir, const char* name) {
  return (fs::path(dir) / name).string();
}

}  // namespace

std::uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("io: cannot read '" + path + "'");
  char buf[1 << 16];
  std::uint64_t h = 0xcbf29ce484222325ULL;
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

Rational auto_delta(double bound) {
  if (!(bound > 0)) throw std::invalid_argument("kernel: stability bound must be positive");
  auto m = static_cast<std::int64_t>(std::ceil(1.0 / bound - 1e-12));
  if (m < 1) m = 1;
  while (1.0 / static_cast<double>(m) > bound * (1 + 1e-12)) ++m;
  return Rational(1, m);
}

BuildArtifacts run_build(const BuildConfig& cfg) {
  BuildArtifacts art;
  art.parsed = load_model_file(cfg.model_path);
  const SdeModel& model = art.parsed.model;
  art.automaton = TimedAutomaton::load_file(cfg.automaton_path);

  std::vector<double> h = cfg.h;
  if (h.size() == 1 && model.dim_x > 1) h.assign(static_cast<std::size_t>(model.dim_x), h[0]);
  art.grid = build_grid(model, h);

  art.alignment = check_label_alignment(art.parsed.labeling, art.grid);
  if (!art.alignment.ok) {
    const auto& v = art.alignment.violations.front();
    throw ModelError("grid: proposition '" + art.parsed.labeling.propositions[static_cast<std::size_t>(v.prop)] +
                     "' is not aligned with the grid (cell " + std::to_string(v.cell) + ")");
  }

  art.inputs = discretize_inputs(model.input_box, cfg.epsilon);
  art.delta_bound = max_delta(model, art.grid, art.inputs);

  if (cfg.delta_text.empty()) {
    art.delta = auto_delta(art.delta_bound);
    art.delta_auto = true;
  } else {
    try {
      art.delta = parse_rational(cfg.delta_text);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(std::string("kernel: ") + e.what());
    }
    if (!art.delta.positive()) throw std::runtime_error("kernel: delta must be positive");
  }

  const bool oversized = art.delta.to_double() > art.delta_bound * (1 + 1e-12) + 1e-300;
  if (oversized && !cfg.override_delta_bound)
    throw std::runtime_error("kernel: delta " + art.delta.str() + " (= " +
                             fmt17(art.delta.to_double()) + ") exceeds the stability bound " +
                             fmt17(art.delta_bound) +
                             "; pick a smaller delta or pass --override-delta-bound to clamp "
                             "and renormalize the affected rows");
  if (oversized)
    art.warnings.push_back("kernel: delta " + art.delta.str() + " exceeds the stability bound " +
                           fmt17(art.delta_bound) +
                           "; stay-put weights were clamped at zero and the affected rows "
                           "renormalized, so the chain runs on a distorted time scale");

  art.kernel = build_kernel(model, art.grid, art.inputs, art.delta, cfg.override_delta_bound,
                            &art.kernel_stats);
  art.consistency = audit_local_consistency(art.kernel, model, art.grid, art.inputs);

  art.determinism = check_determinism(art.automaton);
  if (!art.determinism.ok) {
    const auto& v = art.determinism.violations.front();
    throw AutomatonError("automaton: nondeterministic at location '" +
                         art.automaton.location_name(v.q) + "': edges " + std::to_string(v.edge_a) +
                         " and " + std::to_string(v.edge_b) + " are enabled together");
  }

  art.ticks = discretize_clocks(art.automaton, art.delta);
  art.product = build_product(art.kernel, art.automaton, art.ticks, art.parsed.labeling, art.grid,
                              art.inputs, model.initial_state, cfg.coverage);
  return art;
}

void write_build_outputs(const BuildArtifacts& art, const BuildConfig& cfg,
                         const std::string& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw std::runtime_error("io: cannot create '" + out_dir + "': " + ec.message());

  export_product(art.product, join_path(out_dir, "product_header.json"),
                 join_path(out_dir, "product_states.csv"),
                 join_path(out_dir, "product_transitions.csv"));
  if (cfg.export_kernel) {
    auto out = open_out(join_path(out_dir, "kernel.csv"));
    export_kernel_csv(art.kernel, out);
  }

  nlohmann::json man;
  man["stage"] = "build";
  man["model"] = {{"path", cfg.model_path},
                  {"hash", hash_hex(file_hash(cfg.model_path))},
                  {"dim_x", art.parsed.model.dim_x},
                  {"dim_w", art.parsed.model.dim_w},
                  {"dim_u", art.parsed.model.dim_u},
                  {"propositions", art.parsed.labeling.propositions}};
  man["automaton"] = {{"path", cfg.automaton_path},
                      {"hash", hash_hex(art.automaton.content_hash())},
                      {"locations", art.automaton.num_locations()},
                      {"clocks", art.automaton.clocks}};
  man["grid"] = {{"h", art.grid.h}, {"count", art.grid.count}, {"points", art.grid.num_points()}};
  man["inputs"] = {{"epsilon", cfg.epsilon}, {"count", art.inputs.size()}};
  man["delta"] = {{"value", art.delta.str()},
                  {"double", art.delta.to_double()},
                  {"bound", art.delta_bound},
                  {"auto", art.delta_auto},
                  {"override", cfg.override_delta_bound}};
  man["kernel"] = {{"transitions", art.kernel.succ.size()},
                   {"renormalized_rows", art.kernel_stats.renormalized_rows},
                   {"consistency",
                    {{"interior_pairs", art.consistency.interior_pairs},
                     {"worst_mean_err", art.consistency.worst_mean_err},
                     {"worst_var_err", art.consistency.worst_var_err},
                     {"worst_row_sum_err", art.consistency.worst_row_sum_err}}}};
  man["clock_space"] = {{"caps", art.ticks.cap}, {"valuations", art.ticks.total_valuations()}};
  man["product"] = {{"states", art.product.num_states()},
                    {"transitions", art.product.num_transitions()},
                    {"hash", hash_hex(product_hash(art.product))},
                    {"init_id", art.product.init_id},
                    {"sink_id", art.product.sink_id},
                    {"coverage", cfg.coverage == ProductCoverage::full ? "full" : "reachable"}};
  man["checks"] = {{"alignment_ok", art.alignment.ok}, {"determinism_ok", art.determinism.ok}};
  man["warnings"] = art.warnings;
  auto out = open_out(join_path(out_dir, "manifest.json"));
  out << man.dump(2) << '\n';
}

ProductMdp load_product_dir(const std::string& dir) {
  return import_product(join_path(dir, "product_header.json"),
                        join_path(dir, "product_states.csv"),
                        join_path(dir, "product_transitions.csv"));
}

void write_value_csv(const std::string& path, const Eigen::VectorXd& value) {
  auto out = open_out(path);
  out << "id,value\n";
  for (Eigen::Index i = 0; i < value.size(); ++i) out << i << ',' << fmt17(value[i]) << '\n';
}

Eigen::VectorXd read_value_csv(const std::string& path, std::int64_t num_states) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("solve: empty value table");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(num_states);
  std::int64_t seen = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 2) throw std::runtime_error("solve: malformed value row '" + line + "'");
    const std::int64_t id = std::stoll(f[0]);
    if (id != seen) throw std::runtime_error("solve: value table ids must be consecutive from 0");
    if (id >= num_states) throw std::runtime_error("solve: value table longer than the product");
    v[id] = std::strtod(f[1].c_str(), nullptr);
    ++seen;
  }
  if (seen != num_states) throw std::runtime_error("solve: value table shorter than the product");
  return v;
}

void write_policy_csv(const std::string& path, const ProductMdp& mdp,
                      const std::vector<int>& policy) {
  auto out = open_out(path);
  out << "# product=" << hash_hex(product_hash(mdp)) << '\n';
  const auto dim_u = mdp.inputs.empty() ? 0 : static_cast<int>(mdp.inputs.front().size());
  out << "id,input_id";
  for (int i = 0; i < dim_u; ++i) out << ",u_" << i;
  out << '\n';
  for (std::int64_t s = 0; s < mdp.num_states(); ++s) {
    const int in = policy[static_cast<std::size_t>(s)];
    out << s << ',' << in;
    for (int i = 0; i < dim_u; ++i) out << ',' << fmt17(mdp.inputs[static_cast<std::size_t>(in)][i]);
    out << '\n';
  }
}

std::vector<int> read_policy_csv(const std::string& path, const ProductMdp& mdp) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# product=", 0) != 0)
    throw std::runtime_error("policy: missing '# product=' fingerprint line");
  const std::uint64_t want = std::strtoull(line.c_str() + 10, nullptr, 16);
  if (want != product_hash(mdp))
    throw std::runtime_error("policy: file was synthesized for a different product");
  if (!std::getline(in, line)) throw std::runtime_error("policy: missing header");
  std::vector<int> policy;
  policy.reserve(static_cast<std::size_t>(mdp.num_states()));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() < 2) throw std::runtime_error("policy: malformed row '" + line + "'");
    if (std::stoll(f[0]) != static_cast<std::int64_t>(policy.size()))
      throw std::runtime_error("policy: ids must be consecutive from 0");
    const auto in_id = static_cast<int>(std::stoll(f[1]));
    if (in_id < 0 || in_id >= mdp.num_inputs)
      throw std::runtime_error("policy: input id out of range in row '" + line + "'");
    policy.push_back(in_id);
  }
  if (static_cast<std::int64_t>(policy.size()) != mdp.num_states())
    throw std::runtime_error("policy: table length disagrees with the product");
  return policy;
}

void write_convergence_csv(const std::string& path, const std::vector<double>& residuals) {
  auto out = open_out(path);
  out << "iter,residual\n";
  for (std::size_t i = 0; i < residuals.size(); ++i)
    out << (i + 1) << ',' << fmt17(residuals[i]) << '\n';
}

SolveResult run_solve(const SolveConfig& cfg) {
  const ProductMdp mdp = load_product_dir(cfg.dir);
  SolveOptions opt;
  opt.tol = cfg.tol;
  opt.max_iters = cfg.max_iters;
  opt.gauss_seidel = cfg.gauss_seidel;
  SolveResult res = value_iteration(mdp, opt);

  write_value_csv(join_path(cfg.dir, "value.csv"), res.value);
  write_policy_csv(join_path(cfg.dir, "policy.csv"), mdp, res.policy);
  write_convergence_csv(join_path(cfg.dir, "convergence.csv"), res.residuals);

  const std::string man_path = join_path(cfg.dir, "manifest.json");
  nlohmann::json man = fs::exists(man_path) ? read_json(man_path, "solve") : nlohmann::json::object();
  man["solve"] = {{"tol", cfg.tol},
                  {"max_iters", cfg.max_iters},
                  {"method", cfg.gauss_seidel ? "gauss-seidel" : "jacobi"},
                  {"iterations", res.iterations},
                  {"converged", res.converged},
                  {"final_residual", res.residuals.empty() ? 0.0 : res.residuals.back()},
                  {"value_at_init", res.value[mdp.init_id]}};
  auto out = open_out(man_path);
  out << man.dump(2) << '\n';
  return res;
}

EstimateReport run_simulate(const SimulateConfig& cfg) {
  std::string model_path = cfg.model_path;
  std::string automaton_path = cfg.automaton_path;
  if (model_path.empty() || automaton_path.empty()) {
    const std::string man_path = join_path(cfg.dir, "manifest.json");
    if (!fs::exists(man_path))
      throw std::runtime_error(
          "simulate: no manifest in '" + cfg.dir + "'; pass the model and automaton explicitly");
    const nlohmann::json man = read_json(man_path, "simulate");
    if (model_path.empty()) model_path = man.at("model").at("path").get<std::string>();
    if (automaton_path.empty()) automaton_path = man.at("automaton").at("path").get<std::string>();
  }

  const ParsedModel parsed = load_model_file(model_path);
  const TimedAutomaton automaton = TimedAutomaton::load_file(automaton_path);
  const ProductMdp product = load_product_dir(cfg.dir);
  if (automaton.content_hash() != product.automaton_hash)
    throw std::runtime_error("simulate: automaton file does not match the product fingerprint");
  if (static_cast<int>(product.grid_h.size()) != parsed.model.dim_x)
    throw std::runtime_error("simulate: model dimension does not match the product");

  const Grid grid = build_grid(parsed.model, product.grid_h);
  const TickSpace ticks{product.delta, product.clock_caps};
  const std::vector<int> policy = read_policy_csv(join_path(cfg.dir, "policy.csv"), product);

  RunOptions ropt;
  ropt.em_substeps = cfg.em_substeps;
  ropt.max_ticks = cfg.max_ticks;
  std::vector<TrajectoryRecord> kept;
  const EstimateReport rep =
      monte_carlo_estimate(parsed.model, parsed.labeling, grid, automaton, ticks, product, policy,
                           parsed.model.initial_state, cfg.trials, cfg.seed, ropt, &kept,
                           cfg.keep_trajectories);

  nlohmann::json est;
  est["trials"] = rep.trials;
  est["accepted"] = rep.accepted;
  est["rejected"] = rep.rejected;
  est["timeouts"] = rep.timeouts;
  est["policy_misses"] = rep.policy_misses;
  est["p_hat"] = rep.p_hat;
  est["half_width"] = rep.half_width;
  est["interval"] = {rep.p_hat - rep.half_width, rep.p_hat + rep.half_width};
  est["seed"] = cfg.seed;
  est["em_substeps"] = cfg.em_substeps;
  const std::string value_path = join_path(cfg.dir, "value.csv");
  if (fs::exists(value_path)) {
    const Eigen::VectorXd value = read_value_csv(value_path, product.num_states());
    const double v0 = value[product.init_id];
    est["value_at_init"] = v0;
    est["value_abs_error"] = std::abs(rep.p_hat - v0);
    est["value_within_interval"] = std::abs(rep.p_hat - v0) <= rep.half_width;
  }
  {
    auto out = open_out(join_path(cfg.dir, "estimate.json"));
    out << est.dump(2) << '\n';
  }
  {
    auto out = open_out(join_path(cfg.dir, "trajectories.csv"));
    export_trajectories_csv(kept, product, out);
  }
  return rep;
}

void run_fragment(const std::string& spec_path, const std::string& out_path) {
  const nlohmann::json doc = read_json(spec_path, "fragment");
  if (!doc.contains("stages") || !doc["stages"].is_array() || doc["stages"].empty())
    throw AutomatonError("fragment: 'stages' must be a non-empty array");
  std::vector<ReachStage> stages;
  for (const auto& st : doc["stages"]) {
    ReachStage rs;
    if (st.contains("props"))
      rs.props = st["props"].get<std::vector<std::string>>();
    else if (st.contains("prop"))
      rs.props = {st["prop"].get<std::string>()};
    else
      throw AutomatonError("fragment: each stage needs 'prop' or 'props'");
    if (!st.contains("window") || !st["window"].is_array() || st["window"].size() != 2)
      throw AutomatonError("fragment: each stage needs 'window': [lo, hi]");
    rs.lo = st["window"][0].get<std::int64_t>();
    rs.hi = st["window"][1].get<std::int64_t>();
    stages.push_back(std::move(rs));
  }
  std::optional<std::string> avoid;
  if (doc.contains("avoid") && !doc["avoid"].is_null()) avoid = doc["avoid"].get<std::string>();
  TimedAutomaton a = build_reach_fragment(stages, avoid);
  if (doc.contains("clock_bound")) {
    a.clock_bound[0] = doc["clock_bound"].get<std::int64_t>();
    a.finalize();  // re-validate against guard constants
  }
  auto out = open_out(out_path);
  out << a.to_json().dump(2) << '\n';
}

CheckReport run_check(const BuildConfig& cfg) {
  CheckReport rep;
  auto note = [&](bool ok, const std::string& line) {
    rep.ok = rep.ok && ok;
    rep.lines.push_back(std::string(ok ? "ok      " : "FAILED  ") + line);
  };

  ParsedModel parsed;
  try {
    parsed = load_model_file(cfg.model_path);
    note(true, "model: parsed '" + cfg.model_path + "' (dim_x=" +
                   std::to_string(parsed.model.dim_x) + ", dim_u=" +
                   std::to_string(parsed.model.dim_u) + ")");
  } catch (const std::exception& e) {
    note(false, e.what());
    return rep;
  }

  TimedAutomaton automaton;
  bool have_automaton = false;
  if (!cfg.automaton_path.empty()) {
    try {
      automaton = TimedAutomaton::load_file(cfg.automaton_path);
      have_automaton = true;
      note(true, "automaton: parsed '" + cfg.automaton_path + "' (" +
                     std::to_string(automaton.states.size()) + " locations)");
      const DeterminismReport det = check_determinism(automaton);
      if (det.ok) {
        note(true, "automaton: deterministic");
      } else {
        const auto& v = det.violations.front();
        note(false, "automaton: nondeterministic at location '" + automaton.location_name(v.q) +
                        "' (edges " + std::to_string(v.edge_a) + ", " + std::to_string(v.edge_b) + ")");
      }
      for (const std::string& p : automaton.ap)
        if (parsed.labeling.prop_index(p) < 0)
          note(false, "automaton: proposition '" + p + "' is not labeled in the model");
    } catch (const std::exception& e) {
      note(false, e.what());
    }
  }

  Grid grid;
  try {
    std::vector<double> h = cfg.h;
    if (h.size() == 1 && parsed.model.dim_x > 1)
      h.assign(static_cast<std::size_t>(parsed.model.dim_x), h[0]);
    grid = build_grid(parsed.model, h);
    note(true, "grid: " + std::to_string(grid.num_points()) + " points");
  } catch (const std::exception& e) {
    note(false, e.what());
    return rep;
  }

  const AlignmentReport align = check_label_alignment(parsed.labeling, grid);
  if (align.ok) {
    note(true, "grid: all labeled regions align with cell boundaries");
  } else {
    const auto& v = align.violations.front();
    note(false, "grid: proposition '" +
                    parsed.labeling.propositions[static_cast<std::size_t>(v.prop)] +
                    "' splits cell " + std::to_string(v.cell));
  }

  try {
    const auto inputs = discretize_inputs(parsed.model.input_box, cfg.epsilon);
    const double bound = max_delta(parsed.model, grid, inputs);
    const Rational d = cfg.delta_text.empty() ? auto_delta(bound) : parse_rational(cfg.delta_text);
    const bool oversized = d.to_double() > bound * (1 + 1e-12) + 1e-300;
    note(!oversized || cfg.override_delta_bound,
         "kernel: delta " + d.str() + " vs stability bound " + fmt17(bound));
    if (!oversized || cfg.override_delta_bound) {
      const MarkovKernel k =
          build_kernel(parsed.model, grid, inputs, d, cfg.override_delta_bound, nullptr);
      const ConsistencyReport cons = audit_local_consistency(k, parsed.model, grid, inputs);
      const bool tight = cons.worst_mean_err <= 1e-10 && cons.worst_row_sum_err <= 1e-12;
      note(tight || cfg.override_delta_bound,
           "kernel: local consistency (worst mean err " + fmt17(cons.worst_mean_err) +
               ", worst var err " + fmt17(cons.worst_var_err) + ")");
    }
  } catch (const std::exception& e) {
    note(false, e.what());
  }

  if (have_automaton) {
    try {
      const Rational d = cfg.delta_text.empty() ? Rational(1, 5) : parse_rational(cfg.delta_text);
      const TickSpace ts = discretize_clocks(automaton, d);
      note(true, "clock space: " + std::to_string(ts.total_valuations()) + " valuations at delta " +
                     d.str());
    } catch (const std::exception& e) {
      note(false, e.what());
    }
  }
  return rep;
}

}  // namespace timedreach
