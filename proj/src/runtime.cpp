#include "timedreach/runtime.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace timedreach {

namespace {

std::uint64_t splitmix64(std::uint64_t& s) {
  s += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = s;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double wilson_free_half_width(int accepted, int trials) {
  if (trials == 0) return 0;
  const double p = static_cast<double>(accepted) / trials;
  return 1.96 * std::sqrt(p * (1 - p) / trials);
}

// Projection of the model's label bits onto the automaton's alphabet order.
std::vector<int> alphabet_map(const TimedAutomaton& a, const Labeling& lab) {
  std::vector<int> m(a.ap.size());
  for (std::size_t i = 0; i < a.ap.size(); ++i) {
    const int j = lab.prop_index(a.ap[i]);
    if (j < 0)
      throw ModelError("runtime: automaton proposition '" + a.ap[i] +
                       "' is not labeled in the model");
    m[i] = j;
  }
  return m;
}

SymbolSet project(SymbolSet full, const std::vector<int>& m) {
  SymbolSet s = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if ((full >> m[i]) & 1u) s |= (SymbolSet{1} << i);
  return s;
}

}  // namespace

const char* run_status_str(RunStatus s) {
  switch (s) {
    case RunStatus::accepted: return "accepted";
    case RunStatus::rejected: return "rejected";
    default: return "timeout";
  }
}

std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
  std::uint64_t s = seed ^ (0x6A09E667F3BCC909ULL + trial * 0xD1B54A32D192ED03ULL);
  const std::uint64_t a = splitmix64(s);
  const std::uint64_t b = splitmix64(s);
  std::seed_seq sq{static_cast<unsigned>(a), static_cast<unsigned>(a >> 32),
                   static_cast<unsigned>(b), static_cast<unsigned>(b >> 32)};
  return std::mt19937_64(sq);
}

TrajectoryRecord run_policy_trajectory(const SdeModel& model, const Labeling& lab,
                                       const Grid& grid, const TimedAutomaton& a,
                                       const TickSpace& ts, const ProductMdp& mdp,
                                       const std::vector<int>& policy, const Eigen::VectorXd& x0,
                                       std::mt19937_64& rng, const RunOptions& opt) {
  if (static_cast<std::int64_t>(policy.size()) != mdp.num_states())
    throw std::invalid_argument("runtime: policy length does not match the product");
  if (opt.em_substeps < 1) throw std::invalid_argument("runtime: em_substeps must be >= 1");
  const std::vector<int> amap = alphabet_map(a, lab);

  Eigen::VectorXd x = x0;
  for (int d = 0; d < model.dim_x; ++d) x[d] = model.wrap(d, x[d]);
  if (!model.inside(x)) throw DomainError("runtime: initial state outside the state box");

  std::int64_t max_ticks = opt.max_ticks;
  if (max_ticks <= 0) {
    std::int64_t cap = 0;
    for (std::int64_t c : ts.cap) cap = std::max(cap, c);
    max_ticks = 2 * cap + 16;
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  const double dt = ts.delta.to_double() / opt.em_substeps;
  Eigen::VectorXd noise(model.dim_w);

  TrajectoryRecord rec;
  AutomatonConfig cfg = initial_config(a, ts, project(label_of(lab, x), amap));
  for (std::int64_t tick = 0;; ++tick) {
    rec.steps.push_back({tick, x, cfg.q, cfg.ticks, -1});
    if (a.is_accepting(cfg.q)) {
      rec.status = RunStatus::accepted;
      break;
    }
    if (a.dead[static_cast<std::size_t>(cfg.q)]) {
      rec.status = RunStatus::rejected;
      break;
    }
    if (tick >= max_ticks) {
      rec.status = RunStatus::timeout;
      break;
    }
    const std::int64_t pid =
        mdp.find_state(grid.snap(x), cfg.q, mdp.encode_ticks(cfg.ticks));
    if (pid < 0) {
      rec.policy_miss = true;
      rec.status = RunStatus::rejected;
      break;
    }
    const int in = policy[static_cast<std::size_t>(pid)];
    rec.steps.back().input = in;
    const Eigen::VectorXd& u = mdp.inputs[static_cast<std::size_t>(in)];
    for (int j = 0; j < opt.em_substeps; ++j) {
      for (int w = 0; w < model.dim_w; ++w) noise[w] = gauss(rng);
      x = em_step(model, x, u, dt, noise).x;
    }
    cfg = step_config(a, ts, cfg, project(label_of(lab, x), amap), 1);
  }
  return rec;
}

EstimateReport monte_carlo_estimate(const SdeModel& model, const Labeling& lab, const Grid& grid,
                                    const TimedAutomaton& a, const TickSpace& ts,
                                    const ProductMdp& mdp, const std::vector<int>& policy,
                                    const Eigen::VectorXd& x0, int trials, std::uint64_t seed,
                                    const RunOptions& opt, std::vector<TrajectoryRecord>* keep,
                                    int keep_first) {
  if (trials <= 0) throw std::invalid_argument("runtime: trials must be positive");
  EstimateReport rep;
  rep.trials = trials;
  for (int i = 0; i < trials; ++i) {
    auto rng = trial_rng(seed, static_cast<std::uint64_t>(i));
    TrajectoryRecord rec = run_policy_trajectory(model, lab, grid, a, ts, mdp, policy, x0, rng, opt);
    switch (rec.status) {
      case RunStatus::accepted: ++rep.accepted; break;
      case RunStatus::rejected: ++rep.rejected; break;
      case RunStatus::timeout: ++rep.timeouts; break;
    }
    if (rec.policy_miss) ++rep.policy_misses;
    if (keep && i < keep_first) keep->push_back(std::move(rec));
  }
  rep.p_hat = static_cast<double>(rep.accepted) / trials;
  rep.half_width = wilson_free_half_width(rep.accepted, trials);
  return rep;
}

Verdict point_based_check(const TimedAutomaton& a, const std::vector<SymbolSet>& labels,
                          const Rational& delta) {
  return accept_timed_word(a, sample_behavior(labels, delta), delta);
}

ChainEstimate simulate_product_chain(const ProductMdp& mdp, const std::vector<int>& policy,
                                     int trials, std::uint64_t seed, std::int64_t max_steps) {
  if (trials <= 0) throw std::invalid_argument("runtime: trials must be positive");
  if (static_cast<std::int64_t>(policy.size()) != mdp.num_states())
    throw std::invalid_argument("runtime: policy length does not match the product");
  if (max_steps <= 0) {
    std::int64_t cap = 0;
    for (std::int64_t c : mdp.clock_caps) cap = std::max(cap, c);
    max_steps = 2 * cap + 64;
  }
  ChainEstimate est;
  est.trials = trials;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < trials; ++i) {
    auto rng = trial_rng(seed, static_cast<std::uint64_t>(i));
    std::int64_t s = mdp.init_id;
    for (std::int64_t step = 0; step < max_steps; ++step) {
      if (mdp.goal[static_cast<std::size_t>(s)]) {
        ++est.accepted;
        break;
      }
      if (s == mdp.sink_id) break;
      const auto row = mdp.row(s, policy[static_cast<std::size_t>(s)]);
      double r = unif(rng);
      std::int64_t next = row.succ[row.size - 1];
      for (std::int64_t e = 0; e < row.size; ++e) {
        r -= row.prob[e];
        if (r <= 0) {
          next = row.succ[e];
          break;
        }
      }
      s = next;
    }
  }
  est.p_hat = static_cast<double>(est.accepted) / trials;
  est.half_width = wilson_free_half_width(est.accepted, trials);
  return est;
}

void export_trajectories_csv(const std::vector<TrajectoryRecord>& records, const ProductMdp& mdp,
                             std::ostream& out) {
  const auto dim_x = static_cast<int>(mdp.grid_h.size());
  const auto dim_u = mdp.inputs.empty() ? 0 : static_cast<int>(mdp.inputs.front().size());
  const auto n_clk = static_cast<int>(mdp.clock_caps.size());
  out << "trial,tick,t";
  for (int i = 0; i < dim_x; ++i) out << ",x" << i;
  out << ",q";
  for (int i = 0; i < n_clk; ++i) out << ",clk" << i;
  for (int i = 0; i < dim_u; ++i) out << ",u" << i;
  out << ",status\n";
  const double delta = mdp.delta.to_double();
  for (std::size_t trial = 0; trial < records.size(); ++trial) {
    const auto& rec = records[trial];
    for (const auto& st : rec.steps) {
      out << trial << ',' << st.tick << ',' << fmt17(st.tick * delta);
      for (int i = 0; i < dim_x; ++i) out << ',' << fmt17(st.x[i]);
      out << ',' << st.q;
      for (int i = 0; i < n_clk; ++i) out << ',' << st.ticks[static_cast<std::size_t>(i)];
      for (int i = 0; i < dim_u; ++i)
        out << ',' << (st.input < 0 ? "" : fmt17(mdp.inputs[static_cast<std::size_t>(st.input)][i]));
      out << ',' << run_status_str(rec.status) << '\n';
    }
  }
}

}  // namespace timedreach
