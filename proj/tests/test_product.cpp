#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <timedreach/product_mdp.hpp>
#include <timedreach/solver.hpp>

using namespace timedreach;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 6.2831853071795862;
constexpr double kQuarterPi = 0.78539816339744828;

struct Setup {
  ParsedModel pm;
  Grid grid;
  std::vector<Eigen::VectorXd> inputs;
  MarkovKernel kernel;
  TimedAutomaton automaton;
  TickSpace ticks;
};

Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

// 1-D controlled diffusion on [0,4] with a goal strip [2,3].
Setup line_setup(const Rational& delta, std::int64_t hi = 2) {
  Setup s{parse_model(json{
              {"dim", 1},
              {"state_box", {{0.0, 4.0}}},
              {"inputs", {{-1.0, 1.0}}},
              {"drift", {"u1"}},
              {"diffusion", {{"0.5"}}},
              {"initial_state", {1.0}},
              {"labels", {{"Goal", {{{2.0, 3.0}}}}}},
          }),
          {},
          {vec1(-1.0), vec1(0.0), vec1(1.0)},
          {},
          build_reach_fragment({{{"Goal"}, 0, hi}}, std::nullopt),
          {}};
  s.grid = build_grid(s.pm.model, {0.5});
  s.kernel = build_kernel(s.pm.model, s.grid, s.inputs, delta);
  s.ticks = discretize_clocks(s.automaton, delta);
  return s;
}

ProductMdp line_product(const Rational& delta, std::int64_t hi = 2) {
  const Setup s = line_setup(delta, hi);
  return build_product(s.kernel, s.automaton, s.ticks, s.pm.labeling, s.grid, s.inputs,
                       s.pm.model.initial_state);
}

double max_row_sum_err(const ProductMdp& mdp) {
  double worst = 0;
  for (std::int64_t s = 0; s < mdp.num_states(); ++s)
    for (int a = 0; a < mdp.num_inputs; ++a) {
      const auto r = mdp.row(s, a);
      double sum = 0;
      for (std::int64_t i = 0; i < r.size; ++i) sum += r.prob[i];
      worst = std::max(worst, std::abs(sum - 1.0));
    }
  return worst;
}

// Minimal hand-rolled instance: s0 -> g -> sink, plus an unreachable state z.
// Single input; g is the goal.
ProductMdp chain_with_orphan() {
  ProductMdp m;
  m.states = {{0, 0, 0}, {1, 1, 0}, {2, 0, 0}, {-1, -1, 0}};  // s0, g, z, sink
  m.goal = {false, true, false, false};
  m.init_id = 0;
  m.sink_id = 3;
  m.num_inputs = 1;
  m.row_ptr = {0, 1, 2, 3, 4};
  m.succ = {1, 3, 2, 3};
  m.prob = {1.0, 1.0, 1.0, 1.0};
  m.delta = Rational(1, 5);
  m.clock_caps = {1};
  m.inputs = {vec1(0.0)};
  m.grid_h = {0.5};
  m.rebuild_index();
  return m;
}

}  // namespace

TEST_CASE("one-point grid with an immediately accepting automaton") {
  const ParsedModel pm = parse_model(json{
      {"dim", 1},
      {"state_box", {{0.0, 1.0}}},
      {"inputs", {{-1.0, 1.0}}},
      {"drift", {"0"}},
      {"diffusion", {{"0"}}},
      {"initial_state", {0.0}},
  });
  const Grid grid = build_grid(pm.model, {1.0});
  REQUIRE(grid.num_points() == 2);  // frozen dynamics: only the start is reachable
  const std::vector<Eigen::VectorXd> inputs{vec1(0.0)};
  const MarkovKernel kernel = build_kernel(pm.model, grid, inputs, Rational(1, 5));

  const TimedAutomaton a = TimedAutomaton::from_json(json{
      {"clocks", {{"c", 0}}},
      {"states", {"ok"}},
      {"init", "ok"},
      {"accepting", {"ok"}},
      {"edges", {{{"source", "ok"}, {"target", "ok"}, {"label", "*"}, {"guard", "true"}}}},
  });
  const TickSpace ts = discretize_clocks(a, Rational(1, 5));

  const ProductMdp mdp =
      build_product(kernel, a, ts, pm.labeling, grid, inputs, pm.model.initial_state);
  CHECK(mdp.num_states() == 2);
  CHECK(mdp.goal[mdp.init_id]);
  CHECK_FALSE(mdp.goal[mdp.sink_id]);

  const auto goal_row = mdp.row(mdp.init_id, 0);
  REQUIRE(goal_row.size == 1);
  CHECK(goal_row.succ[0] == mdp.sink_id);
  CHECK(goal_row.prob[0] == 1.0);

  const auto sink_row = mdp.row(mdp.sink_id, 0);
  REQUIRE(sink_row.size == 1);
  CHECK(sink_row.succ[0] == mdp.sink_id);
}

TEST_CASE("initial state snaps x0 and applies the zero-elapse read") {
  const ProductMdp mdp = line_product(Rational(1, 5));
  const ProductMdp::State& s0 = mdp.states[mdp.init_id];
  CHECK(s0.grid_id == 2);  // x0 = 1.0 on the 0.5 grid
  CHECK(s0.q == 0);        // stage1: the initial cell is not labeled Goal
  CHECK(s0.clock_idx == 0);
  CHECK_FALSE(mdp.goal[mdp.init_id]);
}

TEST_CASE("product rows are distributions") {
  const ProductMdp mdp = line_product(Rational(1, 5));
  CHECK(max_row_sum_err(mdp) <= 1e-12);
}

TEST_CASE("goal states absorb into the sink under every input") {
  const ProductMdp mdp = line_product(Rational(1, 5));
  std::int64_t goals = 0;
  for (std::int64_t s = 0; s < mdp.num_states(); ++s) {
    if (!mdp.goal[s]) continue;
    ++goals;
    for (int a = 0; a < mdp.num_inputs; ++a) {
      const auto r = mdp.row(s, a);
      REQUIRE(r.size == 1);
      CHECK(r.succ[0] == mdp.sink_id);
      CHECK(r.prob[0] == 1.0);
    }
  }
  CHECK(goals > 0);
  CHECK_FALSE(mdp.goal[mdp.sink_id]);
}

TEST_CASE("trap composes into absorbing non-goal states") {
  // Window [0,1] at delta 0.2: overrunning the window is easy, so trap states
  // are reachable.  They must be ordinary non-goal states with valid rows.
  const ProductMdp mdp = line_product(Rational(1, 5), 1);
  const Setup s = line_setup(Rational(1, 5), 1);
  bool saw_trap = false;
  for (std::int64_t i = 0; i < mdp.num_states(); ++i) {
    const ProductMdp::State& st = mdp.states[i];
    if (st.grid_id < 0 || st.q < static_cast<int>(s.automaton.states.size())) continue;
    saw_trap = true;
    CHECK_FALSE(mdp.goal[i]);
  }
  // The named trap location also composes as non-goal.
  for (std::int64_t i = 0; i < mdp.num_states(); ++i) {
    const ProductMdp::State& st = mdp.states[i];
    if (st.grid_id >= 0 && st.q >= 0 && s.automaton.states[st.q] == "trap") {
      saw_trap = true;
      CHECK_FALSE(mdp.goal[i]);
    }
  }
  CHECK(saw_trap);
  CHECK(max_row_sum_err(mdp) <= 1e-12);
}

TEST_CASE("clock closure: every reachable state stays within the caps") {
  const ProductMdp mdp = line_product(Rational(1, 5));
  for (std::int64_t s = 0; s < mdp.num_states(); ++s) {
    if (mdp.states[s].grid_id < 0) continue;
    const std::vector<std::int64_t> t = mdp.decode_ticks(mdp.states[s].clock_idx);
    REQUIRE(t.size() == mdp.clock_caps.size());
    for (std::size_t c = 0; c < t.size(); ++c) {
      CHECK(t[c] >= 0);
      CHECK(t[c] <= mdp.clock_caps[c]);
    }
  }
}

TEST_CASE("tick encoding round-trips") {
  const ProductMdp mdp = line_product(Rational(1, 5));
  for (std::int64_t idx : {std::int64_t(0), std::int64_t(3), mdp.clock_caps[0]}) {
    CHECK(mdp.encode_ticks(mdp.decode_ticks(idx)) == idx);
  }
}

TEST_CASE("states are canonically ordered with the sink last") {
  const ProductMdp mdp = line_product(Rational(1, 5));
  CHECK(mdp.sink_id == mdp.num_states() - 1);
  CHECK(mdp.states[mdp.sink_id].grid_id == -1);
  for (std::int64_t i = 0; i + 2 < mdp.num_states(); ++i) {
    const auto& a = mdp.states[i];
    const auto& b = mdp.states[i + 1];
    const auto ka = std::make_tuple(a.grid_id, a.q, a.clock_idx);
    const auto kb = std::make_tuple(b.grid_id, b.q, b.clock_idx);
    CHECK(ka < kb);
  }
}

TEST_CASE("find_state recovers constructed states and rejects others") {
  const ProductMdp mdp = line_product(Rational(1, 5));
  const ProductMdp::State& s0 = mdp.states[mdp.init_id];
  CHECK(mdp.find_state(s0.grid_id, s0.q, s0.clock_idx) == mdp.init_id);
  CHECK(mdp.find_state(9999, 0, 0) == -1);
}

TEST_CASE("lazy closure visits far fewer states than the full cube") {
  const ParsedModel pm = parse_model(json{
      {"dim", 3},
      {"state_box", {{0.0, 5.0}, {0.0, 5.0}, {0.0, kTwoPi}}},
      {"periodic", {3}},
      {"inputs", {{-1.0, 1.0}}},
      {"constants", {{"v", 1.0}}},
      {"drift", {"v*cos(x3)", "v*sin(x3)", "u1"}},
      {"diffusion", {{"0.5", "0", "0"}, {"0", "0.5", "0"}, {"0", "0", "0.5"}}},
      {"initial_state", {0.5, 0.5, 0.0}},
      {"labels",
       {{"R1", {{{3.0, 4.0}, {0.5, 1.5}, {0.0, kTwoPi}}}},
        {"R2", {{{0.5, 1.5}, {3.0, 4.0}, {0.0, kTwoPi}}}}}},
  });
  const Grid grid = build_grid(pm.model, {1.0, 1.0, 2 * kQuarterPi});
  const std::vector<Eigen::VectorXd> inputs{vec1(-1.0), vec1(0.0), vec1(1.0)};
  const MarkovKernel kernel = build_kernel(pm.model, grid, inputs, Rational(1, 5));
  const TimedAutomaton a =
      build_reach_fragment({{{"R1"}, 0, 5}, {{"R2"}, 3, 5}}, std::nullopt);
  const TickSpace ts = discretize_clocks(a, Rational(1, 5));

  const ProductMdp mdp =
      build_product(kernel, a, ts, pm.labeling, grid, inputs, pm.model.initial_state);
  const std::int64_t cube =
      grid.num_points() * a.num_locations() * ts.total_valuations() + 1;
  CHECK(mdp.num_states() > 2);
  CHECK(mdp.num_states() < cube);
  CHECK(max_row_sum_err(mdp) <= 1e-12);
}

TEST_CASE("full coverage interns every live configuration without moving the value") {
  const Setup s = line_setup(Rational(1, 5));
  const ProductMdp lazy = build_product(s.kernel, s.automaton, s.ticks, s.pm.labeling, s.grid,
                                        s.inputs, s.pm.model.initial_state);
  const ProductMdp full = build_product(s.kernel, s.automaton, s.ticks, s.pm.labeling, s.grid,
                                        s.inputs, s.pm.model.initial_state, ProductCoverage::full);

  CHECK(full.num_states() > lazy.num_states());
  CHECK(max_row_sum_err(full) <= 1e-12);

  // Everything the lazy closure reached is present in the full build.
  for (const ProductMdp::State& st : lazy.states) {
    if (st.grid_id < 0) continue;
    CHECK(full.find_state(st.grid_id, st.q, st.clock_idx) >= 0);
  }

  // A snap a simulator can produce but chain edges never do: a far cell at
  // clock zero.  The lazy build cannot answer it; the full build must.
  const std::int64_t far = s.grid.num_points() - 1;
  CHECK(lazy.find_state(far, 0, 0) == -1);
  CHECK(full.find_state(far, 0, 0) >= 0);

  // find_state is total over (cell, live location, valuation).
  for (std::int64_t g = 0; g < s.grid.num_points(); ++g)
    for (std::int64_t c = 0; c < static_cast<std::int64_t>(s.ticks.total_valuations()); ++c)
      CHECK(full.find_state(g, 0, c) >= 0);

  // The extra states are off the initial state's forward cone, so the value
  // and the optimal decision at the initial state are unchanged.
  SolveOptions opt;
  opt.tol = 1e-12;
  const double va = value_iteration(lazy, opt).value[lazy.init_id];
  const double vb = value_iteration(full, opt).value[full.init_id];
  CHECK(va == doctest::Approx(vb).epsilon(1e-12));
}

TEST_CASE("full coverage builds are deterministic") {
  const Setup s = line_setup(Rational(1, 5));
  const ProductMdp a = build_product(s.kernel, s.automaton, s.ticks, s.pm.labeling, s.grid,
                                     s.inputs, s.pm.model.initial_state, ProductCoverage::full);
  const ProductMdp b = build_product(s.kernel, s.automaton, s.ticks, s.pm.labeling, s.grid,
                                     s.inputs, s.pm.model.initial_state, ProductCoverage::full);
  CHECK(product_hash(a) == product_hash(b));
  CHECK(a.init_id == b.init_id);
}

TEST_CASE("unknown automaton propositions are rejected") {
  const Setup s = line_setup(Rational(1, 5));
  const TimedAutomaton wrong = build_reach_fragment({{{"Treasure"}, 0, 2}}, std::nullopt);
  const TickSpace ts = discretize_clocks(wrong, Rational(1, 5));
  CHECK_THROWS_AS(build_product(s.kernel, wrong, ts, s.pm.labeling, s.grid, s.inputs,
                                s.pm.model.initial_state),
                  ModelError);
}

TEST_CASE("kernel/clock-space delta mismatch is rejected") {
  const Setup s = line_setup(Rational(1, 5));
  const TickSpace wrong = discretize_clocks(s.automaton, Rational(1, 10));
  CHECK_THROWS_AS(build_product(s.kernel, s.automaton, wrong, s.pm.labeling, s.grid, s.inputs,
                                s.pm.model.initial_state),
                  std::invalid_argument);
}

TEST_CASE("trim removes unreachable states and keeps the sink") {
  const ProductMdp trimmed = trim_reachable(chain_with_orphan());
  CHECK(trimmed.num_states() == 3);
  CHECK(trimmed.states[trimmed.sink_id].grid_id == -1);
  for (std::int64_t i = 0; i < trimmed.num_states(); ++i)
    CHECK(trimmed.states[i].grid_id != 2);  // z is gone
  CHECK(trimmed.goal[trimmed.find_state(1, 1, 0)]);
}

TEST_CASE("trim is the identity on lazily built products") {
  const ProductMdp mdp = line_product(Rational(1, 5));
  const ProductMdp trimmed = trim_reachable(mdp);
  CHECK(trimmed.num_states() == mdp.num_states());
  CHECK(product_hash(trimmed) == product_hash(mdp));
}

TEST_CASE("trimming does not move the value at the initial state") {
  const ProductMdp full = chain_with_orphan();
  const ProductMdp trimmed = trim_reachable(full);
  SolveOptions opt;
  opt.tol = 1e-12;
  const SolveResult a = value_iteration(full, opt);
  const SolveResult b = value_iteration(trimmed, opt);
  CHECK(a.value[full.init_id] == doctest::Approx(b.value[trimmed.init_id]).epsilon(1e-12));
}

TEST_CASE("export/import round trip preserves the product") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "tr_product_rt";
  fs::create_directories(dir);
  const std::string header = (dir / "product_header.json").string();
  const std::string states = (dir / "product_states.csv").string();
  const std::string trans = (dir / "product_transitions.csv").string();

  const ProductMdp mdp = line_product(Rational(1, 5));
  export_product(mdp, header, states, trans);
  const ProductMdp back = import_product(header, states, trans);

  CHECK(back.num_states() == mdp.num_states());
  CHECK(back.num_transitions() == mdp.num_transitions());
  CHECK(back.init_id == mdp.init_id);
  CHECK(back.sink_id == mdp.sink_id);
  CHECK(back.delta == mdp.delta);
  CHECK(back.clock_caps == mdp.clock_caps);
  CHECK(back.automaton_hash == mdp.automaton_hash);
  CHECK(product_hash(back) == product_hash(mdp));
  for (std::int64_t s = 0; s < mdp.num_states(); ++s) {
    CHECK(back.states[s].grid_id == mdp.states[s].grid_id);
    CHECK(back.states[s].q == mdp.states[s].q);
    CHECK(back.states[s].clock_idx == mdp.states[s].clock_idx);
    CHECK(back.goal[s] == mdp.goal[s]);
  }

  // Header + states only: enough for runtime lookups.
  const ProductMdp light = import_product(header, states, trans, false);
  CHECK(light.num_states() == mdp.num_states());
  CHECK(light.num_transitions() == 0);

  // A corrupted transitions table no longer matches the fingerprint.
  {
    std::FILE* f = std::fopen(trans.c_str(), "a");
    REQUIRE(f != nullptr);
    std::fputs("0,0,0,0.125\n", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(import_product(header, states, trans), std::runtime_error);
  fs::remove_all(dir);
}

TEST_CASE("two builds of the same inputs are identical") {
  const ProductMdp a = line_product(Rational(1, 5));
  const ProductMdp b = line_product(Rational(1, 5));
  CHECK(product_hash(a) == product_hash(b));
  CHECK(a.num_states() == b.num_states());
  CHECK(a.init_id == b.init_id);
}
