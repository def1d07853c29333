#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>
#include <timedreach/solver.hpp>

using namespace timedreach;

namespace {

Eigen::VectorXd vec1(double v) {
  Eigen::VectorXd x(1);
  x << v;
  return x;
}

// Two-action instance with an analytic fixpoint: from s0, action 0 wins the
// goal with probability 0.5; action 1 wins 0.3 outright but retries with
// probability 0.5.  V(s0) = max(0.5, 0.3 + 0.5 V(s0)) = 0.6, argmax action 1.
ProductMdp retry_instance() {
  ProductMdp m;
  m.states = {{0, 0, 0}, {1, 1, 0}, {2, 2, 0}, {-1, -1, 0}};  // s0, g, trap, sink
  m.goal = {false, true, false, false};
  m.init_id = 0;
  m.sink_id = 3;
  m.num_inputs = 2;
  // rows: (s0,a0) (s0,a1) (g,a0) (g,a1) (trap,a0) (trap,a1) (sink,a0) (sink,a1)
  m.row_ptr = {0, 2, 5, 6, 7, 8, 9, 10, 11};
  m.succ = {1, 2, 1, 0, 2, 3, 3, 2, 2, 3, 3};
  m.prob = {0.5, 0.5, 0.3, 0.5, 0.2, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
  m.delta = Rational(1, 5);
  m.clock_caps = {0};
  m.inputs = {vec1(-1.0), vec1(1.0)};
  m.grid_h = {0.5};
  m.rebuild_index();
  return m;
}

// s0 can only ever reach the trap: no reward anywhere reachable.
ProductMdp hopeless_instance() {
  ProductMdp m;
  m.states = {{0, 0, 0}, {1, 1, 0}, {2, 2, 0}, {-1, -1, 0}};
  m.goal = {false, true, false, false};
  m.init_id = 0;
  m.sink_id = 3;
  m.num_inputs = 1;
  m.row_ptr = {0, 1, 2, 3, 4};
  m.succ = {2, 3, 2, 3};
  m.prob = {1.0, 1.0, 1.0, 1.0};
  m.delta = Rational(1, 5);
  m.clock_caps = {0};
  m.inputs = {vec1(0.0)};
  m.grid_h = {0.5};
  m.rebuild_index();
  return m;
}

// Random absorbing instance: `n` states total, last is the sink, exactly one
// goal.  Every free row keeps at least 5% mass on the sink and 5% on the
// goal, so value iteration contracts uniformly.
ProductMdp random_instance(std::mt19937_64& rng, int n, int num_inputs) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ProductMdp m;
  for (int i = 0; i + 1 < n; ++i) m.states.push_back({i, i, 0});
  m.states.push_back({-1, -1, 0});
  m.goal.assign(n, false);
  const int goal = 1 + static_cast<int>(unit(rng) * (n - 2)) % (n - 2);
  m.goal[goal] = true;
  m.init_id = 0;
  m.sink_id = n - 1;
  m.num_inputs = num_inputs;
  m.delta = Rational(1, 5);
  m.clock_caps = {0};
  for (int a = 0; a < num_inputs; ++a) m.inputs.push_back(vec1(a));
  m.grid_h = {0.5};

  m.row_ptr.push_back(0);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < num_inputs; ++a) {
      if (s == goal || s == m.sink_id) {
        m.succ.push_back(m.sink_id);
        m.prob.push_back(1.0);
      } else {
        std::vector<double> w(n);
        for (int t = 0; t < n; ++t) w[t] = unit(rng);
        double total = 0;
        for (double x : w) total += x;
        for (double& x : w) x = 0.9 * x / total;
        w[goal] += 0.05;
        w[m.sink_id] += 0.05;
        for (int t = 0; t < n; ++t) {
          if (w[t] <= 0) continue;
          m.succ.push_back(t);
          m.prob.push_back(w[t]);
        }
      }
      m.row_ptr.push_back(static_cast<std::int64_t>(m.succ.size()));
    }
  }
  m.rebuild_index();
  return m;
}

// Exact value of a fixed policy: solve (I - P_pi) V = R with the sink pinned.
Eigen::VectorXd linear_policy_value(const ProductMdp& m, const std::vector<int>& pi) {
  const int n = static_cast<int>(m.num_states());
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (int s = 0; s < n; ++s) {
    if (s == m.sink_id) continue;  // row stays V(sink) = 0
    b[s] = m.goal[s] ? 1.0 : 0.0;
    const auto r = m.row(s, pi[s]);
    for (std::int64_t i = 0; i < r.size; ++i) A(s, r.succ[i]) -= r.prob[i];
  }
  return A.fullPivLu().solve(b);
}

// Best value over every deterministic policy, by exhaustive enumeration.
Eigen::VectorXd enumerate_optimal(const ProductMdp& m) {
  const int n = static_cast<int>(m.num_states());
  std::vector<int> free_states;
  for (int s = 0; s < n; ++s)
    if (s != m.sink_id && !m.goal[s]) free_states.push_back(s);

  std::vector<int> pi(n, 0);
  Eigen::VectorXd best = Eigen::VectorXd::Constant(n, -1.0);
  std::vector<int> choice(free_states.size(), 0);
  while (true) {
    for (std::size_t i = 0; i < free_states.size(); ++i) pi[free_states[i]] = choice[i];
    const Eigen::VectorXd v = linear_policy_value(m, pi);
    // The DP optimum dominates every policy pointwise; take the max per state.
    best = best.cwiseMax(v);
    int i = static_cast<int>(choice.size()) - 1;
    while (i >= 0 && choice[i] + 1 >= m.num_inputs) choice[i--] = 0;
    if (i < 0) break;
    ++choice[i];
  }
  return best;
}

}  // namespace

TEST_CASE("discretize_inputs covers the box endpoints") {
  const auto u = discretize_inputs({{-1.0, 1.0}}, 0.2);
  REQUIRE(u.size() == 11);
  CHECK(u.front()[0] == -1.0);
  CHECK(u.back()[0] == 1.0);
  CHECK(u[1][0] == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(u[5][0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("discretize_inputs degenerate and coarse cases") {
  const auto zero = discretize_inputs({{0.0, 0.0}}, 0.5);
  REQUIRE(zero.size() == 1);
  CHECK(zero[0][0] == 0.0);

  const auto coarse = discretize_inputs({{-1.0, 1.0}}, 1.0);
  REQUIRE(coarse.size() == 3);
  CHECK(coarse[0][0] == -1.0);
  CHECK(coarse[1][0] == 0.0);
  CHECK(coarse[2][0] == 1.0);
}

TEST_CASE("discretize_inputs combines axes as a cartesian product") {
  const auto u = discretize_inputs({{-1.0, 1.0}, {0.0, 1.0}}, 1.0);
  CHECK(u.size() == 6);  // 3 x 2
  for (const auto& p : u) CHECK(p.size() == 2);
}

TEST_CASE("value iteration solves the retry instance") {
  const ProductMdp m = retry_instance();
  SolveOptions opt;
  opt.tol = 1e-10;
  const SolveResult r = value_iteration(m, opt);
  CHECK(r.converged);
  CHECK(r.value[0] == doctest::Approx(0.6).epsilon(1e-8));
  CHECK(r.value[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.value[2] == 0.0);
  CHECK(r.value[m.sink_id] == 0.0);
  CHECK(r.policy[0] == 1);  // the retry action
}

TEST_CASE("hopeless initial states get value zero") {
  const SolveResult r = value_iteration(hopeless_instance());
  CHECK(r.converged);
  CHECK(r.value[0] == 0.0);
}

TEST_CASE("backup sweeps are monotone and bounded from V = 0") {
  const ProductMdp m = retry_instance();
  Eigen::VectorXd reward = Eigen::VectorXd::Zero(m.num_states());
  for (std::int64_t s = 0; s < m.num_states(); ++s) reward[s] = m.goal[s] ? 1.0 : 0.0;

  Eigen::VectorXd v = Eigen::VectorXd::Zero(m.num_states());
  Eigen::VectorXd next = v;
  for (int k = 0; k < 40; ++k) {
    bellman_backup(m, reward, v, next, nullptr);
    for (std::int64_t s = 0; s < m.num_states(); ++s) {
      CHECK(next[s] >= v[s]);
      CHECK(next[s] >= 0.0);
      CHECK(next[s] <= 1.0);
    }
    std::swap(v, next);
  }
  CHECK(v[m.sink_id] == 0.0);
}

TEST_CASE("residuals shrink and count the sweeps") {
  SolveOptions opt;
  opt.tol = 1e-10;
  const SolveResult r = value_iteration(retry_instance(), opt);
  CHECK(r.iterations == static_cast<int>(r.residuals.size()));
  CHECK(r.residuals.back() < 1e-10);
  CHECK(r.residuals.front() >= r.residuals.back());
}

TEST_CASE("non-convergence is reported, not hidden") {
  SolveOptions opt;
  opt.tol = 1e-15;
  opt.max_iters = 3;
  const SolveResult r = value_iteration(retry_instance(), opt);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 3);
}

TEST_CASE("gauss-seidel reaches the same fixpoint") {
  SolveOptions opt;
  opt.tol = 1e-12;
  SolveOptions gs = opt;
  gs.gauss_seidel = true;
  const SolveResult a = value_iteration(retry_instance(), opt);
  const SolveResult b = value_iteration(retry_instance(), gs);
  CHECK(a.converged);
  CHECK(b.converged);
  CHECK(b.value[0] == doctest::Approx(a.value[0]).epsilon(1e-9));
  CHECK(b.policy == a.policy);
  CHECK(b.iterations <= a.iterations);  // in-place sweeps propagate faster here
}

TEST_CASE("extract_policy is greedy with smallest-id tie-breaking") {
  const ProductMdp m = retry_instance();
  SolveOptions opt;
  opt.tol = 1e-12;
  const SolveResult r = value_iteration(m, opt);
  CHECK(extract_policy(m, r.value) == r.policy);

  // With a flat value function both actions from s0 tie at 0; id 0 wins.
  const Eigen::VectorXd flat = Eigen::VectorXd::Zero(m.num_states());
  const std::vector<int> pi = extract_policy(m, flat);
  CHECK(pi[0] == 0);
}

TEST_CASE("single-input instances use that input everywhere") {
  const SolveResult r = value_iteration(hopeless_instance());
  for (int p : r.policy) CHECK(p == 0);
}

TEST_CASE("policy evaluation matches the optimal value (greedy consistency)") {
  const ProductMdp m = retry_instance();
  SolveOptions opt;
  opt.tol = 1e-12;
  const SolveResult r = value_iteration(m, opt);
  const SolveResult fixed = evaluate_policy(m, r.policy, opt);
  CHECK(fixed.converged);
  for (std::int64_t s = 0; s < m.num_states(); ++s)
    CHECK(fixed.value[s] == doctest::Approx(r.value[s]).epsilon(1e-8));
}

TEST_CASE("scaling the reward scales the value and keeps the policy") {
  const ProductMdp m = retry_instance();
  SolveOptions opt;
  opt.tol = 1e-12;
  const SolveResult base = value_iteration(m, opt);

  SolveOptions scaled = opt;
  scaled.reward = Eigen::VectorXd::Zero(m.num_states());
  for (std::int64_t s = 0; s < m.num_states(); ++s)
    scaled.reward[s] = m.goal[s] ? 2.5 : 0.0;
  scaled.tol = 1e-12 * 2.5;
  const SolveResult r = value_iteration(m, scaled);
  CHECK(r.policy == base.policy);
  for (std::int64_t s = 0; s < m.num_states(); ++s)
    CHECK(r.value[s] == doctest::Approx(2.5 * base.value[s]).epsilon(1e-8));
}

TEST_CASE("value iteration matches exhaustive policy enumeration") {
  std::mt19937_64 rng(20260814);
  std::uniform_int_distribution<int> size(4, 10);
  std::uniform_int_distribution<int> arms(1, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const ProductMdp m = random_instance(rng, size(rng), arms(rng));
    SolveOptions opt;
    opt.tol = 1e-10;
    const SolveResult vi = value_iteration(m, opt);
    REQUIRE(vi.converged);
    const Eigen::VectorXd oracle = enumerate_optimal(m);
    for (std::int64_t s = 0; s < m.num_states(); ++s) {
      INFO("trial " << trial << " state " << s);
      CHECK(std::abs(vi.value[s] - oracle[s]) <= 1e-6);
    }
  }
}
