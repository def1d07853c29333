#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <timedreach/grid.hpp>
#include <timedreach/markov_kernel.hpp>

using namespace timedreach;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 6.2831853071795862;
constexpr double kQuarterPi = 0.78539816339744828;

json dubins_doc(bool periodic) {
  json doc{
      {"dim", 3},
      {"state_box", {{0.0, 5.0}, {0.0, 5.0}, {0.0, kTwoPi}}},
      {"inputs", {{-1.0, 1.0}}},
      {"constants", {{"v", 1.0}}},
      {"drift", {"v*cos(x3)", "v*sin(x3)", "u1"}},
      {"diffusion", {{"0.5", "0", "0"}, {"0", "0.5", "0"}, {"0", "0", "0.5"}}},
      {"initial_state", {0.5, 0.5, 0.0}},
  };
  if (periodic) doc["periodic"] = {3};
  return doc;
}

SdeModel line_model(const std::string& drift, const std::string& diff, double lo = 0.0,
                    double hi = 1.0) {
  json doc{
      {"dim", 1},        {"state_box", {{lo, hi}}}, {"inputs", {{-1.0, 1.0}}},
      {"drift", {drift}}, {"diffusion", {{diff}}},   {"initial_state", {lo}},
  };
  return parse_model(doc).model;
}

std::vector<Eigen::VectorXd> one_input(double u) {
  Eigen::VectorXd v(1);
  v << u;
  return {v};
}

double row_sum(const MarkovKernel::Row& r) {
  double s = 0;
  for (std::int64_t i = 0; i < r.size; ++i) s += r.prob[i];
  return s;
}

double prob_to(const MarkovKernel::Row& r, std::int64_t dst) {
  for (std::int64_t i = 0; i < r.size; ++i)
    if (r.succ[i] == dst) return r.prob[i];
  return 0.0;
}

}  // namespace

TEST_CASE("grid counts: periodic dimensions drop the seam point") {
  const SdeModel dub = parse_model(dubins_doc(true)).model;
  Grid g = build_grid(dub, {0.5, 0.5, kQuarterPi});
  CHECK(g.count == std::vector<int>({11, 11, 8}));
  CHECK(g.num_points() == 968);

  const SdeModel dub2 = parse_model(dubins_doc(false)).model;
  g = build_grid(dub2, {0.5, 0.5, kQuarterPi});
  CHECK(g.count == std::vector<int>({11, 11, 9}));
  CHECK(g.num_points() == 1089);
}

TEST_CASE("grid: 1-D three-point line") {
  const Grid g = build_grid(line_model("0", "1"), {0.5});
  CHECK(g.count == std::vector<int>({3}));
  CHECK(g.point(0)[0] == 0.0);
  CHECK(g.point(1)[0] == 0.5);
  CHECK(g.point(2)[0] == 1.0);
}

TEST_CASE("grid: non-divisible step is rejected") {
  CHECK_THROWS_AS(build_grid(line_model("0", "1"), {0.3}), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(line_model("0", "1"), {-0.5}), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(line_model("0", "1"), {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("grid: flatten and unflatten are inverse") {
  const SdeModel dub = parse_model(dubins_doc(true)).model;
  const Grid g = build_grid(dub, {0.5, 0.5, kQuarterPi});
  for (std::int64_t id : {std::int64_t(0), std::int64_t(500), g.num_points() - 1}) {
    CHECK(g.flatten(g.unflatten(id)) == id);
  }
  CHECK(g.unflatten(0) == std::vector<int>({0, 0, 0}));
}

TEST_CASE("grid: snap assigns half-open cells") {
  const Grid g = build_grid(line_model("0", "1"), {0.5});
  Eigen::VectorXd x(1);
  x << 0.49;
  CHECK(g.snap(x) == 0);
  x << 0.5;
  CHECK(g.snap(x) == 1);
  x << 0.999;
  CHECK(g.snap(x) == 1);
  x << 1.0;  // box face belongs to the outermost cell
  CHECK(g.snap(x) == 2);
  x << 1.7;  // outside: clamp
  CHECK(g.snap(x) == 2);
  x << -0.2;
  CHECK(g.snap(x) == 0);
}

TEST_CASE("grid: snap wraps periodic coordinates") {
  const SdeModel dub = parse_model(dubins_doc(true)).model;
  const Grid g = build_grid(dub, {0.5, 0.5, kQuarterPi});
  Eigen::VectorXd x(3);
  x << 1.0, 1.0, kTwoPi + 0.1;
  const std::vector<int> idx = g.unflatten(g.snap(x));
  CHECK(idx[2] == 0);
  x << 1.0, 1.0, -0.1;  // just below the seam: wraps to the top cell
  CHECK(g.unflatten(g.snap(x))[2] == 7);
}

TEST_CASE("grid: neighbor stepping is sticky on walls, cyclic on seams") {
  const SdeModel dub = parse_model(dubins_doc(true)).model;
  const Grid g = build_grid(dub, {0.5, 0.5, kQuarterPi});
  CHECK(g.neighbor_index(0, 0, -1) == 0);    // x wall
  CHECK(g.neighbor_index(10, 0, +1) == 10);  // opposite x wall
  CHECK(g.neighbor_index(0, 0, +1) == 1);
  CHECK(g.neighbor_index(7, 2, +1) == 0);  // theta wraps
  CHECK(g.neighbor_index(0, 2, -1) == 7);
}

TEST_CASE("max_delta closed forms") {
  // Pure diffusion: 1 / (g^2 / h^2).
  CHECK(max_delta(line_model("0", "1"), build_grid(line_model("0", "1"), {0.5}), one_input(0)) ==
        doctest::Approx(0.25).epsilon(1e-12));
  // Adding drift |f|=1: 1 / (4 + 2) = 1/6.
  CHECK(max_delta(line_model("1", "1"), build_grid(line_model("1", "1"), {0.5}), one_input(0)) ==
        doctest::Approx(1.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("max_delta scans the actual vector field over the grid") {
  const SdeModel dub = parse_model(dubins_doc(true)).model;
  const Grid g = build_grid(dub, {0.5, 0.5, kQuarterPi});
  std::vector<Eigen::VectorXd> inputs;
  for (double u : {-1.0, 0.0, 1.0}) inputs.push_back(one_input(u)[0]);

  // Worst case sits at theta = pi/4 (|cos|+|sin| maximal on the grid) and |u| = 1:
  //   0.25/0.25 * 2  +  0.25/(pi/4)^2  +  sqrt(2)/0.5  +  1/(pi/4).
  const double q = kQuarterPi;
  const double denom = 2.0 + 0.25 / (q * q) + 2.0 * std::sqrt(2.0) + 1.0 / q;
  CHECK(max_delta(dub, g, inputs) == doctest::Approx(1.0 / denom).epsilon(1e-12));
  CHECK(max_delta(dub, g, inputs) == doctest::Approx(0.153682).epsilon(1e-5));
}

TEST_CASE("max_delta rejects fully degenerate dynamics") {
  const SdeModel m = line_model("0", "0");
  CHECK_THROWS_AS(max_delta(m, build_grid(m, {0.5}), one_input(0)), std::invalid_argument);
}

TEST_CASE("kernel probabilities: pure diffusion row") {
  const SdeModel m = line_model("0", "1", 0.0, 4.0);
  const Grid g = build_grid(m, {0.5});
  const MarkovKernel k = build_kernel(m, g, one_input(0), Rational(1, 5));
  const auto r = k.row(4, 0);  // interior point x = 2
  CHECK(prob_to(r, 3) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(prob_to(r, 5) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(prob_to(r, 4) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(row_sum(r) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("kernel probabilities: drift splits the side masses") {
  const SdeModel m = line_model("1", "1", 0.0, 4.0);
  const Grid g = build_grid(m, {0.5});
  const MarkovKernel k = build_kernel(m, g, one_input(0), Rational(1, 10));
  const auto r = k.row(4, 0);
  CHECK(prob_to(r, 5) == doctest::Approx(0.4).epsilon(1e-15));  // upwind
  CHECK(prob_to(r, 3) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(prob_to(r, 4) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("kernel: degenerate dynamics stay put") {
  const SdeModel m = line_model("0", "0");
  const Grid g = build_grid(m, {0.5});
  const MarkovKernel k = build_kernel(m, g, one_input(0), Rational(1, 5));
  for (std::int64_t s = 0; s < g.num_points(); ++s) {
    const auto r = k.row(s, 0);
    CHECK(prob_to(r, s) == 1.0);
    CHECK(row_sum(r) == 1.0);
  }
}

TEST_CASE("kernel: oversized delta raises with the admissible bound") {
  const SdeModel m = line_model("0", "1");
  const Grid g = build_grid(m, {0.5});
  bool threw = false;
  try {
    build_kernel(m, g, one_input(0), Rational(1, 2));  // bound is 0.25
  } catch (const DeltaBoundError& e) {
    threw = true;
    CHECK(e.bound == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(e.input == 0);
  }
  CHECK(threw);
}

TEST_CASE("kernel: the override clamps and renormalizes") {
  const SdeModel m = line_model("0", "1");
  const Grid g = build_grid(m, {0.5});
  KernelBuildStats stats;
  const MarkovKernel k = build_kernel(m, g, one_input(0), Rational(1, 2), true, &stats);
  CHECK(stats.renormalized_rows > 0);
  CHECK(stats.worst_row_deficit < 0);
  for (std::int64_t s = 0; s < g.num_points(); ++s) {
    const auto r = k.row(s, 0);
    CHECK(row_sum(r) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::int64_t i = 0; i < r.size; ++i) CHECK(r.prob[i] >= 0.0);
  }
}

TEST_CASE("kernel: boundary mass is redirected onto the wall") {
  const SdeModel m = line_model("0", "1", 0.0, 4.0);
  const Grid g = build_grid(m, {0.5});
  const MarkovKernel k = build_kernel(m, g, one_input(0), Rational(1, 5));
  const auto left = k.row(0, 0);
  CHECK(prob_to(left, 0) == doctest::Approx(0.6).epsilon(1e-15));  // 0.2 stay + 0.4 redirected
  CHECK(prob_to(left, 1) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(row_sum(left) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("kernel: periodic dimension wraps instead of redirecting") {
  const SdeModel dub = parse_model(dubins_doc(true)).model;
  const Grid g = build_grid(dub, {0.5, 0.5, kQuarterPi});
  const MarkovKernel k = build_kernel(dub, g, one_input(1.0), Rational(1, 10));
  // State with theta index 7 (= 7pi/4): the +theta successor wraps to index 0.
  std::vector<int> idx{5, 5, 7};
  const std::int64_t s = g.flatten(idx);
  idx[2] = 0;
  const std::int64_t wrapped = g.flatten(idx);
  CHECK(prob_to(k.row(s, 0), wrapped) > 0.0);
}

TEST_CASE("kernel: every row is a distribution over the one-step stencil") {
  const SdeModel dub = parse_model(dubins_doc(true)).model;
  const Grid g = build_grid(dub, {0.5, 0.5, kQuarterPi});
  std::vector<Eigen::VectorXd> inputs;
  for (double u : {-1.0, 1.0}) inputs.push_back(one_input(u)[0]);
  const MarkovKernel k = build_kernel(dub, g, inputs, Rational(1, 10));
  CHECK(k.num_states == g.num_points());
  CHECK(k.num_inputs == 2);
  for (std::int64_t s = 0; s < k.num_states; ++s) {
    for (int a = 0; a < k.num_inputs; ++a) {
      const auto r = k.row(s, a);
      CHECK(r.size <= 7);  // 2n + 1
      CHECK(std::abs(row_sum(r) - 1.0) <= 1e-12);
      const std::vector<int> from = g.unflatten(s);
      for (std::int64_t i = 0; i < r.size; ++i) {
        CHECK(r.prob[i] >= 0.0);
        const std::vector<int> to = g.unflatten(r.succ[i]);
        int moved = 0;
        for (int d = 0; d < g.dims(); ++d)
          if (to[d] != from[d]) ++moved;
        CHECK(moved <= 1);  // sup-norm displacement is one step
      }
    }
  }
}

TEST_CASE("local consistency audit matches the closed-form moments") {
  const SdeModel m = line_model("1", "1", 0.0, 4.0);
  const Grid g = build_grid(m, {0.5});
  const MarkovKernel k = build_kernel(m, g, one_input(0), Rational(1, 10));
  const ConsistencyReport rep = audit_local_consistency(k, m, g, one_input(0));
  CHECK(rep.interior_pairs > 0);
  CHECK(rep.worst_mean_err <= 1e-10);
  CHECK(rep.worst_var_err <= 1e-10);
  CHECK(rep.worst_row_sum_err <= 1e-12);

  // By hand at an interior point: E[dx] = 0.5*(0.4 - 0.2) = 0.1 = delta * f.
  const auto r = k.row(4, 0);
  double mean = 0;
  for (std::int64_t i = 0; i < r.size; ++i)
    mean += r.prob[i] * (g.point(r.succ[i])[0] - g.point(4)[0]);
  CHECK(mean == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("local consistency holds across the dubins kernel") {
  const SdeModel dub = parse_model(dubins_doc(true)).model;
  const Grid g = build_grid(dub, {0.5, 0.5, kQuarterPi});
  std::vector<Eigen::VectorXd> inputs;
  for (double u : {-1.0, 0.0, 1.0}) inputs.push_back(one_input(u)[0]);
  const MarkovKernel k = build_kernel(dub, g, inputs, Rational(1, 10));
  const ConsistencyReport rep = audit_local_consistency(k, dub, g, inputs);
  CHECK(rep.interior_pairs > 0);
  CHECK(rep.worst_mean_err <= 1e-10);
  CHECK(rep.worst_var_err <= 1e-10);
  CHECK(rep.worst_row_sum_err <= 1e-12);
}

TEST_CASE("halving h scales the admissible delta like h^2 under pure diffusion") {
  const SdeModel m = line_model("0", "1", 0.0, 4.0);
  const double b1 = max_delta(m, build_grid(m, {0.5}), one_input(0));
  const double b2 = max_delta(m, build_grid(m, {0.25}), one_input(0));
  CHECK(b2 == doctest::Approx(b1 / 4.0).epsilon(1e-12));

  const SdeModel md = line_model("1", "1", 0.0, 4.0);
  const double c1 = max_delta(md, build_grid(md, {0.5}), one_input(0));
  const double c2 = max_delta(md, build_grid(md, {0.25}), one_input(0));
  CHECK(c2 < c1 / 2.0);  // diffusion term dominates the shrink rate
}

TEST_CASE("kernel export uses the documented CSV layout") {
  const SdeModel m = line_model("0", "1");
  const Grid g = build_grid(m, {0.5});
  const MarkovKernel k = build_kernel(m, g, one_input(0), Rational(1, 5));
  std::ostringstream out;
  export_kernel_csv(k, out);
  const std::string text = out.str();
  CHECK(text.rfind("state_id,input_id,succ_id,prob\n", 0) == 0);
  CHECK(text.find("\n0,0,0,") != std::string::npos);
}
