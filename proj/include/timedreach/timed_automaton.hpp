#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "timedreach/dynamics.hpp"  // SymbolSet
#include "timedreach/rational.hpp"

namespace timedreach {

struct AutomatonError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two simultaneously enabled edges: a modeling error, not a runtime branch.
struct DeterminismError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CmpOp : std::uint8_t { lt, le, gt, ge, eq, ne };

// Conjunction/disjunction tree over clock atoms  c <> K  and  c - c' <> K
// with non-negative integer constants.
class ClockConstraint {
 public:
  enum class Kind : std::uint8_t { tt, ff, cmp, diff_cmp, conj, disj };
  struct Node {
    Kind kind;
    int a = -1, b = -1;      // children for conj/disj
    int clock = -1, clock2 = -1;
    CmpOp op = CmpOp::le;
    std::int64_t k = 0;
  };

  static ClockConstraint constant(bool value);
  static ClockConstraint atom(int clock, CmpOp op, std::int64_t k);
  static ClockConstraint diff_atom(int clock, int clock2, CmpOp op, std::int64_t k);
  static ClockConstraint conj(const ClockConstraint& a, const ClockConstraint& b);
  static ClockConstraint disj(const ClockConstraint& a, const ClockConstraint& b);

  // Parses "c >= 3 && c <= 5", "true", "(c < 2 || c - d == 1) && c != 4", ...
  static ClockConstraint parse(const std::string& text, const std::vector<std::string>& clocks);

  // Exact evaluation at clock values ticks[i] * delta.
  bool eval_ticks(const std::vector<std::int64_t>& ticks, const Rational& delta) const;
  // Exact evaluation at arbitrary rational clock values.
  bool eval_values(const std::vector<Rational>& values) const;

  // Largest constant comparing the given clock (-1 when it never appears).
  std::int64_t max_constant(int clock) const;

  std::string str(const std::vector<std::string>& clocks) const;
  bool trivially_true() const;

 private:
  std::vector<Node> nodes_;  // root is nodes_.back()
  bool eval_node(int i, const std::vector<Rational>& values) const;
  int append(const ClockConstraint& other);  // returns new root of `other`
  void render(int i, const std::vector<std::string>& clocks, std::string& out) const;
};

// Edge labels are conjunctions of signed proposition literals; propositions
// not mentioned are don't-care.  pos == neg == 0 encodes the wildcard.
struct LabelMatcher {
  SymbolSet pos = 0;
  SymbolSet neg = 0;
  bool matches(SymbolSet s) const { return (s & pos) == pos && (s & neg) == 0; }
  bool wildcard() const { return pos == 0 && neg == 0; }
  // Two matchers that can both fire on some symbol.
  bool overlaps(const LabelMatcher& o) const { return (pos & o.neg) == 0 && (o.pos & neg) == 0; }
};

struct Edge {
  int source = 0;
  LabelMatcher label;
  ClockConstraint guard;
  int target = 0;
  std::vector<int> resets;
};

// Deterministic timed automaton with reachability acceptance.  The automaton
// is completed implicitly: accepting locations absorb, and any (location,
// symbol, valuation) without an enabled edge falls into a synthetic trap
// location with id num_locations()-1 (not part of `states`).
struct TimedAutomaton {
  std::vector<std::string> states;
  std::vector<std::string> ap;
  std::vector<std::string> clocks;
  std::vector<std::int64_t> clock_bound;  // declared per-clock range
  int init = 0;
  std::vector<bool> accepting;
  std::vector<Edge> edges;

  int num_locations() const { return static_cast<int>(states.size()) + 1; }
  int trap_location() const { return static_cast<int>(states.size()); }
  bool is_accepting(int q) const { return q < static_cast<int>(states.size()) && accepting[q]; }
  const std::string& location_name(int q) const;

  // Locations from which no accepting location is reachable in the edge
  // digraph; entering one settles the verdict to `rejected`.
  std::vector<bool> dead;

  // Declared bound raised to strictly exceed every guard constant, so a
  // saturated clock compares like any larger value.
  std::int64_t effective_bound(int clock) const;

  void finalize();  // validates and computes `dead`; called by loaders

  static TimedAutomaton from_json(const nlohmann::json& doc);
  static TimedAutomaton load_file(const std::string& path);
  nlohmann::json to_json() const;
  std::uint64_t content_hash() const;

  std::int64_t max_guard_constant(int clock) const;
};

// Clock space discretized to multiples of delta; clocks saturate at cap.
struct TickSpace {
  Rational delta;
  std::vector<std::int64_t> cap;  // per clock, in ticks

  std::int64_t ticks_per_clock(int i) const { return cap[i] + 1; }
  std::int64_t total_valuations() const {
    std::int64_t n = 1;
    for (std::int64_t c : cap) n *= (c + 1);
    return n;
  }
};

// Per-clock tick count = ceil(bound_i / delta) + 1, i.e. {0, delta, ...}.
TickSpace discretize_clocks(const TimedAutomaton& a, const Rational& delta);

struct AutomatonConfig {
  int q = 0;
  std::vector<std::int64_t> ticks;
};

bool eval_guard(const ClockConstraint& g, const std::vector<std::int64_t>& ticks,
                const Rational& delta);

// 0-elapse initialization move under the first observed symbol.
AutomatonConfig initial_config(const TimedAutomaton& a, const TickSpace& ts, SymbolSet sym);

// Advances every clock by `nticks` (saturating), then takes the unique
// enabled edge under `sym`; no enabled edge falls to the trap, accepting and
// trap locations absorb.
AutomatonConfig step_config(const TimedAutomaton& a, const TickSpace& ts,
                            const AutomatonConfig& cfg, SymbolSet sym, std::int64_t nticks = 1);

enum class Verdict { accepted, rejected, pending };
const char* verdict_str(Verdict v);

using TimedWord = std::vector<std::pair<Rational, SymbolSet>>;

// Point-based acceptance: timestamps must start at 0, increase strictly and
// be integer multiples of delta.
Verdict accept_timed_word(const TimedAutomaton& a, const TimedWord& word, const Rational& delta);

// Canonical sampling of a label sequence: (0,s0)(delta,s1)(2 delta,s2)...
TimedWord sample_behavior(const std::vector<SymbolSet>& labels, const Rational& delta);

struct ReachStage {
  std::vector<std::string> props;  // conjunction that must hold
  std::int64_t lo = 0;
  std::int64_t hi = 0;             // integer window [lo, hi], lo < hi
};

// Single-clock automaton for nested timed reachability: visit stage 1's
// target within [lo1, hi1], then stage 2's within [lo2, hi2] of that visit,
// ...; an optional avoid proposition must stay false throughout.  Hitting a
// stage target before its window opens rejects (first-visit semantics).
TimedAutomaton build_reach_fragment(const std::vector<ReachStage>& stages,
                                    const std::optional<std::string>& avoid);

struct DeterminismViolation {
  int q = 0;
  SymbolSet symbol = 0;
  std::vector<Rational> values;
  int edge_a = 0, edge_b = 0;
};

struct DeterminismReport {
  bool ok = true;
  std::vector<DeterminismViolation> violations;
};

// Exhaustive check over symbols and the integer-corner decomposition of
// clock space up to the saturation bounds.
DeterminismReport check_determinism(const TimedAutomaton& a);

}  // namespace timedreach
