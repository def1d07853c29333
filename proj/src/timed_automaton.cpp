#include "timedreach/timed_automaton.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "timedreach/hash.hpp"

namespace timedreach {

// ---------------------------------------------------------------------------
// clock constraints
// ---------------------------------------------------------------------------

ClockConstraint ClockConstraint::constant(bool value) {
  ClockConstraint c;
  c.nodes_.push_back({value ? Kind::tt : Kind::ff});
  return c;
}

ClockConstraint ClockConstraint::atom(int clock, CmpOp op, std::int64_t k) {
  if (k < 0) throw AutomatonError("guard: clock constants must be non-negative");
  ClockConstraint c;
  Node n{Kind::cmp};
  n.clock = clock;
  n.op = op;
  n.k = k;
  c.nodes_.push_back(n);
  return c;
}

ClockConstraint ClockConstraint::diff_atom(int clock, int clock2, CmpOp op, std::int64_t k) {
  if (k < 0) throw AutomatonError("guard: clock constants must be non-negative");
  ClockConstraint c;
  Node n{Kind::diff_cmp};
  n.clock = clock;
  n.clock2 = clock2;
  n.op = op;
  n.k = k;
  c.nodes_.push_back(n);
  return c;
}

int ClockConstraint::append(const ClockConstraint& other) {
  const int offset = static_cast<int>(nodes_.size());
  for (Node n : other.nodes_) {
    if (n.a >= 0) n.a += offset;
    if (n.b >= 0) n.b += offset;
    nodes_.push_back(n);
  }
  return static_cast<int>(nodes_.size()) - 1;
}

ClockConstraint ClockConstraint::conj(const ClockConstraint& a, const ClockConstraint& b) {
  ClockConstraint c;
  const int ra = c.append(a);
  const int rb = c.append(b);
  Node n{Kind::conj};
  n.a = ra;
  n.b = rb;
  c.nodes_.push_back(n);
  return c;
}

ClockConstraint ClockConstraint::disj(const ClockConstraint& a, const ClockConstraint& b) {
  ClockConstraint c;
  const int ra = c.append(a);
  const int rb = c.append(b);
  Node n{Kind::disj};
  n.a = ra;
  n.b = rb;
  c.nodes_.push_back(n);
  return c;
}

namespace {

bool cmp_holds(CmpOp op, const Rational& lhs, const Rational& rhs) {
  switch (op) {
    case CmpOp::lt: return lhs < rhs;
    case CmpOp::le: return lhs <= rhs;
    case CmpOp::gt: return lhs > rhs;
    case CmpOp::ge: return lhs >= rhs;
    case CmpOp::eq: return lhs == rhs;
    case CmpOp::ne: return lhs != rhs;
  }
  return false;
}

const char* cmp_str(CmpOp op) {
  switch (op) {
    case CmpOp::lt: return "<";
    case CmpOp::le: return "<=";
    case CmpOp::gt: return ">";
    case CmpOp::ge: return ">=";
    case CmpOp::eq: return "==";
    case CmpOp::ne: return "!=";
  }
  return "?";
}

}  // namespace

bool ClockConstraint::eval_node(int i, const std::vector<Rational>& values) const {
  const Node& n = nodes_[i];
  switch (n.kind) {
    case Kind::tt: return true;
    case Kind::ff: return false;
    case Kind::cmp: return cmp_holds(n.op, values[n.clock], Rational(n.k));
    case Kind::diff_cmp:
      return cmp_holds(n.op, values[n.clock] - values[n.clock2], Rational(n.k));
    case Kind::conj: return eval_node(n.a, values) && eval_node(n.b, values);
    case Kind::disj: return eval_node(n.a, values) || eval_node(n.b, values);
  }
  return false;
}

bool ClockConstraint::eval_values(const std::vector<Rational>& values) const {
  if (nodes_.empty()) return true;  // default-constructed guard
  return eval_node(static_cast<int>(nodes_.size()) - 1, values);
}

bool ClockConstraint::eval_ticks(const std::vector<std::int64_t>& ticks,
                                 const Rational& delta) const {
  // ticks[i] * num <> k * den, exactly in integers.
  std::vector<Rational> values(ticks.size());
  for (std::size_t i = 0; i < ticks.size(); ++i)
    values[i] = Rational(ticks[i] * delta.num, delta.den);
  return eval_values(values);
}

std::int64_t ClockConstraint::max_constant(int clock) const {
  std::int64_t k = -1;  // -1: the clock is never compared
  for (const Node& n : nodes_)
    if ((n.kind == Kind::cmp && n.clock == clock) ||
        (n.kind == Kind::diff_cmp && (n.clock == clock || n.clock2 == clock)))
      k = std::max(k, n.k);
  return k;
}

bool ClockConstraint::trivially_true() const {
  return nodes_.empty() || (nodes_.size() == 1 && nodes_[0].kind == Kind::tt);
}

void ClockConstraint::render(int i, const std::vector<std::string>& clocks,
                             std::string& out) const {
  const Node& n = nodes_[i];
  switch (n.kind) {
    case Kind::tt: out += "true"; break;
    case Kind::ff: out += "false"; break;
    case Kind::cmp:
      out += clocks[n.clock];
      out += ' ';
      out += cmp_str(n.op);
      out += ' ';
      out += std::to_string(n.k);
      break;
    case Kind::diff_cmp:
      out += clocks[n.clock];
      out += " - ";
      out += clocks[n.clock2];
      out += ' ';
      out += cmp_str(n.op);
      out += ' ';
      out += std::to_string(n.k);
      break;
    case Kind::conj: {
      const bool pa = nodes_[n.a].kind == Kind::disj;
      const bool pb = nodes_[n.b].kind == Kind::disj;
      if (pa) out += '(';
      render(n.a, clocks, out);
      if (pa) out += ')';
      out += " && ";
      if (pb) out += '(';
      render(n.b, clocks, out);
      if (pb) out += ')';
      break;
    }
    case Kind::disj:
      render(n.a, clocks, out);
      out += " || ";
      render(n.b, clocks, out);
      break;
  }
}

std::string ClockConstraint::str(const std::vector<std::string>& clocks) const {
  if (nodes_.empty()) return "true";
  std::string out;
  render(static_cast<int>(nodes_.size()) - 1, clocks, out);
  return out;
}

namespace {

// Tiny recursive-descent parser for guard strings.
class GuardParser {
 public:
  GuardParser(const std::string& text, const std::vector<std::string>& clocks)
      : text_(text), clocks_(clocks) {}

  ClockConstraint run() {
    ClockConstraint c = parse_or();
    skip_ws();
    if (pos_ < text_.size()) fail("trailing input");
    return c;
  }

 private:
  const std::string& text_;
  const std::vector<std::string>& clocks_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw AutomatonError("guard: " + msg + " in '" + text_ + "' at offset " +
                         std::to_string(pos_));
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(const std::string& tok) {
    skip_ws();
    if (text_.compare(pos_, tok.size(), tok) == 0) {
      pos_ += tok.size();
      return true;
    }
    return false;
  }

  ClockConstraint parse_or() {
    ClockConstraint c = parse_and();
    while (eat("||")) c = ClockConstraint::disj(c, parse_and());
    return c;
  }

  ClockConstraint parse_and() {
    ClockConstraint c = parse_primary();
    while (eat("&&")) c = ClockConstraint::conj(c, parse_primary());
    return c;
  }

  ClockConstraint parse_primary() {
    skip_ws();
    if (eat("(")) {
      ClockConstraint c = parse_or();
      if (!eat(")")) fail("expected ')'");
      return c;
    }
    const std::string ident = read_ident();
    if (ident == "true") return ClockConstraint::constant(true);
    if (ident == "false") return ClockConstraint::constant(false);
    const int c1 = clock_index(ident);
    skip_ws();
    int c2 = -1;
    if (pos_ < text_.size() && text_[pos_] == '-') {
      ++pos_;
      c2 = clock_index(read_ident());
    }
    const CmpOp op = read_op();
    const std::int64_t k = read_uint();
    return c2 < 0 ? ClockConstraint::atom(c1, op, k) : ClockConstraint::diff_atom(c1, c2, op, k);
  }

  std::string read_ident() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    if (pos_ == start) fail("expected identifier");
    return text_.substr(start, pos_ - start);
  }

  int clock_index(const std::string& name) {
    const auto it = std::find(clocks_.begin(), clocks_.end(), name);
    if (it == clocks_.end()) fail("unknown clock '" + name + "'");
    return static_cast<int>(it - clocks_.begin());
  }

  CmpOp read_op() {
    if (eat("<=")) return CmpOp::le;
    if (eat(">=")) return CmpOp::ge;
    if (eat("==")) return CmpOp::eq;
    if (eat("!=")) return CmpOp::ne;
    if (eat("<")) return CmpOp::lt;
    if (eat(">")) return CmpOp::gt;
    if (eat("=")) return CmpOp::eq;
    fail("expected comparison operator");
  }

  std::int64_t read_uint() {
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == start) fail("expected non-negative integer constant");
    return std::stoll(text_.substr(start, pos_ - start));
  }
};

}  // namespace

ClockConstraint ClockConstraint::parse(const std::string& text,
                                       const std::vector<std::string>& clocks) {
  return GuardParser(text, clocks).run();
}

// ---------------------------------------------------------------------------
// automaton
// ---------------------------------------------------------------------------

const std::string& TimedAutomaton::location_name(int q) const {
  static const std::string trap_name = "__trap__";
  return q == trap_location() ? trap_name : states[q];
}

std::int64_t TimedAutomaton::max_guard_constant(int clock) const {
  std::int64_t k = -1;  // -1: the clock is never compared by any guard
  for (const Edge& e : edges) k = std::max(k, e.guard.max_constant(clock));
  return k;
}

std::int64_t TimedAutomaton::effective_bound(int clock) const {
  return std::max(clock_bound[clock], max_guard_constant(clock) + 1);
}

void TimedAutomaton::finalize() {
  if (states.empty()) throw AutomatonError("automaton: no states");
  if (ap.size() > 32) throw AutomatonError("automaton: at most 32 propositions supported");
  if (clocks.empty()) throw AutomatonError("automaton: at least one clock required");
  if (clocks.size() > 4) throw AutomatonError("automaton: at most 4 clocks supported");
  if (accepting.size() != states.size())
    throw AutomatonError("automaton: accepting flags out of sync");
  for (const Edge& e : edges) {
    if (e.source < 0 || e.source >= static_cast<int>(states.size()) || e.target < 0 ||
        e.target >= static_cast<int>(states.size()))
      throw AutomatonError("automaton: edge endpoint out of range");
    for (int r : e.resets)
      if (r < 0 || r >= static_cast<int>(clocks.size()))
        throw AutomatonError("automaton: reset of unknown clock");
  }
  for (std::size_t i = 0; i < clocks.size(); ++i)
    if (clock_bound[i] < max_guard_constant(static_cast<int>(i)))
      throw AutomatonError("automaton: clock bound for '" + clocks[i] +
                           "' is below a guard constant");

  // Backward reachability from accepting locations over the edge digraph
  // (guards ignored, which only shrinks the dead set — safe for verdicts).
  dead.assign(num_locations(), true);
  std::vector<std::vector<int>> preds(states.size());
  for (const Edge& e : edges) preds[e.target].push_back(e.source);
  std::vector<int> stack;
  for (std::size_t q = 0; q < states.size(); ++q)
    if (accepting[q]) {
      dead[q] = false;
      stack.push_back(static_cast<int>(q));
    }
  while (!stack.empty()) {
    const int q = stack.back();
    stack.pop_back();
    for (int p : preds[q])
      if (dead[p]) {
        dead[p] = false;
        stack.push_back(p);
      }
  }
}

TickSpace discretize_clocks(const TimedAutomaton& a, const Rational& delta) {
  if (!delta.positive()) throw AutomatonError("clock space: delta must be positive");
  TickSpace ts;
  ts.delta = delta;
  for (std::size_t i = 0; i < a.clocks.size(); ++i)
    ts.cap.push_back(ceil_int(Rational(a.effective_bound(static_cast<int>(i))) / delta));
  return ts;
}

bool eval_guard(const ClockConstraint& g, const std::vector<std::int64_t>& ticks,
                const Rational& delta) {
  return g.eval_ticks(ticks, delta);
}

namespace {

int resolve_edge(const TimedAutomaton& a, const std::vector<std::int64_t>& ticks,
                 const Rational& delta, int q, SymbolSet sym) {
  int found = -1;
  for (std::size_t e = 0; e < a.edges.size(); ++e) {
    const Edge& ed = a.edges[e];
    if (ed.source != q || !ed.label.matches(sym)) continue;
    if (!ed.guard.eval_ticks(ticks, delta)) continue;
    if (found >= 0)
      throw DeterminismError("automaton: edges " + std::to_string(found) + " and " +
                             std::to_string(e) + " both enabled from '" + a.states[q] + "'");
    found = static_cast<int>(e);
  }
  return found;
}

}  // namespace

AutomatonConfig step_config(const TimedAutomaton& a, const TickSpace& ts,
                            const AutomatonConfig& cfg, SymbolSet sym, std::int64_t nticks) {
  AutomatonConfig next = cfg;
  for (std::size_t i = 0; i < next.ticks.size(); ++i)
    next.ticks[i] = std::min(next.ticks[i] + nticks, ts.cap[i]);
  if (next.q == a.trap_location() || a.is_accepting(next.q)) return next;  // absorbing

  const int e = resolve_edge(a, next.ticks, ts.delta, next.q, sym);
  if (e < 0) {
    next.q = a.trap_location();
    return next;
  }
  next.q = a.edges[e].target;
  for (int r : a.edges[e].resets) next.ticks[r] = 0;
  return next;
}

AutomatonConfig initial_config(const TimedAutomaton& a, const TickSpace& ts, SymbolSet sym) {
  AutomatonConfig cfg;
  cfg.q = a.init;
  cfg.ticks.assign(a.clocks.size(), 0);
  return step_config(a, ts, cfg, sym, 0);
}

const char* verdict_str(Verdict v) {
  switch (v) {
    case Verdict::accepted: return "accepted";
    case Verdict::rejected: return "rejected";
    case Verdict::pending: return "pending";
  }
  return "?";
}

Verdict accept_timed_word(const TimedAutomaton& a, const TimedWord& word, const Rational& delta) {
  if (word.empty()) return Verdict::pending;
  if (word[0].first != Rational(0))
    throw AutomatonError("timed word: first timestamp must be 0");
  const TickSpace ts = discretize_clocks(a, delta);

  AutomatonConfig cfg = initial_config(a, ts, word[0].second);
  auto settled = [&](const AutomatonConfig& c) -> std::optional<Verdict> {
    if (a.is_accepting(c.q)) return Verdict::accepted;
    if (a.dead[c.q]) return Verdict::rejected;
    return std::nullopt;
  };
  if (auto v = settled(cfg)) return *v;

  for (std::size_t i = 1; i < word.size(); ++i) {
    const Rational gap = word[i].first - word[i - 1].first;
    if (!gap.positive()) throw AutomatonError("timed word: timestamps must increase strictly");
    const Rational nticks = gap / delta;
    if (!nticks.is_integer())
      throw AutomatonError("timed word: timestamp " + word[i].first.str() +
                           " is not a multiple of the tick " + delta.str());
    cfg = step_config(a, ts, cfg, word[i].second, nticks.num);
    if (auto v = settled(cfg)) return *v;
  }
  return Verdict::pending;
}

TimedWord sample_behavior(const std::vector<SymbolSet>& labels, const Rational& delta) {
  TimedWord w;
  w.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    w.emplace_back(Rational(static_cast<std::int64_t>(i)) * delta, labels[i]);
  return w;
}

// ---------------------------------------------------------------------------
// JSON document form
// ---------------------------------------------------------------------------

namespace {

int name_index(const std::vector<std::string>& names, const std::string& name,
               const std::string& what) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw AutomatonError("automaton: unknown " + what + " '" + name + "'");
  return static_cast<int>(it - names.begin());
}

LabelMatcher parse_label(const nlohmann::json& j, const std::vector<std::string>& ap) {
  LabelMatcher m;
  if (j.is_string()) {
    if (j.get<std::string>() != "*")
      throw AutomatonError("automaton: string label must be the wildcard \"*\"");
    return m;
  }
  if (j.is_object()) {  // {"exact": ["R1"]} - match that symbol set exactly
    if (!j.contains("exact") || !j["exact"].is_array())
      throw AutomatonError("automaton: object label must carry an \"exact\" array");
    for (const auto& e : j["exact"])
      m.pos |= SymbolSet{1} << name_index(ap, e.get<std::string>(), "proposition");
    m.neg = ~m.pos & ((ap.size() == 32 ? ~SymbolSet{0} : (SymbolSet{1} << ap.size()) - 1));
    return m;
  }
  if (!j.is_array()) throw AutomatonError("automaton: label must be \"*\", a list or {\"exact\":[..]}");
  for (const auto& e : j) {
    std::string lit = e.get<std::string>();
    bool negated = false;
    if (!lit.empty() && (lit[0] == '!' || lit[0] == '~')) {
      negated = true;
      lit = lit.substr(1);
    }
    const SymbolSet bit = SymbolSet{1} << name_index(ap, lit, "proposition");
    (negated ? m.neg : m.pos) |= bit;
  }
  if (m.pos & m.neg) throw AutomatonError("automaton: label literal contradicts itself");
  return m;
}

std::vector<std::string> collect_ap(const nlohmann::json& doc) {
  std::set<std::string> names;
  if (doc.contains("ap"))
    for (const auto& e : doc["ap"]) names.insert(e.get<std::string>());
  for (const auto& ej : doc["edges"]) {
    const auto& l = ej["label"];
    if (l.is_array())
      for (const auto& e : l) {
        std::string lit = e.get<std::string>();
        if (!lit.empty() && (lit[0] == '!' || lit[0] == '~')) lit = lit.substr(1);
        names.insert(lit);
      }
    else if (l.is_object() && l.contains("exact"))
      for (const auto& e : l["exact"]) names.insert(e.get<std::string>());
  }
  return {names.begin(), names.end()};
}

}  // namespace

TimedAutomaton TimedAutomaton::from_json(const nlohmann::json& doc) {
  TimedAutomaton a;
  for (const char* key : {"clocks", "states", "init", "accepting", "edges"})
    if (!doc.contains(key)) throw AutomatonError(std::string("automaton: missing key '") + key + "'");

  for (const auto& s : doc["states"]) a.states.push_back(s.get<std::string>());
  a.ap = collect_ap(doc);
  for (const auto& [name, bound] : doc["clocks"].items()) {
    a.clocks.push_back(name);
    if (!bound.is_number_integer() || bound.get<std::int64_t>() < 0)
      throw AutomatonError("automaton: clock bound for '" + name +
                           "' must be a non-negative integer");
    a.clock_bound.push_back(bound.get<std::int64_t>());
  }
  a.init = name_index(a.states, doc["init"].get<std::string>(), "state");
  a.accepting.assign(a.states.size(), false);
  for (const auto& s : doc["accepting"])
    a.accepting[name_index(a.states, s.get<std::string>(), "state")] = true;

  for (const auto& ej : doc["edges"]) {
    Edge e;
    e.source = name_index(a.states, ej.at("source").get<std::string>(), "state");
    e.target = name_index(a.states, ej.at("target").get<std::string>(), "state");
    e.label = parse_label(ej.at("label"), a.ap);
    e.guard = ClockConstraint::parse(ej.at("guard").get<std::string>(), a.clocks);
    if (ej.contains("resets"))
      for (const auto& r : ej["resets"])
        e.resets.push_back(name_index(a.clocks, r.get<std::string>(), "clock"));
    a.edges.push_back(std::move(e));
  }
  a.finalize();
  return a;
}

TimedAutomaton TimedAutomaton::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw AutomatonError("automaton: not found: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw AutomatonError(std::string("automaton: ") + e.what());
  }
  return from_json(doc);
}

nlohmann::json TimedAutomaton::to_json() const {
  nlohmann::json doc;
  doc["ap"] = ap;
  nlohmann::json clks = nlohmann::json::object();
  for (std::size_t i = 0; i < clocks.size(); ++i) clks[clocks[i]] = clock_bound[i];
  doc["clocks"] = clks;
  doc["states"] = states;
  doc["init"] = states[init];
  nlohmann::json acc = nlohmann::json::array();
  for (std::size_t q = 0; q < states.size(); ++q)
    if (accepting[q]) acc.push_back(states[q]);
  doc["accepting"] = acc;
  nlohmann::json edges_j = nlohmann::json::array();
  for (const Edge& e : edges) {
    nlohmann::json ej;
    ej["source"] = states[e.source];
    ej["target"] = states[e.target];
    if (e.label.wildcard()) {
      ej["label"] = "*";
    } else {
      nlohmann::json lits = nlohmann::json::array();
      for (std::size_t p = 0; p < ap.size(); ++p) {
        if (e.label.pos & (SymbolSet{1} << p)) lits.push_back(ap[p]);
        if (e.label.neg & (SymbolSet{1} << p)) lits.push_back("!" + ap[p]);
      }
      ej["label"] = lits;
    }
    ej["guard"] = e.guard.str(clocks);
    nlohmann::json resets = nlohmann::json::array();
    for (int r : e.resets) resets.push_back(clocks[r]);
    ej["resets"] = resets;
    edges_j.push_back(ej);
  }
  doc["edges"] = edges_j;
  return doc;
}

std::uint64_t TimedAutomaton::content_hash() const { return fnv1a(to_json().dump()); }

// ---------------------------------------------------------------------------
// bounded-reachability fragment
// ---------------------------------------------------------------------------

TimedAutomaton build_reach_fragment(const std::vector<ReachStage>& stages,
                                    const std::optional<std::string>& avoid) {
  if (stages.empty()) throw AutomatonError("fragment: at least one stage required");
  std::vector<ReachStage> stg = stages;
  for (ReachStage& st : stg) {
    std::sort(st.props.begin(), st.props.end());
    st.props.erase(std::unique(st.props.begin(), st.props.end()), st.props.end());
    if (st.props.empty()) throw AutomatonError("fragment: stage without target propositions");
    if (st.lo < 0 || st.lo >= st.hi)
      throw AutomatonError("fragment: window [" + std::to_string(st.lo) + ", " +
                           std::to_string(st.hi) + "] must be non-singular with 0 <= lo < hi");
  }

  TimedAutomaton a;
  std::set<std::string> names;
  for (const ReachStage& st : stg) names.insert(st.props.begin(), st.props.end());
  if (avoid) names.insert(*avoid);
  a.ap.assign(names.begin(), names.end());
  a.clocks = {"c"};
  std::int64_t bound = 0;
  for (const ReachStage& st : stg) bound = std::max(bound, st.hi);
  a.clock_bound = {bound};

  const int k = static_cast<int>(stg.size());
  for (int i = 1; i <= k; ++i) a.states.push_back("stage" + std::to_string(i));
  a.states.push_back("accept");
  a.states.push_back("trap");
  const int accept = k, trap = k + 1;
  a.init = 0;
  a.accepting.assign(a.states.size(), false);
  a.accepting[accept] = true;

  const auto bit = [&](const std::string& p) {
    return SymbolSet{1} << static_cast<SymbolSet>(
               std::find(a.ap.begin(), a.ap.end(), p) - a.ap.begin());
  };
  const SymbolSet avoid_bit = avoid ? bit(*avoid) : 0;

  for (int i = 0; i < k; ++i) {
    const ReachStage& st = stg[i];
    SymbolSet target = 0;
    for (const std::string& p : st.props) target |= bit(p);
    const int next = (i + 1 == k) ? accept : i + 1;

    if (avoid) {  // the avoid region dominates everything else
      Edge e;
      e.source = i;
      e.label = {avoid_bit, 0};
      e.guard = ClockConstraint::constant(true);
      e.target = trap;
      a.edges.push_back(e);
    }
    {  // target met inside the window: advance and restart the clock
      Edge e;
      e.source = i;
      e.label = {target, avoid_bit};
      e.guard = st.lo == 0 ? ClockConstraint::atom(0, CmpOp::le, st.hi)
                           : ClockConstraint::conj(ClockConstraint::atom(0, CmpOp::ge, st.lo),
                                                   ClockConstraint::atom(0, CmpOp::le, st.hi));
      e.target = next;
      e.resets = {0};
      a.edges.push_back(e);
    }
    if (st.lo > 0) {  // target met too early: rejected
      Edge e;
      e.source = i;
      e.label = {target, avoid_bit};
      e.guard = ClockConstraint::atom(0, CmpOp::lt, st.lo);
      e.target = trap;
      a.edges.push_back(e);
    }
    // target unmet, window still open: wait.  The negation of a conjunction
    // is split into disjoint literal pieces to keep the automaton
    // deterministic.
    for (std::size_t j = 0; j < st.props.size(); ++j) {
      Edge e;
      e.source = i;
      SymbolSet pos = 0;
      for (std::size_t l = 0; l < j; ++l) pos |= bit(st.props[l]);
      e.label = {pos, bit(st.props[j]) | avoid_bit};
      e.guard = ClockConstraint::atom(0, CmpOp::le, st.hi);
      e.target = i;
      a.edges.push_back(e);
    }
    {  // window expired
      Edge e;
      e.source = i;
      e.label = {0, avoid_bit};
      e.guard = ClockConstraint::atom(0, CmpOp::gt, st.hi);
      e.target = trap;
      a.edges.push_back(e);
    }
  }
  for (int q : {accept, trap}) {  // explicit absorption, mirrors the semantics
    Edge e;
    e.source = q;
    e.guard = ClockConstraint::constant(true);
    e.target = q;
    a.edges.push_back(e);
  }
  a.finalize();
  return a;
}

// ---------------------------------------------------------------------------
// determinism check
// ---------------------------------------------------------------------------

DeterminismReport check_determinism(const TimedAutomaton& a) {
  DeterminismReport rep;
  const int m = static_cast<int>(a.clocks.size());

  // Candidate clock values: integer corners up to the saturation bound plus
  // m+1 evenly spaced fractional offsets, which covers every region of the
  // integer-constant decomposition (orderings of fractional parts included).
  std::vector<std::vector<Rational>> cand(m);
  for (int i = 0; i < m; ++i) {
    const std::int64_t top = a.effective_bound(i);
    for (std::int64_t k = 0; k <= top; ++k)
      for (int j = 0; j <= m; ++j) {
        if (k == top && j > 0) break;
        cand[i].push_back(Rational(k) + Rational(j, m + 1));
      }
  }

  for (std::size_t e1 = 0; e1 < a.edges.size(); ++e1) {
    for (std::size_t e2 = e1 + 1; e2 < a.edges.size(); ++e2) {
      const Edge& x = a.edges[e1];
      const Edge& y = a.edges[e2];
      if (x.source != y.source || !x.label.overlaps(y.label)) continue;
      if (a.is_accepting(x.source)) continue;  // absorbing, explicit edges are cosmetic
      const SymbolSet sym = x.label.pos | y.label.pos;

      std::vector<int> pick(m, 0);
      std::vector<Rational> vals(m);
      bool done = false;
      while (!done) {
        for (int i = 0; i < m; ++i) vals[i] = cand[i][pick[i]];
        if (x.guard.eval_values(vals) && y.guard.eval_values(vals)) {
          rep.ok = false;
          rep.violations.push_back(
              {x.source, sym, vals, static_cast<int>(e1), static_cast<int>(e2)});
          break;
        }
        int i = m - 1;
        while (i >= 0 && pick[i] + 1 >= static_cast<int>(cand[i].size())) {
          pick[i] = 0;
          --i;
        }
        if (i < 0)
          done = true;
        else
          ++pick[i];
      }
    }
  }
  return rep;
}

}  // namespace timedreach
