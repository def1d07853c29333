#include "timedreach/product_mdp.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "timedreach/dynamics.hpp"
#include "timedreach/hash.hpp"

namespace timedreach {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("product: cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("product: cannot read '" + path + "'");
  return in;
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

}  // namespace

std::vector<std::int64_t> ProductMdp::decode_ticks(std::int64_t clock_idx) const {
  std::vector<std::int64_t> t(clock_caps.size());
  for (int i = static_cast<int>(clock_caps.size()) - 1; i >= 0; --i) {
    const std::int64_t n = clock_caps[i] + 1;
    t[i] = clock_idx % n;
    clock_idx /= n;
  }
  return t;
}

std::int64_t ProductMdp::encode_ticks(const std::vector<std::int64_t>& ticks) const {
  std::int64_t idx = 0;
  for (std::size_t i = 0; i < clock_caps.size(); ++i) idx = idx * (clock_caps[i] + 1) + ticks[i];
  return idx;
}

std::uint64_t ProductMdp::key(std::int64_t grid_id, int q, std::int64_t clock_idx) const {
  // Exact composite key; rebuild_index() verified the ranges cannot collide.
  return (static_cast<std::uint64_t>(grid_id + 1) * key_loc_ + static_cast<std::uint64_t>(q + 1)) *
             key_clk_ +
         static_cast<std::uint64_t>(clock_idx);
}

std::int64_t ProductMdp::find_state(std::int64_t grid_id, int q, std::int64_t clock_idx) const {
  if (q + 1 < 0 || static_cast<std::uint64_t>(q + 1) >= key_loc_) return -1;
  if (clock_idx < 0 || static_cast<std::uint64_t>(clock_idx) >= key_clk_) return -1;
  if (grid_id < -1) return -1;
  const auto it = index_.find(key(grid_id, q, clock_idx));
  return it == index_.end() ? -1 : it->second;
}

void ProductMdp::rebuild_index() {
  std::int64_t max_grid = 0;
  int max_q = 0;
  for (const State& s : states) {
    max_grid = std::max(max_grid, s.grid_id);
    max_q = std::max(max_q, s.q);
  }
  std::int64_t total_clk = 1;
  for (std::int64_t c : clock_caps) total_clk *= (c + 1);
  key_loc_ = static_cast<std::uint64_t>(max_q) + 2;
  key_clk_ = static_cast<std::uint64_t>(total_clk);
  const unsigned __int128 top = (static_cast<unsigned __int128>(max_grid + 2) * key_loc_) * key_clk_;
  if (top > static_cast<unsigned __int128>(UINT64_MAX))
    throw std::overflow_error("product: state key space exceeds 64 bits");
  index_.clear();
  index_.reserve(states.size() * 2);
  for (std::int64_t i = 0; i < num_states(); ++i)
    index_.emplace(key(states[i].grid_id, states[i].q, states[i].clock_idx), i);
}

ProductMdp build_product(const MarkovKernel& kernel, const TimedAutomaton& a,
                         const TickSpace& ts, const Labeling& lab, const Grid& grid,
                         const std::vector<Eigen::VectorXd>& inputs, const Eigen::VectorXd& x0,
                         ProductCoverage coverage) {
  if (kernel.num_states != grid.num_points())
    throw std::invalid_argument("product: kernel was built on a different grid");
  if (kernel.num_inputs != static_cast<int>(inputs.size()))
    throw std::invalid_argument("product: kernel was built for a different input set");
  if (!(kernel.delta == ts.delta))
    throw std::invalid_argument("product: kernel and clock space disagree on delta");

  // The automaton alphabet must be a subset of the model's propositions; cell
  // labels are projected onto automaton bit order once, up front.
  const int nap = static_cast<int>(a.ap.size());
  std::vector<int> ap_model(nap);
  for (int i = 0; i < nap; ++i) {
    const int j = lab.prop_index(a.ap[i]);
    if (j < 0)
      throw ModelError("product: automaton proposition '" + a.ap[i] +
                       "' is not labeled in the model");
    ap_model[i] = j;
  }
  std::vector<SymbolSet> cell_sym(static_cast<std::size_t>(grid.num_points()));
  for (std::int64_t g = 0; g < grid.num_points(); ++g) {
    const SymbolSet full = label_of(lab, grid.point(g));
    SymbolSet s = 0;
    for (int i = 0; i < nap; ++i)
      if ((full >> ap_model[i]) & 1u) s |= (SymbolSet{1} << i);
    cell_sym[static_cast<std::size_t>(g)] = s;
  }

  ProductMdp mdp;
  mdp.delta = kernel.delta;
  mdp.clock_caps = ts.cap;
  mdp.num_inputs = kernel.num_inputs;
  mdp.inputs = inputs;
  mdp.automaton_hash = a.content_hash();
  mdp.grid_h = grid.h;

  const std::uint64_t L = static_cast<std::uint64_t>(a.num_locations()) + 2;
  const std::uint64_t C = static_cast<std::uint64_t>(ts.total_valuations());
  auto key = [&](std::int64_t g, int q, std::int64_t c) -> std::uint64_t {
    return (static_cast<std::uint64_t>(g + 1) * L + static_cast<std::uint64_t>(q + 1)) * C +
           static_cast<std::uint64_t>(c);
  };
  std::unordered_map<std::uint64_t, std::int64_t> idx;
  std::vector<ProductMdp::State> sts;
  std::deque<std::int64_t> work;
  auto intern = [&](std::int64_t g, int q, std::int64_t c) -> std::int64_t {
    const std::uint64_t k = key(g, q, c);
    const auto it = idx.find(k);
    if (it != idx.end()) return it->second;
    const auto id = static_cast<std::int64_t>(sts.size());
    idx.emplace(k, id);
    sts.push_back({g, q, c});
    work.push_back(id);
    return id;
  };

  const std::int64_t sink = intern(-1, -1, 0);
  const std::int64_t g0 = grid.snap(x0);
  const AutomatonConfig cfg0 =
      initial_config(a, ts, cell_sym[static_cast<std::size_t>(g0)]);
  const std::int64_t init = intern(g0, cfg0.q, mdp.encode_ticks(cfg0.ticks));
  if (coverage == ProductCoverage::full) {
    // A monitored trajectory can occupy any (cell, live location, valuation):
    // the grid part is snapped from the continuous state, not walked along
    // chain edges.  Seeding them all makes find_state total on that domain.
    for (int q = 0; q < a.num_locations(); ++q) {
      if (a.is_accepting(q) || a.dead[static_cast<std::size_t>(q)]) continue;
      for (std::int64_t g = 0; g < grid.num_points(); ++g)
        for (std::int64_t c = 0; c < static_cast<std::int64_t>(C); ++c) intern(g, q, c);
    }
  }

  std::vector<std::vector<std::vector<std::pair<std::int64_t, double>>>> rows;
  while (!work.empty()) {
    const std::int64_t id = work.front();
    work.pop_front();
    if (static_cast<std::int64_t>(rows.size()) <= id) rows.resize(static_cast<std::size_t>(id) + 1);
    const ProductMdp::State st = sts[static_cast<std::size_t>(id)];  // copy: sts may grow below
    auto& r = rows[static_cast<std::size_t>(id)];
    r.assign(static_cast<std::size_t>(mdp.num_inputs), {});
    if (st.grid_id < 0) {  // sink: absorb under every input
      for (auto& row : r) row.assign(1, {id, 1.0});
      continue;
    }
    if (a.is_accepting(st.q)) {  // goal: collect the unit reward once, then park
      for (auto& row : r) row.assign(1, {sink, 1.0});
      continue;
    }
    const AutomatonConfig cfg{st.q, mdp.decode_ticks(st.clock_idx)};
    for (int in = 0; in < mdp.num_inputs; ++in) {
      const auto krow = kernel.row(st.grid_id, in);
      auto& out = r[static_cast<std::size_t>(in)];
      out.reserve(static_cast<std::size_t>(krow.size));
      for (std::int64_t e = 0; e < krow.size; ++e) {
        const std::int64_t gn = krow.succ[e];
        const AutomatonConfig nx =
            step_config(a, ts, cfg, cell_sym[static_cast<std::size_t>(gn)], 1);
        out.emplace_back(intern(gn, nx.q, mdp.encode_ticks(nx.ticks)), krow.prob[e]);
      }
    }
  }

  // Canonical order: lexicographic (grid cell, location, clock valuation),
  // sink last, so exported ids are reproducible across runs.
  const auto n = static_cast<std::int64_t>(sts.size());
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t lhs, std::int64_t rhs) {
    const auto& sa = sts[static_cast<std::size_t>(lhs)];
    const auto& sb = sts[static_cast<std::size_t>(rhs)];
    const bool pa = sa.grid_id < 0, pb = sb.grid_id < 0;
    if (pa != pb) return pb;  // sink sorts last
    return std::tie(sa.grid_id, sa.q, sa.clock_idx) < std::tie(sb.grid_id, sb.q, sb.clock_idx);
  });
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i;

  mdp.states.resize(static_cast<std::size_t>(n));
  mdp.goal.assign(static_cast<std::size_t>(n), false);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& st = sts[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
    mdp.states[static_cast<std::size_t>(i)] = st;
    mdp.goal[static_cast<std::size_t>(i)] = st.grid_id >= 0 && a.is_accepting(st.q);
  }
  mdp.init_id = perm[static_cast<std::size_t>(init)];
  mdp.sink_id = perm[static_cast<std::size_t>(sink)];

  mdp.row_ptr.assign(static_cast<std::size_t>(n) * mdp.num_inputs + 1, 0);
  std::int64_t total = 0;
  for (std::int64_t i = 0; i < n; ++i)
    for (int in = 0; in < mdp.num_inputs; ++in) {
      total += static_cast<std::int64_t>(
          rows[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])][static_cast<std::size_t>(in)].size());
      mdp.row_ptr[static_cast<std::size_t>(i) * mdp.num_inputs + in + 1] = total;
    }
  mdp.succ.resize(static_cast<std::size_t>(total));
  mdp.prob.resize(static_cast<std::size_t>(total));
  std::int64_t at = 0;
  std::vector<std::pair<std::int64_t, double>> scratch;
  for (std::int64_t i = 0; i < n; ++i)
    for (int in = 0; in < mdp.num_inputs; ++in) {
      scratch = rows[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])][static_cast<std::size_t>(in)];
      for (auto& e : scratch) e.first = perm[static_cast<std::size_t>(e.first)];
      std::sort(scratch.begin(), scratch.end());
      for (const auto& e : scratch) {
        mdp.succ[static_cast<std::size_t>(at)] = e.first;
        mdp.prob[static_cast<std::size_t>(at)] = e.second;
        ++at;
      }
    }
  mdp.rebuild_index();
  return mdp;
}

ProductMdp trim_reachable(const ProductMdp& mdp) {
  std::vector<bool> keep(static_cast<std::size_t>(mdp.num_states()), false);
  std::deque<std::int64_t> work{mdp.init_id};
  keep[static_cast<std::size_t>(mdp.init_id)] = true;
  while (!work.empty()) {
    const std::int64_t s = work.front();
    work.pop_front();
    for (int in = 0; in < mdp.num_inputs; ++in) {
      const auto row = mdp.row(s, in);
      for (std::int64_t e = 0; e < row.size; ++e)
        if (!keep[static_cast<std::size_t>(row.succ[e])]) {
          keep[static_cast<std::size_t>(row.succ[e])] = true;
          work.push_back(row.succ[e]);
        }
    }
  }
  keep[static_cast<std::size_t>(mdp.sink_id)] = true;

  std::vector<std::int64_t> remap(static_cast<std::size_t>(mdp.num_states()), -1);
  ProductMdp out;
  out.delta = mdp.delta;
  out.clock_caps = mdp.clock_caps;
  out.num_inputs = mdp.num_inputs;
  out.inputs = mdp.inputs;
  out.automaton_hash = mdp.automaton_hash;
  out.grid_h = mdp.grid_h;
  for (std::int64_t i = 0; i < mdp.num_states(); ++i)
    if (keep[static_cast<std::size_t>(i)]) {
      remap[static_cast<std::size_t>(i)] = out.num_states();
      out.states.push_back(mdp.states[static_cast<std::size_t>(i)]);
      out.goal.push_back(mdp.goal[static_cast<std::size_t>(i)]);
    }
  out.init_id = remap[static_cast<std::size_t>(mdp.init_id)];
  out.sink_id = remap[static_cast<std::size_t>(mdp.sink_id)];
  out.row_ptr.assign(static_cast<std::size_t>(out.num_states()) * out.num_inputs + 1, 0);
  std::int64_t total = 0;
  for (std::int64_t i = 0; i < mdp.num_states(); ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    const std::int64_t ni = remap[static_cast<std::size_t>(i)];
    for (int in = 0; in < out.num_inputs; ++in) {
      total += mdp.row_ptr[static_cast<std::size_t>(i) * mdp.num_inputs + in + 1] -
               mdp.row_ptr[static_cast<std::size_t>(i) * mdp.num_inputs + in];
      out.row_ptr[static_cast<std::size_t>(ni) * out.num_inputs + in + 1] = total;
    }
  }
  out.succ.reserve(static_cast<std::size_t>(total));
  out.prob.reserve(static_cast<std::size_t>(total));
  for (std::int64_t i = 0; i < mdp.num_states(); ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    for (int in = 0; in < out.num_inputs; ++in) {
      const auto row = mdp.row(i, in);
      for (std::int64_t e = 0; e < row.size; ++e) {
        // Every successor of a kept state is kept (forward closure).
        out.succ.push_back(remap[static_cast<std::size_t>(row.succ[e])]);
        out.prob.push_back(row.prob[e]);
      }
    }
  }
  out.rebuild_index();
  return out;
}

std::uint64_t product_hash(const ProductMdp& mdp) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_i = [&](std::int64_t v) { h = fnv1a(&v, sizeof v, h); };
  auto mix_d = [&](double v) { h = fnv1a(&v, sizeof v, h); };
  mix_i(mdp.num_states());
  mix_i(mdp.num_inputs);
  mix_i(mdp.init_id);
  mix_i(mdp.sink_id);
  mix_i(static_cast<std::int64_t>(mdp.automaton_hash));
  mix_i(mdp.delta.num);
  mix_i(mdp.delta.den);
  for (std::int64_t c : mdp.clock_caps) mix_i(c);
  for (const auto& u : mdp.inputs)
    for (Eigen::Index i = 0; i < u.size(); ++i) mix_d(u[i]);
  for (std::int64_t i = 0; i < mdp.num_states(); ++i) {
    const auto& s = mdp.states[static_cast<std::size_t>(i)];
    mix_i(s.grid_id);
    mix_i(s.q);
    mix_i(s.clock_idx);
    mix_i(mdp.goal[static_cast<std::size_t>(i)] ? 1 : 0);
  }
  for (std::size_t i = 0; i < mdp.succ.size(); ++i) {
    mix_i(mdp.succ[i]);
    mix_d(mdp.prob[i]);
  }
  return h;
}

void export_product(const ProductMdp& mdp, const std::string& header_path,
                    const std::string& states_path, const std::string& transitions_path) {
  nlohmann::json hdr;
  hdr["num_states"] = mdp.num_states();
  hdr["num_transitions"] = mdp.num_transitions();
  hdr["num_inputs"] = mdp.num_inputs;
  hdr["num_clocks"] = mdp.clock_caps.size();
  hdr["delta"] = mdp.delta.str();
  hdr["clock_caps"] = mdp.clock_caps;
  hdr["init_id"] = mdp.init_id;
  hdr["sink_id"] = mdp.sink_id;
  hdr["automaton_hash"] = hash_hex(mdp.automaton_hash);
  hdr["product_hash"] = hash_hex(product_hash(mdp));
  hdr["grid_h"] = mdp.grid_h;
  auto& ins = hdr["inputs"] = nlohmann::json::array();
  for (const auto& u : mdp.inputs) {
    auto row = nlohmann::json::array();
    for (Eigen::Index i = 0; i < u.size(); ++i) row.push_back(u[i]);
    ins.push_back(std::move(row));
  }
  {
    auto out = open_out(header_path);
    out << hdr.dump(2) << '\n';
  }
  {
    auto out = open_out(states_path);
    out << "id,xindex,q";
    for (std::size_t c = 0; c < mdp.clock_caps.size(); ++c) out << ",tick_" << c;
    out << ",goal\n";
    for (std::int64_t i = 0; i < mdp.num_states(); ++i) {
      const auto& s = mdp.states[static_cast<std::size_t>(i)];
      out << i << ',' << s.grid_id << ',' << s.q;
      for (std::int64_t t : mdp.decode_ticks(s.clock_idx)) out << ',' << t;
      out << ',' << (mdp.goal[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
    }
  }
  {
    auto out = open_out(transitions_path);
    out << "src,input,dst,prob\n";
    for (std::int64_t s = 0; s < mdp.num_states(); ++s)
      for (int in = 0; in < mdp.num_inputs; ++in) {
        const auto row = mdp.row(s, in);
        for (std::int64_t e = 0; e < row.size; ++e)
          out << s << ',' << in << ',' << row.succ[e] << ',' << fmt17(row.prob[e]) << '\n';
      }
  }
}

ProductMdp import_product(const std::string& header_path, const std::string& states_path,
                          const std::string& transitions_path, bool load_transitions) {
  nlohmann::json hdr;
  {
    auto in = open_in(header_path);
    try {
      in >> hdr;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("product: bad header json: " + std::string(e.what()));
    }
  }
  ProductMdp mdp;
  const std::string dstr = hdr.at("delta").get<std::string>();
  mdp.delta = parse_rational(dstr);
  mdp.clock_caps = hdr.at("clock_caps").get<std::vector<std::int64_t>>();
  mdp.num_inputs = hdr.at("num_inputs").get<int>();
  mdp.init_id = hdr.at("init_id").get<std::int64_t>();
  mdp.sink_id = hdr.at("sink_id").get<std::int64_t>();
  mdp.automaton_hash =
      std::strtoull(hdr.at("automaton_hash").get<std::string>().c_str(), nullptr, 16);
  if (hdr.contains("grid_h")) mdp.grid_h = hdr.at("grid_h").get<std::vector<double>>();
  for (const auto& row : hdr.at("inputs")) {
    Eigen::VectorXd u(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) u[static_cast<Eigen::Index>(i)] = row[i].get<double>();
    mdp.inputs.push_back(std::move(u));
  }
  const auto num_states = hdr.at("num_states").get<std::int64_t>();

  {
    auto in = open_in(states_path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("product: empty states table");
    mdp.states.reserve(static_cast<std::size_t>(num_states));
    mdp.goal.reserve(static_cast<std::size_t>(num_states));
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv(line);
      if (f.size() != 4 + mdp.clock_caps.size())
        throw std::runtime_error("product: malformed states row '" + line + "'");
      if (std::stoll(f[0]) != mdp.num_states())
        throw std::runtime_error("product: states table ids must be consecutive from 0");
      ProductMdp::State s;
      s.grid_id = std::stoll(f[1]);
      s.q = static_cast<int>(std::stoll(f[2]));
      std::vector<std::int64_t> ticks(mdp.clock_caps.size());
      for (std::size_t c = 0; c < ticks.size(); ++c) ticks[c] = std::stoll(f[3 + c]);
      s.clock_idx = mdp.encode_ticks(ticks);
      mdp.states.push_back(s);
      mdp.goal.push_back(std::stoll(f[3 + mdp.clock_caps.size()]) != 0);
    }
  }
  if (mdp.num_states() != num_states)
    throw std::runtime_error("product: states table length disagrees with header");

  if (load_transitions) {
    const auto nrows = static_cast<std::size_t>(num_states) * mdp.num_inputs;
    std::vector<std::vector<std::pair<std::int64_t, double>>> rows(nrows);
    auto in = open_in(transitions_path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("product: empty transitions table");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_csv(line);
      if (f.size() != 4) throw std::runtime_error("product: malformed transitions row '" + line + "'");
      const std::int64_t src = std::stoll(f[0]);
      const int input = static_cast<int>(std::stoll(f[1]));
      if (src < 0 || src >= num_states || input < 0 || input >= mdp.num_inputs)
        throw std::runtime_error("product: transition references unknown row '" + line + "'");
      rows[static_cast<std::size_t>(src) * mdp.num_inputs + input].emplace_back(std::stoll(f[2]),
                                                                                std::strtod(f[3].c_str(), nullptr));
    }
    mdp.row_ptr.assign(nrows + 1, 0);
    std::int64_t total = 0;
    for (std::size_t r = 0; r < nrows; ++r) {
      total += static_cast<std::int64_t>(rows[r].size());
      mdp.row_ptr[r + 1] = total;
    }
    mdp.succ.reserve(static_cast<std::size_t>(total));
    mdp.prob.reserve(static_cast<std::size_t>(total));
    for (auto& r : rows)
      for (const auto& e : r) {
        if (e.first < 0 || e.first >= num_states)
          throw std::runtime_error("product: transition targets unknown state");
        mdp.succ.push_back(e.first);
        mdp.prob.push_back(e.second);
      }
    if (hdr.contains("product_hash")) {
      const auto want =
          std::strtoull(hdr.at("product_hash").get<std::string>().c_str(), nullptr, 16);
      if (want != product_hash(mdp))
        throw std::runtime_error("product: tables do not match header fingerprint");
    }
  }
  mdp.rebuild_index();
  return mdp;
}

}  // namespace timedreach
