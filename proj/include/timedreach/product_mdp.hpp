#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "timedreach/grid.hpp"
#include "timedreach/markov_kernel.hpp"
#include "timedreach/timed_automaton.hpp"

namespace timedreach {

// Product of the approximating chain with the specification automaton over
// the discretized clock space, plus one absorbing sink.  Goal states (an
// accepting automaton component) move to the sink with probability one, so
// the expected accumulated reward (1 on goals) is the hitting probability.
struct ProductMdp {
  struct State {
    std::int64_t grid_id = -1;  // -1 marks the sink
    int q = -1;
    std::int64_t clock_idx = 0;  // mixed-radix over per-clock tick counts
  };

  std::vector<State> states;  // canonical order: (grid_id, q, clock_idx), sink last
  std::vector<bool> goal;
  std::int64_t init_id = 0;
  std::int64_t sink_id = 0;
  int num_inputs = 0;

  std::vector<std::int64_t> row_ptr;  // per (state, input)
  std::vector<std::int64_t> succ;
  std::vector<double> prob;

  Rational delta;
  std::vector<std::int64_t> clock_caps;
  std::vector<Eigen::VectorXd> inputs;
  std::uint64_t automaton_hash = 0;
  std::vector<double> grid_h;

  std::int64_t num_states() const { return static_cast<std::int64_t>(states.size()); }
  std::int64_t num_transitions() const { return static_cast<std::int64_t>(succ.size()); }

  MarkovKernel::Row row(std::int64_t s, int input) const {
    const std::int64_t r = s * num_inputs + input;
    return {succ.data() + row_ptr[r], prob.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }

  std::vector<std::int64_t> decode_ticks(std::int64_t clock_idx) const;
  std::int64_t encode_ticks(const std::vector<std::int64_t>& ticks) const;

  // id of (grid_id, q, ticks), or -1 when the state was never constructed
  // (reachable-set under-approximation at deployment time).
  std::int64_t find_state(std::int64_t grid_id, int q, std::int64_t clock_idx) const;

  void rebuild_index();

 private:
  std::unordered_map<std::uint64_t, std::int64_t> index_;
  std::uint64_t key_loc_ = 1;  // composite-key radices, set by rebuild_index()
  std::uint64_t key_clk_ = 1;
  std::uint64_t key(std::int64_t grid_id, int q, std::int64_t clock_idx) const;
};

// State coverage of the constructed product.
//   reachable — forward closure from the initial product state only.  The
//               cheapest choice, but simulated trajectories of the original
//               SDE can out-run the chain (two grid cells in one tick) and
//               step outside the closure, causing policy-lookup misses.
//   full      — additionally materializes every (cell, live location,
//               valuation) combination, so any configuration a monitored
//               trajectory can occupy has a policy entry.  The value and
//               policy at the initial state are identical in both modes
//               (Bellman backups only look forward).
enum class ProductCoverage { reachable, full };

// Forward closure from the initial product state (x0 snapped to its cell,
// automaton initialized under that cell's label); with ProductCoverage::full
// the closure is additionally seeded with every live configuration.  Row
// targets compose the kernel move with the automaton step under the
// successor cell's label.
ProductMdp build_product(const MarkovKernel& kernel, const TimedAutomaton& a,
                         const TickSpace& ts, const Labeling& lab, const Grid& grid,
                         const std::vector<Eigen::VectorXd>& inputs, const Eigen::VectorXd& x0,
                         ProductCoverage coverage = ProductCoverage::reachable);

// Drops states unreachable from the initial state (the sink is always kept)
// and renumbers canonically.
ProductMdp trim_reachable(const ProductMdp& mdp);

void export_product(const ProductMdp& mdp, const std::string& header_path,
                    const std::string& states_path, const std::string& transitions_path);
ProductMdp import_product(const std::string& header_path, const std::string& states_path,
                          const std::string& transitions_path, bool load_transitions = true);

// Content fingerprint of the exported state/transition tables.
std::uint64_t product_hash(const ProductMdp& mdp);

}  // namespace timedreach
