#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "incstab/abstraction.hpp"
#include "incstab/dynamics.hpp"
#include "incstab/report.hpp"

namespace incstab {

/// Cyclic automaton q_1 -> q_2 -> ... -> q_p -> q_1 whose states mark slots
/// as available ('a') or unavailable ('u') for the control task.
class SchedulerAutomaton {
 public:
  SchedulerAutomaton(std::vector<bool> available, std::size_t initial);
  /// Pattern such as "auu"; `initial` is zero-based.
  static SchedulerAutomaton from_pattern(const std::string& pattern, std::size_t initial);
  /// Single always-available state.
  static SchedulerAutomaton always_available() { return SchedulerAutomaton({true}, 0); }

  std::size_t size() const { return available_.size(); }
  std::size_t initial() const { return initial_; }
  bool available(std::size_t q) const { return available_[q]; }
  std::size_t next(std::size_t q) const { return (q + 1) % available_.size(); }
  std::string pattern() const;

 private:
  std::vector<bool> available_;
  std::size_t initial_;
};

/// Target W, obstacles and working domain D.
struct RegionSpec {
  Box domain;
  Box target;
  std::vector<Box> obstacles;
  // Robustness margin for synthesis: W is deflated and obstacles inflated by
  // this amount before grid states are classified. Absorbs the snap error.
  double margin = 0.0;

  /// W and every obstacle must lie inside D; margin must be nonnegative.
  void validate() const;
  /// Target and obstacle boxes after applying the margin.
  Box synthesis_target() const;
  std::vector<Box> synthesis_obstacles() const;
  bool in_target(const Vec& x, double tol = 1e-12) const { return target.contains(x, tol); }
  bool in_obstacle(const Vec& x, double tol = 1e-12) const;
};

/// Product of the abstraction with the scheduler. Product state id = s * p + q.
class GameArena {
 public:
  static constexpr std::uint32_t kNone = 0xFFFFFFFFu;

  GameArena(const SymbolicAbstraction& abs, SchedulerAutomaton sched, std::uint32_t zero_input);

  const SymbolicAbstraction& abstraction() const { return *abs_; }
  const SchedulerAutomaton& scheduler() const { return sched_; }
  std::uint32_t zero_input() const { return zero_input_; }
  std::size_t size() const { return abs_->n_states() * sched_.size(); }
  std::size_t n_inputs() const { return abs_->n_inputs(); }
  std::size_t id(std::size_t s, std::size_t q) const { return s * sched_.size() + q; }
  std::size_t state_of(std::size_t pid) const { return pid / sched_.size(); }
  std::size_t automaton_of(std::size_t pid) const { return pid % sched_.size(); }

  /// Only the zero input is admissible in unavailable slots.
  bool admissible(std::size_t pid, std::size_t u) const {
    return sched_.available(automaton_of(pid)) || u == zero_input_;
  }
  /// Product successor, or kNone when u is inadmissible or the move is BLOCKED.
  std::uint32_t successor(std::size_t pid, std::size_t u) const;

  /// Reverse edges as CSR: predecessors of pid are pred_ids[pred_offsets[pid] .. pred_offsets[pid+1]).
  const std::vector<std::size_t>& pred_offsets() const;
  const std::vector<std::uint32_t>& pred_ids() const;

 private:
  void build_predecessors() const;

  const SymbolicAbstraction* abs_;
  SchedulerAutomaton sched_;
  std::uint32_t zero_input_;
  mutable std::vector<std::size_t> pred_offsets_;
  mutable std::vector<std::uint32_t> pred_ids_;
};

/// Finds the zero grid input; throws ContractViolation when absent.
std::uint32_t zero_input_index(const SymbolicAbstraction& abs);
GameArena build_arena(const SymbolicAbstraction& abs, const SchedulerAutomaton& sched, std::uint32_t zero_input);
GameArena build_arena(const SymbolicAbstraction& abs, const SchedulerAutomaton& sched);

struct InvarianceResult {
  std::vector<bool> winning;
  std::vector<std::uint32_t> strategy;  // lowest witnessing input, kNone outside
  std::size_t count() const;
};

/// Maximal controlled-invariant subset of `safe`.
InvarianceResult solve_invariance(const GameArena& arena, const std::vector<bool>& safe);

struct ControllerTable {
  std::vector<std::uint32_t> input;  // per product state, kNone outside the winning set
  std::vector<std::int32_t> depth;   // BFS depth, 0 on the invariant core, -1 outside
  std::size_t core_size = 0;

  bool winning(std::size_t pid) const { return depth[pid] >= 0; }
  std::size_t winning_count() const;
};

/// Invariance inside W minus obstacles, then backward BFS reachability to that
/// core avoiding obstacles.
ControllerTable solve_reach_avoid_stay(const GameArena& arena, const RegionSpec& spec);

/// Every selected input is admissible, every selected transition stays in
/// the winning set and BFS depth strictly decreases outside the core.
VerificationReport check_controller(const GameArena& arena, const ControllerTable& table);

struct ReplayResult {
  Trajectory samples;             // states at k tau
  Trajectory fine;                // every integrator step
  std::vector<Vec> inputs;        // input applied on [k tau, (k+1) tau)
  std::vector<std::size_t> slots; // automaton state during that slot
  std::vector<bool> available;
  bool success = true;
  std::string failure;
  std::size_t failure_step = 0;
  std::optional<std::size_t> reached_step;  // first sample inside W
  std::size_t obstacle_contacts = 0;         // integrator steps inside an obstacle box
};

struct ReplayOptions {
  std::size_t horizon_slots = 200;
  double step = 1e-3;
};

/// Snap, look up, apply for tau, repeat. Failure when the state leaves D or
/// the winning set.
ReplayResult closed_loop_replay(const VectorField& field, const GameArena& arena, const ControllerTable& table,
                                const RegionSpec& regions, const Vec& x0, const ReplayOptions& options = {});

/// `state_index,automaton_state,input_index,input_value,bfs_depth`; automaton
/// states are 1-based.
void write_controller_csv(std::ostream& os, const GameArena& arena, const ControllerTable& table);
/// Inverse of write_controller_csv; rows are checked against the arena.
/// Throws CorruptFileError on malformed rows or out-of-range indices.
ControllerTable read_controller_csv(std::istream& is, const GameArena& arena);
/// `t,x1,...,xn,u,slot`; slot is the 1-based automaton state.
void write_replay_csv(std::ostream& os, const ReplayResult& replay);

}  // namespace incstab
