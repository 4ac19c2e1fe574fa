#include "incstab/synthesis.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>

#include "incstab/errors.hpp"

namespace incstab {

// ---------------------------------------------------------------------------
// Scheduler and regions

SchedulerAutomaton::SchedulerAutomaton(std::vector<bool> available, std::size_t initial)
    : available_(std::move(available)), initial_(initial) {
  if (available_.empty()) throw ContractViolation("scheduler: at least one state is required");
  if (initial_ >= available_.size()) throw ContractViolation("scheduler: initial state out of range");
}

SchedulerAutomaton SchedulerAutomaton::from_pattern(const std::string& pattern, std::size_t initial) {
  std::vector<bool> av;
  for (char c : pattern) {
    if (c == 'a')
      av.push_back(true);
    else if (c == 'u')
      av.push_back(false);
    else
      throw ConfigError(std::string("scheduler pattern: unexpected character '") + c + "' (use 'a' and 'u')");
  }
  return SchedulerAutomaton(std::move(av), initial);
}

std::string SchedulerAutomaton::pattern() const {
  std::string s;
  for (bool a : available_) s += a ? 'a' : 'u';
  return s;
}

namespace {

bool box_inside(const Box& inner, const Box& outer) {
  return inner.dim() == outer.dim() && (inner.lo.array() >= outer.lo.array()).all() &&
         (inner.hi.array() <= outer.hi.array()).all();
}

}  // namespace

void RegionSpec::validate() const {
  domain.validate();
  target.validate();
  if (!box_inside(target, domain)) throw InvalidSetError("regions: target must lie inside the domain");
  for (std::size_t i = 0; i < obstacles.size(); ++i) {
    obstacles[i].validate();
    if (!box_inside(obstacles[i], domain))
      throw InvalidSetError("regions: obstacle " + std::to_string(i) + " must lie inside the domain");
  }
  if (!(margin >= 0.0)) throw InvalidSetError("regions: margin must be nonnegative");
}

Box RegionSpec::synthesis_target() const {
  // A margin larger than half the target width leaves an empty box; no grid
  // point can satisfy lo > hi so the classification is simply empty.
  return Box{target.lo.array() + margin, target.hi.array() - margin};
}

std::vector<Box> RegionSpec::synthesis_obstacles() const {
  std::vector<Box> out;
  for (const Box& b : obstacles) out.push_back(Box{b.lo.array() - margin, b.hi.array() + margin});
  return out;
}

bool RegionSpec::in_obstacle(const Vec& x, double tol) const {
  return std::any_of(obstacles.begin(), obstacles.end(), [&](const Box& b) { return b.contains(x, tol); });
}

// ---------------------------------------------------------------------------
// Arena

GameArena::GameArena(const SymbolicAbstraction& abs, SchedulerAutomaton sched, std::uint32_t zero_input)
    : abs_(&abs), sched_(std::move(sched)), zero_input_(zero_input) {
  if (zero_input_ >= abs.n_inputs()) throw ContractViolation("arena: zero input index out of range");
  if (size() >= kNone) throw ContractViolation("arena: too many product states for 32-bit indices");
}

std::uint32_t GameArena::successor(std::size_t pid, std::size_t u) const {
  if (!admissible(pid, u)) return kNone;
  const std::uint32_t next = abs_->successor(state_of(pid), u);
  if (next == SymbolicAbstraction::kBlocked) return kNone;
  return static_cast<std::uint32_t>(id(next, sched_.next(automaton_of(pid))));
}

void GameArena::build_predecessors() const {
  const std::size_t n = size(), nu = n_inputs();
  std::vector<std::size_t> counts(n + 1, 0);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t u = 0; u < nu; ++u)
      if (auto s = successor(p, u); s != kNone) ++counts[s + 1];
  for (std::size_t i = 0; i < n; ++i) counts[i + 1] += counts[i];
  std::vector<std::uint32_t> ids(counts[n]);
  std::vector<std::size_t> fill(counts.begin(), counts.end() - 1);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t u = 0; u < nu; ++u)
      if (auto s = successor(p, u); s != kNone) ids[fill[s]++] = static_cast<std::uint32_t>(p);
  pred_offsets_ = std::move(counts);
  pred_ids_ = std::move(ids);
}

const std::vector<std::size_t>& GameArena::pred_offsets() const {
  if (pred_offsets_.empty()) build_predecessors();
  return pred_offsets_;
}

const std::vector<std::uint32_t>& GameArena::pred_ids() const {
  if (pred_offsets_.empty()) build_predecessors();
  return pred_ids_;
}

std::uint32_t zero_input_index(const SymbolicAbstraction& abs) {
  const auto idx = abs.inputs.index_of_point(Vec::Zero(abs.spec.inputs.dim()), 1e-12);
  if (!idx) throw ContractViolation("the input grid does not contain the zero input");
  return static_cast<std::uint32_t>(*idx);
}

GameArena build_arena(const SymbolicAbstraction& abs, const SchedulerAutomaton& sched, std::uint32_t zero_input) {
  return GameArena(abs, sched, zero_input);
}

GameArena build_arena(const SymbolicAbstraction& abs, const SchedulerAutomaton& sched) {
  return GameArena(abs, sched, zero_input_index(abs));
}

// ---------------------------------------------------------------------------
// Fixed points

std::size_t InvarianceResult::count() const {
  return static_cast<std::size_t>(std::count(winning.begin(), winning.end(), true));
}

InvarianceResult solve_invariance(const GameArena& arena, const std::vector<bool>& safe) {
  const std::size_t n = arena.size(), nu = arena.n_inputs();
  if (safe.size() != n) throw DimensionError("solve_invariance: safe set has the wrong size");

  InvarianceResult res;
  res.winning = safe;
  std::vector<std::uint32_t> good(n, 0);
  std::deque<std::size_t> dead;
  for (std::size_t p = 0; p < n; ++p) {
    if (!safe[p]) continue;
    for (std::size_t u = 0; u < nu; ++u)
      if (auto s = arena.successor(p, u); s != GameArena::kNone && safe[s]) ++good[p];
    if (good[p] == 0) dead.push_back(p);
  }

  const auto& off = arena.pred_offsets();
  const auto& ids = arena.pred_ids();
  while (!dead.empty()) {
    const std::size_t p = dead.front();
    dead.pop_front();
    if (!res.winning[p]) continue;
    res.winning[p] = false;
    // One predecessor entry per (pred, input) edge, so each decrement removes
    // exactly one witness.
    for (std::size_t e = off[p]; e < off[p + 1]; ++e) {
      const std::size_t q = ids[e];
      if (!res.winning[q] || good[q] == 0) continue;
      if (--good[q] == 0) dead.push_back(q);
    }
  }

  res.strategy.assign(n, GameArena::kNone);
  for (std::size_t p = 0; p < n; ++p) {
    if (!res.winning[p]) continue;
    for (std::size_t u = 0; u < nu; ++u) {
      if (auto s = arena.successor(p, u); s != GameArena::kNone && res.winning[s]) {
        res.strategy[p] = static_cast<std::uint32_t>(u);
        break;
      }
    }
  }
  return res;
}

std::size_t ControllerTable::winning_count() const {
  return static_cast<std::size_t>(std::count_if(depth.begin(), depth.end(), [](std::int32_t d) { return d >= 0; }));
}

ControllerTable solve_reach_avoid_stay(const GameArena& arena, const RegionSpec& spec) {
  spec.validate();
  const SymbolicAbstraction& abs = arena.abstraction();
  const std::size_t n = arena.size(), nu = arena.n_inputs(), p = arena.scheduler().size();

  const Box target = spec.synthesis_target();
  const std::vector<Box> obstacles = spec.synthesis_obstacles();
  std::vector<bool> free_state(abs.n_states()), target_state(abs.n_states());
  for (std::size_t s = 0; s < abs.n_states(); ++s) {
    const Vec x = abs.states.point(s);
    free_state[s] = std::none_of(obstacles.begin(), obstacles.end(), [&](const Box& b) { return b.contains(x, 1e-12); });
    target_state[s] = free_state[s] && target.contains(x, 1e-12);
  }
  std::vector<bool> safe(n);
  for (std::size_t pid = 0; pid < n; ++pid) safe[pid] = target_state[pid / p];

  const InvarianceResult core = solve_invariance(arena, safe);

  ControllerTable table;
  table.input.assign(n, GameArena::kNone);
  table.depth.assign(n, -1);
  std::vector<std::size_t> frontier;
  for (std::size_t pid = 0; pid < n; ++pid) {
    if (!core.winning[pid]) continue;
    table.depth[pid] = 0;
    table.input[pid] = core.strategy[pid];
    frontier.push_back(pid);
  }
  table.core_size = frontier.size();

  const auto& off = arena.pred_offsets();
  const auto& ids = arena.pred_ids();
  for (std::int32_t d = 0; !frontier.empty(); ++d) {
    std::vector<std::size_t> candidates;
    for (std::size_t f : frontier)
      for (std::size_t e = off[f]; e < off[f + 1]; ++e) {
        const std::size_t q = ids[e];
        if (table.depth[q] < 0 && free_state[q / p]) candidates.push_back(q);
      }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    std::vector<std::size_t> next;
    for (std::size_t q : candidates) {
      for (std::size_t u = 0; u < nu; ++u) {
        const std::uint32_t s = arena.successor(q, u);
        // Successors assigned in this same layer have depth d + 1 and must not count.
        if (s != GameArena::kNone && table.depth[s] >= 0 && table.depth[s] <= d) {
          table.input[q] = static_cast<std::uint32_t>(u);
          next.push_back(q);
          break;
        }
      }
    }
    for (std::size_t q : next) table.depth[q] = d + 1;
    frontier = std::move(next);
  }
  return table;
}

VerificationReport check_controller(const GameArena& arena, const ControllerTable& table) {
  VerificationReport r;
  r.label = "controller-soundness";
  r.max_violation = 0.0;
  for (std::size_t pid = 0; pid < arena.size(); ++pid) {
    if (!table.winning(pid)) continue;
    ++r.n_samples;
    const std::uint32_t u = table.input[pid];
    std::string problem;
    if (u == GameArena::kNone || !arena.admissible(pid, u)) {
      problem = "inadmissible input";
    } else {
      const std::uint32_t s = arena.successor(pid, u);
      if (s == GameArena::kNone || !table.winning(s))
        problem = "successor leaves the winning set";
      else if (table.depth[pid] > 0 && table.depth[s] >= table.depth[pid])
        problem = "BFS depth does not decrease";
      else if (table.depth[pid] == 0 && table.depth[s] != 0)
        problem = "core transition leaves the core";
    }
    if (!problem.empty()) {
      if (r.pass) {
        r.worst_index = pid;
        r.worst_point = {static_cast<double>(arena.state_of(pid)), static_cast<double>(arena.automaton_of(pid))};
      }
      r.pass = false;
      r.max_violation += 1.0;
      if (r.warnings.size() < 10) r.warnings.push_back("product state " + std::to_string(pid) + ": " + problem);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Replay

ReplayResult closed_loop_replay(const VectorField& field, const GameArena& arena, const ControllerTable& table,
                                const RegionSpec& regions, const Vec& x0, const ReplayOptions& options) {
  const SymbolicAbstraction& abs = arena.abstraction();
  const SchedulerAutomaton& sched = arena.scheduler();
  const std::size_t n_steps = steps_in(abs.spec.tau, options.step);
  const double tau = abs.spec.tau;

  ReplayResult out;
  Rk4Stepper stepper(field);
  Vec x = x0;
  std::size_t q = sched.initial();
  out.fine.times.push_back(0.0);
  out.fine.states.push_back(x);

  auto fail = [&](std::size_t k, std::string why) {
    out.success = false;
    out.failure_step = k;
    out.failure = std::move(why);
  };

  for (std::size_t k = 0;; ++k) {
    out.samples.times.push_back(static_cast<double>(k) * tau);
    out.samples.states.push_back(x);
    if (!out.reached_step && regions.in_target(x)) out.reached_step = k;
    if (k == options.horizon_slots) break;

    if (!regions.domain.contains(x)) {
      fail(k, "state left the domain");
      break;
    }
    const auto s = abs.states.nearest(x);
    if (!s) {
      fail(k, "state left the domain");
      break;
    }
    const std::size_t pid = arena.id(*s, q);
    if (!table.winning(pid)) {
      fail(k, "state left the winning set");
      break;
    }
    std::uint32_t ui = table.input[pid];
    if (!sched.available(q)) ui = arena.zero_input();
    const Vec u = abs.inputs.point(ui);
    out.inputs.push_back(u);
    out.slots.push_back(q);
    out.available.push_back(sched.available(q));

    for (std::size_t i = 0; i < n_steps; ++i) {
      try {
        stepper.advance(std::span<double>(x.data(), static_cast<std::size_t>(x.size())),
                        std::span<const double>(u.data(), static_cast<std::size_t>(u.size())), 1, options.step);
      } catch (const DivergenceError&) {
        fail(k, "integration diverged");
        return out;
      }
      out.fine.times.push_back(static_cast<double>(k) * tau + static_cast<double>(i + 1) * options.step);
      out.fine.states.push_back(x);
      if (regions.in_obstacle(x)) ++out.obstacle_contacts;
    }
    q = sched.next(q);
  }
  return out;
}

void write_controller_csv(std::ostream& os, const GameArena& arena, const ControllerTable& table) {
  const SymbolicAbstraction& abs = arena.abstraction();
  os << "state_index,automaton_state,input_index,input_value,bfs_depth\n";
  char buf[32];
  for (std::size_t pid = 0; pid < arena.size(); ++pid) {
    if (!table.winning(pid)) continue;
    const std::uint32_t u = table.input[pid];
    os << arena.state_of(pid) << ',' << (arena.automaton_of(pid) + 1) << ',' << u << ',';
    const Vec val = abs.inputs.point(u);
    for (Eigen::Index i = 0; i < val.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", val(i));
      os << (i ? ";" : "") << buf;
    }
    os << ',' << table.depth[pid] << '\n';
  }
}

ControllerTable read_controller_csv(std::istream& is, const GameArena& arena) {
  ControllerTable table;
  table.input.assign(arena.size(), GameArena::kNone);
  table.depth.assign(arena.size(), -1);
  std::string line;
  if (!std::getline(is, line) || line != "state_index,automaton_state,input_index,input_value,bfs_depth")
    throw CorruptFileError("controller table: unexpected header");
  const std::size_t ns = arena.abstraction().n_states(), p = arena.scheduler().size();
  for (std::size_t row = 2; std::getline(is, line); ++row) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[5];
    for (int i = 0; i < 5; ++i)
      if (!std::getline(ls, f[i], ',')) throw CorruptFileError("controller table: short row " + std::to_string(row));
    try {
      const std::size_t s = std::stoull(f[0]), q = std::stoull(f[1]), u = std::stoull(f[2]);
      const long d = std::stol(f[4]);
      if (s >= ns || q < 1 || q > p || u >= arena.n_inputs() || d < 0)
        throw CorruptFileError("controller table: index out of range in row " + std::to_string(row));
      const std::size_t pid = arena.id(s, q - 1);
      table.input[pid] = static_cast<std::uint32_t>(u);
      table.depth[pid] = static_cast<std::int32_t>(d);
      if (d == 0) ++table.core_size;
    } catch (const std::logic_error&) {
      throw CorruptFileError("controller table: malformed row " + std::to_string(row));
    }
  }
  return table;
}

void write_replay_csv(std::ostream& os, const ReplayResult& replay) {
  const std::size_t n = replay.samples.states.empty() ? 0 : static_cast<std::size_t>(replay.samples.states[0].size());
  const std::size_t m = replay.inputs.empty() ? 1 : static_cast<std::size_t>(replay.inputs[0].size());
  os << 't';
  for (std::size_t i = 0; i < n; ++i) os << ",x" << (i + 1);
  if (m == 1)
    os << ",u";
  else
    for (std::size_t j = 0; j < m; ++j) os << ",u" << (j + 1);
  os << ",slot\n";
  char buf[32];
  // One row per applied input; the final sample has no input.
  for (std::size_t k = 0; k < replay.inputs.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", replay.samples.times[k]);
    os << buf;
    for (std::size_t i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", replay.samples.states[k](static_cast<Eigen::Index>(i)));
      os << ',' << buf;
    }
    for (std::size_t j = 0; j < m; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", replay.inputs[k](static_cast<Eigen::Index>(j)));
      os << ',' << buf;
    }
    os << ',' << (replay.slots[k] + 1) << '\n';
  }
}

}  // namespace incstab
