#include <gtest/gtest.h>

#include <sstream>

#include "incstab/errors.hpp"
#include "incstab/synthesis.hpp"

using namespace incstab;

namespace {

constexpr auto B = SymbolicAbstraction::kBlocked;

Box box1(double lo, double hi) { return Box{Vec::Constant(1, lo), Vec::Constant(1, hi)}; }

// States 0..n-1 on the integer lattice, inputs 0..m-1 (input 0 is the zero input).
SymbolicAbstraction hand_built(std::size_t n, std::size_t m, std::vector<std::uint32_t> table) {
  SymbolicAbstraction a;
  a.spec = GridSpec{box1(0, double(n - 1)), 1.0, box1(0, double(m - 1)), 1.0, 0.1};
  a.states = Grid(a.spec.domain, 1.0);
  a.inputs = Grid(a.spec.inputs, 1.0);
  a.table = std::move(table);
  return a;
}

RegionSpec regions(double n, Box target, std::vector<Box> obstacles = {}) {
  return RegionSpec{box1(0, n - 1), std::move(target), std::move(obstacles)};
}

}  // namespace

TEST(Scheduler, PatternAndCycle) {
  const auto s = SchedulerAutomaton::from_pattern("auu", 1);
  EXPECT_EQ(s.size(), 3u);
  EXPECT_TRUE(s.available(0));
  EXPECT_FALSE(s.available(1));
  EXPECT_EQ(s.next(2), 0u);
  EXPECT_EQ(s.pattern(), "auu");
  EXPECT_THROW(SchedulerAutomaton::from_pattern("axu", 0), ConfigError);
  EXPECT_THROW(SchedulerAutomaton::from_pattern("au", 2), ContractViolation);
}

TEST(Arena, AlwaysAvailableMatchesAbstraction) {
  const auto a = hand_built(3, 2, {0, 1, 1, 2, 2, B});
  const GameArena g = build_arena(a, SchedulerAutomaton::always_available());
  EXPECT_EQ(g.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t u = 0; u < 2; ++u)
      EXPECT_EQ(g.successor(s, u), a.successor(s, u) == B ? GameArena::kNone : a.successor(s, u));
}

TEST(Arena, UnavailableSlotsOnlyAdmitZero) {
  const auto a = hand_built(3, 2, {0, 1, 1, 2, 2, 2});
  const GameArena g = build_arena(a, SchedulerAutomaton::from_pattern("auu", 0));
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t q = 1; q < 3; ++q) {
      const auto pid = g.id(s, q);
      EXPECT_TRUE(g.admissible(pid, 0));
      EXPECT_FALSE(g.admissible(pid, 1));
      EXPECT_EQ(g.successor(pid, 1), GameArena::kNone);
      EXPECT_EQ(g.automaton_of(g.successor(pid, 0)), (q + 1) % 3);
    }
  }
}

TEST(Arena, ZeroInputRequired) {
  SymbolicAbstraction a;
  a.spec = GridSpec{box1(0, 1), 1.0, box1(1, 2), 1.0, 0.1};
  a.states = Grid(a.spec.domain, 1.0);
  a.inputs = Grid(a.spec.inputs, 1.0);
  a.table = {0, 0, 1, 1};
  EXPECT_THROW(build_arena(a, SchedulerAutomaton::always_available()), ContractViolation);
}

TEST(Invariance, AllSafeSelfLoops) {
  const auto a = hand_built(4, 1, {0, 1, 2, 3});
  const GameArena g = build_arena(a, SchedulerAutomaton::always_available());
  const auto r = solve_invariance(g, std::vector<bool>(4, true));
  EXPECT_EQ(r.count(), 4u);
}

TEST(Invariance, ChainIntoUnsafeIsEmpty) {
  // a -> b, b unsafe, b has no moves
  const auto a = hand_built(2, 1, {1, B});
  const GameArena g = build_arena(a, SchedulerAutomaton::always_available());
  const auto r = solve_invariance(g, {true, false});
  EXPECT_EQ(r.count(), 0u);
}

TEST(Invariance, LowestWitnessingInput) {
  // state 0: input 0 -> unsafe 1, inputs 1 and 2 -> 0
  const auto a = hand_built(2, 3, {1, 0, 0, 1, 1, 1});
  const GameArena g = build_arena(a, SchedulerAutomaton::always_available());
  const auto r = solve_invariance(g, {true, false});
  ASSERT_TRUE(r.winning[0]);
  EXPECT_EQ(r.strategy[0], 1u);
}

TEST(ReachAvoidStay, HandSolvedArena) {
  // States 0..3, target {3}, obstacle {1}.
  // 0: u0 -> 1 (obstacle), u1 -> 2     1: -> 1
  // 2: u0 -> 2 (trap loop), u1 -> 3   3: u0 -> 3
  const auto a = hand_built(4, 2, {1, 2, 1, 1, 2, 3, 3, B});
  const GameArena g = build_arena(a, SchedulerAutomaton::always_available());
  const auto t = solve_reach_avoid_stay(g, regions(4, box1(3, 3), {box1(1, 1)}));
  const std::vector<std::int32_t> depth{2, -1, 1, 0};
  const std::vector<std::uint32_t> input{1, GameArena::kNone, 1, 0};
  EXPECT_EQ(t.depth, depth);
  EXPECT_EQ(t.input, input);
  EXPECT_EQ(t.core_size, 1u);
  EXPECT_TRUE(check_controller(g, t).pass);
}

TEST(ReachAvoidStay, BfsTieBreakPrefersLowestInputAtMinimalDepth) {
  // 0: u0 -> 1, u1 -> 2, u2 -> 2; 1: -> 2; 2 target self-loop
  const auto a = hand_built(3, 3, {1, 2, 2, 2, 2, 2, 2, 2, 2});
  const GameArena g = build_arena(a, SchedulerAutomaton::always_available());
  const auto t = solve_reach_avoid_stay(g, regions(3, box1(2, 2)));
  EXPECT_EQ(t.depth[0], 1);
  EXPECT_EQ(t.input[0], 1u);
}

TEST(ReachAvoidStay, InitialStateInCoreUsesInvarianceStrategy) {
  const auto a = hand_built(2, 2, {1, 0, 1, 1});
  const GameArena g = build_arena(a, SchedulerAutomaton::always_available());
  const auto t = solve_reach_avoid_stay(g, regions(2, box1(0, 1)));
  EXPECT_EQ(t.depth[0], 0);
  EXPECT_EQ(t.input[0], 0u);
}

TEST(ReachAvoidStay, SchedulerForcesZero) {
  // Moving from 0 to target 2 needs input 1 twice; with "au" only every other slot can move.
  // 0: u0 -> 0, u1 -> 1; 1: u0 -> 1, u1 -> 2; 2: -> 2
  const auto a = hand_built(3, 2, {0, 1, 1, 2, 2, 2});
  const GameArena g = build_arena(a, SchedulerAutomaton::from_pattern("au", 0));
  const auto t = solve_reach_avoid_stay(g, regions(3, box1(2, 2)));
  EXPECT_EQ(t.depth[g.id(0, 0)], 3);
  EXPECT_EQ(t.depth[g.id(0, 1)], 4);
  EXPECT_TRUE(check_controller(g, t).pass);
}

TEST(Controller, SoundnessCheckCatchesBadTable) {
  const auto a = hand_built(4, 2, {1, 2, 1, 1, 2, 3, 3, B});
  const GameArena g = build_arena(a, SchedulerAutomaton::always_available());
  auto t = solve_reach_avoid_stay(g, regions(4, box1(3, 3), {box1(1, 1)}));
  t.input[0] = 0;  // leads into the obstacle
  EXPECT_FALSE(check_controller(g, t).pass);
}

TEST(Controller, CsvRoundTrip) {
  const auto a = hand_built(3, 2, {0, 1, 1, 2, 2, 2});
  const GameArena g = build_arena(a, SchedulerAutomaton::from_pattern("au", 0));
  const auto t = solve_reach_avoid_stay(g, regions(3, box1(2, 2)));
  std::stringstream ss;
  write_controller_csv(ss, g, t);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), "state_index,automaton_state,input_index,input_value,bfs_depth");
  const auto back = read_controller_csv(ss, g);
  EXPECT_EQ(back.input, t.input);
  EXPECT_EQ(back.depth, t.depth);
  std::stringstream bad("state_index,automaton_state,input_index,input_value,bfs_depth\n9,1,0,0,0\n");
  EXPECT_THROW(read_controller_csv(bad, g), CorruptFileError);
}

TEST(Regions, MustLieInsideDomain) {
  EXPECT_THROW(regions(3, box1(1, 5)).validate(), InvalidSetError);
  EXPECT_THROW(regions(3, box1(1, 2), {box1(-1, 0)}).validate(), InvalidSetError);
  RegionSpec r = regions(3, box1(1, 2));
  r.margin = -0.1;
  EXPECT_THROW(r.validate(), InvalidSetError);
}

TEST(Regions, MarginShrinksTargetAndGrowsObstacles) {
  RegionSpec r = regions(10, box1(2, 6), {box1(8, 8)});
  r.margin = 1.0;
  EXPECT_EQ(r.synthesis_target().lo(0), 3.0);
  EXPECT_EQ(r.synthesis_target().hi(0), 5.0);
  EXPECT_EQ(r.synthesis_obstacles()[0].lo(0), 7.0);
}

TEST(Replay, StaysInCoreAndRespectsScheduler) {
  // x' = -x + u on [-1, 1]; target [-0.3, 0.3].
  VectorField f(1, 1, [](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
    dx[0] = -x[0] + u[0];
  });
  const GridSpec spec{box1(-1, 1), 0.05, box1(-1, 1), 0.5, 0.1};
  const auto abs = compute_transitions(f, spec);
  const GameArena g = build_arena(abs, SchedulerAutomaton::from_pattern("auu", 1));
  RegionSpec r{spec.domain, box1(-0.3, 0.3), {}};
  r.margin = 0.05;
  const auto t = solve_reach_avoid_stay(g, r);
  const auto rep = closed_loop_replay(f, g, t, r, Vec::Constant(1, 0.9), {60, 1e-3});
  ASSERT_TRUE(rep.success) << rep.failure;
  ASSERT_TRUE(rep.reached_step.has_value());
  for (std::size_t k = *rep.reached_step; k < rep.samples.size(); ++k) EXPECT_TRUE(r.in_target(rep.samples.states[k]));
  for (std::size_t k = 0; k < rep.inputs.size(); ++k) {
    EXPECT_EQ(rep.slots[k], (k + 1) % 3);
    if (!rep.available[k]) EXPECT_EQ(rep.inputs[k](0), 0.0);
  }
  std::ostringstream os;
  write_replay_csv(os, rep);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "t,x1,u,slot");
}

TEST(Replay, ReportsLeavingTheWinningSet) {
  // Unstable drift that no input can counter near the boundary.
  VectorField f(1, 1, [](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
    dx[0] = 20 * x[0] + 0.1 * u[0];
  });
  const GridSpec spec{box1(-1, 1), 0.05, box1(-1, 1), 1.0, 0.1};
  const auto abs = compute_transitions(f, spec);
  const GameArena g = build_arena(abs, SchedulerAutomaton::always_available());
  const RegionSpec r{spec.domain, box1(-0.05, 0.05), {}};
  const auto t = solve_reach_avoid_stay(g, r);
  const auto rep = closed_loop_replay(f, g, t, r, Vec::Constant(1, 0.8), {10, 1e-3});
  EXPECT_FALSE(rep.success);
  EXPECT_EQ(rep.failure_step, 0u);
}
