#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "incstab/abstraction.hpp"
#include "incstab/errors.hpp"
#include "incstab/examples.hpp"

using namespace incstab;
namespace fs = std::filesystem;

namespace {

Box box(double lo, double hi, int n = 1) { return Box{Vec::Constant(n, lo), Vec::Constant(n, hi)}; }

VectorField scalar(std::function<double(double, double)> f) {
  return VectorField(1, 1, [f](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
    dx[0] = f(x[0], u[0]);
  });
}

GridSpec scalar_spec(double eta) { return GridSpec{box(-1, 1), eta, box(0, 0), 1.0, 0.1}; }

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("incstab_test_" + name); }

}  // namespace

TEST(Grid, PaperCounts) {
  const GridSets g = build_grid(GridSpec{box(-1, 1, 2), 0.009, box(-10, 10), 0.5, 0.1});
  EXPECT_EQ(g.states.axis_count(0), 223u);
  EXPECT_EQ(g.states.size(), 49729u);
  EXPECT_EQ(g.inputs.size(), 41u);
  // Direct enumeration oracle for the per-axis count.
  int n = 0;
  for (int k = -200; k <= 200; ++k)
    if (std::abs(k * 0.009) <= 1.0) ++n;
  EXPECT_EQ(static_cast<std::size_t>(n), g.states.axis_count(1));
}

TEST(Grid, DegenerateBox) {
  const GridSets g = build_grid(GridSpec{box(0, 0), 1.0, box(0, 0), 1.0, 0.1});
  EXPECT_EQ(g.states.size(), 1u);
}

TEST(Grid, EmptyGridRejected) {
  EXPECT_THROW(build_grid(GridSpec{box(0.2, 0.3), 1.0, box(0, 0), 1.0, 0.1}), ContractViolation);
  EXPECT_THROW(build_grid(GridSpec{box(-1, 1), 0.0, box(0, 0), 1.0, 0.1}), ContractViolation);
}

TEST(Grid, RowMajorLastAxisFastest) {
  const Grid g(box(-1, 1, 2), 1.0);
  Vec p(2);
  p << -1, 0;
  EXPECT_EQ(g.point(1), p);
  p << 0, -1;
  EXPECT_EQ(g.point(3), p);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(*g.index_of_point(g.point(i)), i);
}

TEST(Grid, NearestTiesRoundAwayFromZero) {
  const Grid g(box(-1, 1), 0.1);
  EXPECT_NEAR(g.point(*g.nearest(Vec::Constant(1, 0.25)))(0), 0.3, 1e-12);
  EXPECT_NEAR(g.point(*g.nearest(Vec::Constant(1, -0.25)))(0), -0.3, 1e-12);
  EXPECT_FALSE(g.nearest(Vec::Constant(1, 1.2)).has_value());
}

TEST(Transitions, ZeroFieldSelfLoops) {
  const auto abs = compute_transitions(scalar([](double, double) { return 0.0; }), scalar_spec(0.1));
  for (std::size_t s = 0; s < abs.n_states(); ++s) EXPECT_EQ(abs.successor(s, 0), s);
}

TEST(Transitions, ExponentialSnap) {
  const auto abs = compute_transitions(scalar([](double x, double) { return -16 * x; }), scalar_spec(0.1));
  const std::size_t one = *abs.states.index_of_point(Vec::Constant(1, 1.0));
  // e^{-1.6} = 0.2019 snaps to 0.2
  EXPECT_NEAR(abs.states.point(abs.successor(one, 0))(0), 0.2, 1e-12);
}

TEST(Transitions, LeavingDomainIsBlocked) {
  const auto abs = compute_transitions(scalar([](double, double) { return 5.0; }), scalar_spec(0.1));
  const std::size_t s = *abs.states.index_of_point(Vec::Constant(1, 0.9));
  EXPECT_EQ(abs.successor(s, 0), SymbolicAbstraction::kBlocked);
}

TEST(Transitions, SnapErrorAtMostHalfEta) {
  const GridSpec spec{box(-1, 1, 2), 0.05, box(-10, 10), 0.5, 0.1};
  const VectorField f = examples::saturated_cascade::closed_loop_expanded();
  const auto abs = compute_transitions(f, spec);
  Rk4Stepper stepper(f);
  for (std::size_t s = 0; s < abs.n_states(); s += 13) {
    for (std::size_t u = 0; u < abs.n_inputs(); u += 5) {
      const auto next = abs.successor(s, u);
      if (next == SymbolicAbstraction::kBlocked) continue;
      Vec x = abs.states.point(s);
      const Vec uv = abs.inputs.point(u);
      stepper.advance({x.data(), 2}, {uv.data(), 1}, 100, 1e-3);
      EXPECT_LE((abs.states.point(next) - x).cwiseAbs().maxCoeff(), 0.025 + 1e-12);
    }
  }
}

TEST(Transitions, DeterministicAcrossThreadCounts) {
  const GridSpec spec{box(-1, 1, 2), 0.05, box(-10, 10), 0.5, 0.1};
  const VectorField f = examples::saturated_cascade::closed_loop_expanded();
  const auto a = compute_transitions(f, spec, {1e-3, 1});
  const auto b = compute_transitions(f, spec, {1e-3, 3});
  EXPECT_EQ(a.table, b.table);
}

TEST(Epsilon, ZeroFieldHasNoDeviation) {
  const VectorField f = scalar([](double, double) { return 0.0; });
  const auto abs = compute_transitions(f, scalar_spec(0.1));
  const auto r = check_epsilon(f, abs, 0.01, 20, 10, 3);
  EXPECT_TRUE(r.report.pass);
  EXPECT_EQ(r.report.values.at("max_deviation"), 0.0);
}

TEST(Epsilon, LinearContractionGeometricBound) {
  const VectorField f = scalar([](double x, double) { return -16 * x; });
  const auto abs = compute_transitions(f, scalar_spec(0.1));
  const auto r = check_epsilon(f, abs, 0.05 / (1 - std::exp(-1.6)), 50, 30, 4);
  EXPECT_TRUE(r.report.pass) << r.report.values.at("max_deviation");
}

TEST(Epsilon, BlockedRunsCounted) {
  const VectorField f = scalar([](double, double) { return 5.0; });
  const auto abs = compute_transitions(f, scalar_spec(0.1));
  const auto r = check_epsilon(f, abs, 1.0, 10, 50, 0);
  EXPECT_EQ(r.report.values.at("blocked_runs"), 10.0);
}

TEST(Epsilon, RefinementDoesNotIncreaseDeviation) {
  // Halving eta on the same seeds: at least 95% of runs do not get worse.
  const VectorField f = examples::saturated_cascade::closed_loop_expanded();
  const GridSpec coarse{box(-1, 1, 2), 0.1, box(-10, 10), 0.5, 0.1};
  GridSpec fine = coarse;
  fine.eta = 0.05;
  const auto ac = compute_transitions(f, coarse), af = compute_transitions(f, fine);
  // The coarse grid points are also fine grid points, so both abstractions share run seeds.
  const auto runs = random_epsilon_runs(ac, 100, 20, 5);
  const auto rc = check_epsilon(f, ac, 1.0, runs), rf = check_epsilon(f, af, 1.0, runs);
  int ok = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) ok += rf.run_deviation[i] <= rc.run_deviation[i] + 1e-12;
  EXPECT_GE(ok, 95);
}

TEST(Serialization, RoundTripIsBitIdentical) {
  const GridSpec spec{box(-1, 1, 2), 0.1, box(-10, 10), 0.5, 0.1};
  const auto a = compute_transitions(examples::saturated_cascade::closed_loop_expanded(), spec);
  const fs::path p = temp_file("roundtrip.bin"), q = temp_file("roundtrip2.bin");
  save_abstraction(p, a);
  const auto b = load_abstraction(p, spec);
  EXPECT_EQ(a.table, b.table);
  EXPECT_TRUE(a.spec == b.spec);
  save_abstraction(q, b);
  std::ifstream fa(p, std::ios::binary), fb(q, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(sa.substr(0, 8), "INCRABS1");
  fs::remove(p);
  fs::remove(q);
}

TEST(Serialization, TruncatedFileIsCorrupt) {
  const auto a = compute_transitions(scalar([](double, double) { return 0.0; }), scalar_spec(0.1));
  const fs::path p = temp_file("trunc.bin");
  save_abstraction(p, a);
  fs::resize_file(p, fs::file_size(p) - 3);
  EXPECT_THROW(load_abstraction(p), CorruptFileError);
  std::ofstream(p, std::ios::binary) << "NOTMAGIC";
  EXPECT_THROW(load_abstraction(p), CorruptFileError);
  fs::remove(p);
}

TEST(Serialization, MismatchedSpecIsDimensionError) {
  const auto a = compute_transitions(scalar([](double, double) { return 0.0; }), scalar_spec(0.1));
  const fs::path p = temp_file("mismatch.bin");
  save_abstraction(p, a);
  EXPECT_THROW(load_abstraction(p, scalar_spec(0.2)), DimensionError);
  fs::remove(p);
}

TEST(Serialization, MetadataSidecar) {
  const auto a = compute_transitions(scalar([](double, double) { return 5.0; }), scalar_spec(0.1));
  const std::string meta = abstraction_metadata_json(a);
  EXPECT_NE(meta.find("\"n_states\": 21"), std::string::npos);
  EXPECT_NE(meta.find("\"blocked_count\""), std::string::npos);
}
