#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "incstab/dynamics.hpp"
#include "incstab/report.hpp"
#include "incstab/sampling.hpp"

namespace incstab {

/// Quantization of a state box and an input box plus the sampling time.
struct GridSpec {
  Box domain;
  double eta = 0.0;
  Box inputs;
  double mu = 0.0;
  double tau = 0.0;

  void validate() const;
  bool operator==(const GridSpec& o) const;
};

/// Lattice {k * spacing} intersected with a box, enumerated row-major (the
/// last axis varies fastest).
class Grid {
 public:
  Grid() = default;
  Grid(const Box& box, double spacing);

  std::size_t size() const { return size_; }
  std::size_t dim() const { return k_min_.size(); }
  double spacing() const { return spacing_; }
  std::size_t axis_count(std::size_t axis) const {
    return static_cast<std::size_t>(k_max_[axis] - k_min_[axis] + 1);
  }
  std::int64_t k_min(std::size_t axis) const { return k_min_[axis]; }
  std::int64_t k_max(std::size_t axis) const { return k_max_[axis]; }

  Vec point(std::size_t index) const;
  void point(std::size_t index, std::span<double> out) const;
  /// Nearest lattice point, ties rounded half away from zero per axis and
  /// clamped to the box. nullopt when x lies outside the box.
  std::optional<std::size_t> nearest(std::span<const double> x) const;
  std::optional<std::size_t> nearest(const Vec& x) const {
    return nearest(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }
  std::optional<std::size_t> index_of_point(const Vec& p, double tol = 1e-9) const;

 private:
  std::vector<std::int64_t> k_min_, k_max_;
  std::vector<std::size_t> stride_;
  double spacing_ = 0.0;
  Box box_;
  std::size_t size_ = 0;
};

struct GridSets {
  Grid states;
  Grid inputs;
};

/// Throws ContractViolation on an empty grid or nonpositive spacing.
GridSets build_grid(const GridSpec& spec);

/// Deterministic finite abstraction: one successor per (state, input) or BLOCKED.
struct SymbolicAbstraction {
  static constexpr std::uint32_t kBlocked = 0xFFFFFFFFu;

  GridSpec spec;
  Grid states;
  Grid inputs;
  std::vector<std::uint32_t> table;  // row s: successors for every input
  std::size_t diverged = 0;

  std::size_t n_states() const { return states.size(); }
  std::size_t n_inputs() const { return inputs.size(); }
  std::uint32_t successor(std::size_t s, std::size_t u) const { return table[s * n_inputs() + u]; }
  std::size_t blocked_count() const;
};

struct AbstractionOptions {
  double step = 1e-3;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Integrates tau under each constant grid input from each grid state and
/// snaps the endpoint to the nearest grid point; endpoints outside the domain
/// (or diverged) are BLOCKED.
SymbolicAbstraction compute_transitions(const VectorField& field, const GridSpec& spec,
                                        const AbstractionOptions& options = {});

/// One co-simulation: start point (a grid point) and an input word of grid
/// input indices.
struct EpsilonRun {
  Vec x0;
  std::vector<std::uint32_t> inputs;
};

std::vector<EpsilonRun> random_epsilon_runs(const SymbolicAbstraction& abs, std::size_t n_runs,
                                            std::size_t run_length, std::uint64_t seed);

struct EpsilonResult {
  VerificationReport report;          // values: max_deviation, blocked_runs, steps
  std::vector<double> run_deviation;  // per-run max deviation
  std::vector<std::size_t> run_steps; // steps completed before a BLOCKED transition
};

/// Euclidean deviation between the concrete trajectory (integrated without
/// snapping) and the abstract run at every sampling instant.
EpsilonResult check_epsilon(const VectorField& field, const SymbolicAbstraction& abs, double epsilon,
                            std::span<const EpsilonRun> runs, double step = 1e-3);
EpsilonResult check_epsilon(const VectorField& field, const SymbolicAbstraction& abs, double epsilon,
                            std::size_t n_runs, std::size_t run_length, std::uint64_t seed, double step = 1e-3);

/// Binary layout: "INCRABS1", u64 state_dim, u64 input_dim, f64 domain lo/hi,
/// f64 eta, f64 input lo/hi, f64 mu, f64 tau, u64 n_states, u64 n_inputs,
/// u32 successor table (0xFFFFFFFF = BLOCKED). Little-endian throughout.
void save_abstraction(const std::filesystem::path& path, const SymbolicAbstraction& abs);
/// {n_states, n_inputs, tau, eta, blocked_count}.
std::string abstraction_metadata_json(const SymbolicAbstraction& abs);
/// Throws CorruptFileError on bad magic or truncation, DimensionError when
/// `expected` is given and differs from the stored grid.
SymbolicAbstraction load_abstraction(const std::filesystem::path& path,
                                     const std::optional<GridSpec>& expected = std::nullopt);

}  // namespace incstab
