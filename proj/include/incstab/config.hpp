#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "incstab/abstraction.hpp"
#include "incstab/backstepping.hpp"
#include "incstab/contraction.hpp"
#include "incstab/lyapunov.hpp"
#include "incstab/synthesis.hpp"

namespace incstab {

/// User-supplied single-layer cascade: polynomial eta-field over (eta, zeta),
/// optional polynomial drift over the full state, psi, and the certificate of
/// the eta-subsystem.
struct CustomSystemSpec {
  std::size_t n_eta = 0;
  std::size_t n_zeta = 0;
  nlohmann::json eta_field;
  std::optional<nlohmann::json> drift;
  nlohmann::json psi;
  Mat v_hat_P;
  double kappa = 0.0;
  double kappa_hat = 0.0;
  std::optional<Mat> metric_G;  // constant metric of the eta-subsystem
  double metric_rate = 0.0;
  double metric_alpha = 0.0;
};

struct VerificationSpec {
  Box state_box;
  Box input_box;
  std::size_t samples = 100000;
  std::size_t contraction_samples = 20000;
  std::optional<Box> contraction_state_box;
  double tol = 1e-9;
  std::uint64_t seed = 0;
};

struct EpsilonSpec {
  double epsilon = 0.1;
  std::size_t runs = 200;
  std::size_t length = 50;
  std::uint64_t seed = 1;
};

struct SimulateSpec {
  Vec x0;
  double horizon = 5.0;
  Vec input;  // constant exogenous input, zero when empty
};

struct ProjectConfig {
  std::string builtin;                    // empty for custom systems
  std::optional<CustomSystemSpec> custom;
  double lambda = 0.0;
  GridSpec grid;
  double step = 1e-3;
  RegionSpec regions;
  std::string scheduler_pattern = "a";
  std::size_t scheduler_initial = 0;      // zero-based; the file uses 1-based
  VerificationSpec verification;
  EpsilonSpec epsilon;
  std::vector<Vec> replay_x0;
  std::size_t replay_slots = 200;
  SimulateSpec simulate;
  std::filesystem::path output_dir = "out";

  SchedulerAutomaton scheduler() const { return SchedulerAutomaton::from_pattern(scheduler_pattern, scheduler_initial); }
};

/// Throws ConfigError on unknown keys, missing required keys, wrong types or
/// inconsistent dimensions. Relative output_dir is resolved against `base_dir`.
ProjectConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ProjectConfig load_config(const std::filesystem::path& path);

/// Everything derived from the system section.
struct SystemBundle {
  std::string name;
  CascadeSystem plant;
  StabilizingFunction psi;
  FeedbackLaw law;
  VectorField closed_loop;
  /// Field used for abstraction building; the hand-expanded closed loop for
  /// the built-in, `closed_loop` otherwise.
  VectorField abstraction_field;
  /// eta' = f(eta, psi(eta) + u~).
  VectorField eta_subsystem;
  QuadraticIncrementalForm v_hat;
  std::vector<GainCertificate> certificates;
  std::optional<ConstantMetric> subsystem_metric;
};

SystemBundle build_system(const ProjectConfig& cfg);

/// Eta-subsystem decay, composed closed-loop decay and the sandwich bounds.
std::vector<VerificationReport> verify_lyapunov(const ProjectConfig& cfg, const SystemBundle& sys, unsigned threads);
/// Eta-subsystem metric and the block metric on the closed loop.
std::vector<VerificationReport> verify_contraction(const ProjectConfig& cfg, const SystemBundle& sys);

}  // namespace incstab
