#pragma once

#include <string>
#include <vector>

#include "incstab/backstepping.hpp"
#include "incstab/lyapunov.hpp"
#include "incstab/sampling.hpp"

namespace incstab::examples {

/// Saturated two-state cascade
///   eta'  = sat(eta) + eta + 5 zeta
///   zeta' = zeta^2 + eta^2 + u
/// unstable at the origin, made incrementally ISS by backstepping with
/// psi(eta) = -eta after the pre-transformation u^ = zeta^2 + eta^2 + u.
namespace saturated_cascade {

inline constexpr const char* kName = "saturated-cascade";
inline constexpr double kLambda = 16.0;
inline constexpr double kKappa = 5.0;      // decay of V1 on the eta-subsystem
inline constexpr double kKappaHat = 25.0;  // sigma(r) = 25 r^2 for V1
inline constexpr double kSubsystemRate = 6.0;    // unit metric contraction rate on the eta-subsystem
inline constexpr double kSubsystemAlpha = 10.0;  // 2 * |d(eta')/d(u~)| = 2 * 5

/// sat(eta) + eta + 5 zeta, input zeta.
VectorField eta_field();
/// eta' = sat(eta) - 4 eta + 5 u~ obtained with zeta = psi(eta) + u~.
VectorField eta_subsystem();
/// Cascade after the pre-transformation (pure integrator on zeta).
CascadeSystem transformed_system();
/// The plant with drift zeta^2 + eta^2 on the integrator.
CascadeSystem plant();
StabilizingFunction psi();
InputTransform pre_transform();

QuadraticIncrementalForm v1();
std::vector<GainCertificate> certificates();

/// k^(x, v) = k(x, v) - eta^2 - zeta^2 synthesized from the pieces above.
FeedbackLaw law(double lambda = kLambda);
/// Plant closed with `law(lambda)`; input is the exogenous v.
VectorField closed_loop(double lambda = kLambda);
/// Same closed loop written out by hand with analytic Jacobians; agrees with
/// closed_loop() pointwise and is the fast path for abstraction building.
VectorField closed_loop_expanded(double lambda = kLambda);
/// The plant with u as input.
VectorField open_loop();

/// Composed certificate V = (x - x')^T P (x - x'), P = [[2,1],[1,1]], kappa = 5, sigma(r) = r^2.
QuadraticIncrementalForm composed_form();

}  // namespace saturated_cascade

/// Names accepted by the configuration `system` key.
std::vector<std::string> builtin_names();

}  // namespace incstab::examples
