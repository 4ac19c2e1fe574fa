#include "incstab/backstepping.hpp"

#include <algorithm>
#include <sstream>

#include "incstab/errors.hpp"
#include "incstab/lyapunov.hpp"
#include "incstab/contraction.hpp"

namespace incstab {

namespace {

std::span<const double> span_of(const Vec& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

// ---------------------------------------------------------------------------
// CascadeSystem

CascadeSystem::CascadeSystem(VectorField eta_field, std::size_t layers)
    : eta_field_(std::move(eta_field)), layers_(layers) {
  if (layers_ == 0) throw ContractViolation("CascadeSystem: at least one integrator layer is required");
  if (eta_field_.input_dim() == 0) throw DimensionError("CascadeSystem: eta-subsystem needs a zeta input");
}

CascadeSystem& CascadeSystem::with_drift(DriftFn drift, std::optional<PolynomialMap> polynomial) {
  if (polynomial && (polynomial->n_vars() != state_dim() || polynomial->n_out() != n_zeta()))
    throw DimensionError("CascadeSystem: drift polynomial must map R^n -> R^{n_zeta}");
  drift_ = std::move(drift);
  drift_poly_ = std::move(polynomial);
  return *this;
}

VectorField CascadeSystem::open_loop_field() const {
  const std::size_t ne = n_eta(), nz = n_zeta(), n = state_dim(), k = layers_;
  return VectorField(
      n, nz,
      [f = eta_field_, drift = drift_, ne, nz, k](std::span<const double> x, std::span<const double> u,
                                                  std::span<double> dx) {
        f.eval(x.subspan(0, ne), x.subspan(ne, nz), dx.subspan(0, ne));
        for (std::size_t l = 0; l + 1 < k; ++l)
          std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(ne + (l + 1) * nz), nz,
                      dx.begin() + static_cast<std::ptrdiff_t>(ne + l * nz));
        auto last = dx.subspan(ne + (k - 1) * nz, nz);
        if (drift)
          drift(x, last);
        else
          std::fill(last.begin(), last.end(), 0.0);
        for (std::size_t i = 0; i < nz; ++i) last[i] += u[i];
      },
      eta_field_.name().empty() ? "open-loop" : eta_field_.name() + "/open-loop");
}

// ---------------------------------------------------------------------------
// Gain gate

std::vector<std::string> gain_warnings(double lambda, std::span<const GainCertificate> certificates) {
  std::vector<std::string> out;
  for (const auto& c : certificates) {
    std::ostringstream os;
    if (c.kind == GainCertificate::Kind::kLyapunov) {
      const double need = required_gain(c.first, c.second);
      if (lambda < need) {
        os << "gain " << lambda << " is below (kappa + kappa_hat + 1)/2 = " << need << " for Lyapunov pair"
           << (c.label.empty() ? "" : " '" + c.label + "'") << " (kappa=" << c.first << ", kappa_hat=" << c.second
           << "); the composed function is not certified";
        out.push_back(os.str());
      }
    } else {
      const double need = required_gain_contraction(c.first, c.second);
      if (lambda <= need) {
        os << "gain " << lambda << " does not exceed alpha^2/(8 lambda_hat) = " << need << " for metric pair"
           << (c.label.empty() ? "" : " '" + c.label + "'") << " (lambda_hat=" << c.first << ", alpha=" << c.second
           << "); the block metric is not certified";
        out.push_back(os.str());
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// FeedbackLaw

FeedbackLaw::FeedbackLaw(std::size_t state_dim, std::size_t input_dim, EvalFn eval, std::vector<double> lambdas,
                         std::string provenance)
    : state_dim_(state_dim),
      input_dim_(input_dim),
      eval_(std::move(eval)),
      lambdas_(std::move(lambdas)),
      provenance_(std::move(provenance)) {
  if (lambdas_.empty()) throw ContractViolation("FeedbackLaw: at least one gain is required");
}

Vec FeedbackLaw::operator()(const Vec& x, const Vec& v) const {
  if (static_cast<std::size_t>(x.size()) != state_dim_ || static_cast<std::size_t>(v.size()) != input_dim_)
    throw DimensionError("FeedbackLaw: argument dimension mismatch");
  Vec out(static_cast<Eigen::Index>(input_dim_));
  eval_(span_of(x), span_of(v), std::span<double>(out.data(), input_dim_));
  return out;
}

FeedbackLaw& FeedbackLaw::add_warnings(std::vector<std::string> w) {
  warnings_.insert(warnings_.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  return *this;
}

// ---------------------------------------------------------------------------
// Synthesis

FeedbackLaw synthesize_law(const CascadeSystem& sys, const StabilizingFunction& psi, double lambda,
                           std::span<const GainCertificate> certificates) {
  if (sys.layers() != 1) throw ContractViolation("synthesize_law: single integrator layer expected");
  if (!(lambda > 0.0)) throw ContractViolation("synthesize_law: lambda must be positive");
  if (psi.in_dim() != sys.n_eta() || psi.out_dim() != sys.n_zeta())
    throw DimensionError("synthesize_law: psi must map R^{n_eta} -> R^{n_zeta}");
  const auto ne = static_cast<Eigen::Index>(sys.n_eta());
  const auto nz = static_cast<Eigen::Index>(sys.n_zeta());
  const VectorField f = sys.eta_field();

  FeedbackLaw::EvalFn eval = [f, psi, lambda, ne, nz](std::span<const double> x, std::span<const double> v,
                                                      std::span<double> out) {
    const Vec eta = Eigen::Map<const Vec>(x.data(), ne);
    const Vec zeta = Eigen::Map<const Vec>(x.data() + ne, nz);
    Vec eta_dot(ne);
    f.eval(x.subspan(0, static_cast<std::size_t>(ne)), x.subspan(static_cast<std::size_t>(ne), static_cast<std::size_t>(nz)),
           std::span<double>(eta_dot.data(), static_cast<std::size_t>(ne)));
    const Vec k = -lambda * (zeta - psi(eta)) + psi.jacobian(eta) * eta_dot;
    for (Eigen::Index i = 0; i < nz; ++i) out[static_cast<std::size_t>(i)] = k(i) + v[static_cast<std::size_t>(i)];
  };
  FeedbackLaw law(sys.state_dim(), sys.n_zeta(), std::move(eval), {lambda}, "backstepping");
  law.add_warnings(gain_warnings(lambda, certificates));
  law.set_description({{"construction", "backstepping"},
                       {"lambda", lambda},
                       {"psi", psi_to_json(psi)},
                       {"pre_transform", nullptr}});
  return law;
}

namespace {

/// Polynomial state-feedback part of the recursive law over the full state.
PolynomialMap recursive_feedback_polynomial(const CascadeSystem& sys, const PolynomialMap& f_poly,
                                            const PolynomialMap& psi_poly, std::span<const double> lambdas) {
  const std::size_t ne = sys.n_eta(), nz = sys.n_zeta(), k = sys.layers(), N = sys.state_dim();

  // f over (eta, zeta_1) occupies the first ne + nz coordinates of the full state.
  std::vector<std::size_t> f_targets(ne + nz);
  for (std::size_t i = 0; i < ne + nz; ++i) f_targets[i] = i;
  std::vector<std::size_t> psi_targets(ne);
  for (std::size_t i = 0; i < ne; ++i) psi_targets[i] = i;

  // Time derivative of every state coordinate except the last layer.
  std::vector<Polynomial> rate(N, Polynomial(N));
  for (std::size_t j = 0; j < ne; ++j) rate[j] = f_poly[j].embed(N, f_targets);
  for (std::size_t l = 0; l + 1 < k; ++l)
    for (std::size_t r = 0; r < nz; ++r) rate[ne + l * nz + r] = Polynomial::variable(N, ne + (l + 1) * nz + r);

  std::vector<Polynomial> current(nz, Polynomial(N));
  for (std::size_t r = 0; r < nz; ++r) current[r] = psi_poly[r].embed(N, psi_targets);

  for (std::size_t layer = 0; layer < k; ++layer) {
    const std::size_t offset = ne + layer * nz;  // first coordinate of zeta_{layer+1}
    std::vector<Polynomial> next(nz, Polynomial(N));
    for (std::size_t r = 0; r < nz; ++r) {
      Polynomial p = (Polynomial::variable(N, offset + r) - current[r]) * (-lambdas[layer]);
      for (std::size_t j = 0; j < offset; ++j) {
        const Polynomial d = current[r].derivative(j);
        if (!d.is_zero()) p = p + d * rate[j];
      }
      next[r] = std::move(p);
    }
    current = std::move(next);
  }
  return PolynomialMap(N, std::move(current));
}

}  // namespace

FeedbackLaw synthesize_recursive(const CascadeSystem& sys, const StabilizingFunction& psi,
                                 std::span<const double> lambdas, std::span<const GainCertificate> certificates) {
  if (lambdas.size() != sys.layers())
    throw ContractViolation("synthesize_recursive: one gain per integrator layer is required");
  for (double l : lambdas)
    if (!(l > 0.0)) throw ContractViolation("synthesize_recursive: gains must be positive");
  if (psi.in_dim() != sys.n_eta() || psi.out_dim() != sys.n_zeta())
    throw DimensionError("synthesize_recursive: psi must map R^{n_eta} -> R^{n_zeta}");
  if (sys.layers() == 1) return synthesize_law(sys, psi, lambdas[0], certificates);

  if (!sys.eta_field().polynomial() || !psi.polynomial_form())
    throw UnsupportedConfiguration(
        "recursive backstepping needs exact higher-order derivatives: supply f and psi in polynomial form");

  PolynomialMap feedback = recursive_feedback_polynomial(sys, *sys.eta_field().polynomial(), *psi.polynomial_form(),
                                                         lambdas);
  const std::size_t nz = sys.n_zeta();
  auto shared = std::make_shared<const PolynomialMap>(feedback);
  FeedbackLaw::EvalFn eval = [shared, nz](std::span<const double> x, std::span<const double> v,
                                          std::span<double> out) {
    shared->eval(x, out);
    for (std::size_t i = 0; i < nz; ++i) out[i] += v[i];
  };
  FeedbackLaw law(sys.state_dim(), nz, std::move(eval), {lambdas.begin(), lambdas.end()}, "backstepping-recursive");
  law.add_warnings(gain_warnings(lambdas[0], certificates));
  law.set_polynomial(std::move(feedback));
  law.set_description({{"construction", "backstepping"},
                       {"lambda", std::vector<double>(lambdas.begin(), lambdas.end())},
                       {"psi", psi_to_json(psi)},
                       {"pre_transform", nullptr}});
  return law;
}

InputTransform InputTransform::from_polynomial(PolynomialMap p) {
  auto shared = std::make_shared<const PolynomialMap>(p);
  return {[shared](std::span<const double> x, std::span<double> out) { shared->eval(x, out); }, std::move(p)};
}

FeedbackLaw apply_input_transform(const FeedbackLaw& law, const InputTransform& pre) {
  if (!pre.eval) throw ContractViolation("apply_input_transform: empty pre-transformation");
  if (pre.polynomial &&
      (pre.polynomial->n_vars() != law.state_dim() || pre.polynomial->n_out() != law.input_dim()))
    throw DimensionError("apply_input_transform: pre-transformation must map R^n -> R^m");
  const std::size_t m = law.input_dim();
  FeedbackLaw::EvalFn eval = [inner = law, pre_eval = pre.eval, m](std::span<const double> x,
                                                                   std::span<const double> v, std::span<double> out) {
    inner.eval(x, v, out);
    double buf[16];
    std::vector<double> heap;
    double* p = buf;
    if (m > 16) {
      heap.resize(m);
      p = heap.data();
    }
    pre_eval(x, std::span<double>(p, m));
    for (std::size_t i = 0; i < m; ++i) out[i] -= p[i];
  };
  FeedbackLaw out(law.state_dim(), m, std::move(eval), law.lambdas(), law.provenance() + "+input-transform");
  out.add_warnings(law.warnings());
  nlohmann::json d = law.describe();
  d["pre_transform"] = pre.polynomial ? nlohmann::json{{"type", "polynomial"},
                                                       {"components", polynomial_map_to_json(*pre.polynomial)}}
                                      : nlohmann::json{{"type", "opaque"}};
  out.set_description(std::move(d));
  if (law.polynomial() && pre.polynomial) {
    std::vector<Polynomial> comps;
    for (std::size_t i = 0; i < m; ++i) comps.push_back((*law.polynomial())[i] - (*pre.polynomial)[i]);
    out.set_polynomial(PolynomialMap(law.state_dim(), std::move(comps)));
  }
  return out;
}

VectorField closed_loop_field(const CascadeSystem& sys, const FeedbackLaw& law) {
  if (law.state_dim() != sys.state_dim() || law.input_dim() != sys.n_zeta())
    throw DimensionError("closed_loop_field: law does not match the cascade dimensions");
  const std::size_t nz = sys.n_zeta(), n = sys.state_dim();
  VectorField open = sys.open_loop_field();
  std::string name = sys.eta_field().name().empty() ? "closed-loop" : sys.eta_field().name() + "/closed-loop";
  VectorField cl(
      n, nz,
      [open, law, nz](std::span<const double> x, std::span<const double> v, std::span<double> dx) {
        double buf[16];
        std::vector<double> heap;
        double* u = buf;
        if (nz > 16) {
          heap.resize(nz);
          u = heap.data();
        }
        law.eval(x, v, std::span<double>(u, nz));
        open.eval(x, std::span<const double>(u, nz), dx);
      },
      std::move(name));
  // The law is affine in v with unit coefficient, so v enters the last block only.
  const auto rows = static_cast<Eigen::Index>(n), cols = static_cast<Eigen::Index>(nz);
  cl.with_jacobians({}, [rows, cols](const Vec&, const Vec&) {
    Mat j = Mat::Zero(rows, cols);
    j.bottomRows(cols).setIdentity();
    return j;
  });
  return cl;
}

Vec transform_coordinates(const Vec& x, const StabilizingFunction& psi) {
  const auto ny = static_cast<Eigen::Index>(psi.in_dim());
  const auto nz = static_cast<Eigen::Index>(psi.out_dim());
  if (x.size() != ny + nz) throw DimensionError("transform_coordinates: state dimension mismatch");
  Vec chi = x;
  chi.tail(nz) = x.tail(nz) - psi(x.head(ny));
  return chi;
}

Vec inverse_transform_coordinates(const Vec& chi, const StabilizingFunction& psi) {
  const auto ny = static_cast<Eigen::Index>(psi.in_dim());
  const auto nz = static_cast<Eigen::Index>(psi.out_dim());
  if (chi.size() != ny + nz) throw DimensionError("inverse_transform_coordinates: state dimension mismatch");
  Vec x = chi;
  x.tail(nz) = chi.tail(nz) + psi(chi.head(ny));
  return x;
}

// ---------------------------------------------------------------------------
// JSON descriptions

nlohmann::json polynomial_map_to_json(const PolynomialMap& p) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : p.components()) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [e, coef] : c.terms()) terms.push_back({coef, e});
    comps.push_back(std::move(terms));
  }
  return comps;
}

PolynomialMap polynomial_map_from_json(const nlohmann::json& j, std::size_t n_vars) {
  if (!j.is_array()) throw ConfigError("polynomial map: expected an array of components");
  std::vector<Polynomial> comps;
  for (const auto& comp : j) {
    if (!comp.is_array()) throw ConfigError("polynomial component: expected an array of [coef, [exponents]] terms");
    Polynomial p(n_vars);
    for (const auto& term : comp) {
      if (!term.is_array() || term.size() != 2 || !term[0].is_number() || !term[1].is_array())
        throw ConfigError("polynomial term: expected [coef, [exponents]]");
      const auto exps = term[1].get<std::vector<std::uint32_t>>();
      if (exps.size() != n_vars)
        throw ConfigError("polynomial term: expected " + std::to_string(n_vars) + " exponents, got " +
                          std::to_string(exps.size()));
      p.add_term(exps, term[0].get<double>());
    }
    comps.push_back(std::move(p));
  }
  return PolynomialMap(n_vars, std::move(comps));
}

nlohmann::json psi_to_json(const StabilizingFunction& psi) {
  if (psi.is_affine()) {
    const auto& [A, b] = *psi.affine_data();
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(A.cols()));
      for (Eigen::Index c = 0; c < A.cols(); ++c) row[static_cast<std::size_t>(c)] = A(r, c);
      rows.push_back(row);
    }
    nlohmann::json j{{"type", "affine"}, {"A", rows}, {"b", to_std(b)}};
    if (!psi.name().empty()) j["name"] = psi.name();
    return j;
  }
  if (psi.polynomial_form())
    return {{"type", "polynomial"}, {"components", polynomial_map_to_json(*psi.polynomial_form())}};
  return {{"type", "named"}, {"name", psi.name()}};
}

}  // namespace incstab
