#include "incstab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "incstab/errors.hpp"
#include "incstab/examples.hpp"

namespace incstab {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

const json& require(const json& j, const std::string& where, const char* key) {
  if (!j.contains(key)) throw ConfigError(where + ": missing required key '" + std::string(key) + "'");
  return j.at(key);
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

std::size_t count(const json& j, const std::string& where) {
  if (!j.is_number_unsigned()) throw ConfigError(where + ": expected a nonnegative integer");
  return j.get<std::size_t>();
}

Vec vector(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], where);
  return v;
}

Mat matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError(where + ": expected a nested array");
  const std::size_t rows = j.size(), cols = j[0].size();
  Mat m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const Vec row = vector(j[r], where);
    if (static_cast<std::size_t>(row.size()) != cols) throw ConfigError(where + ": ragged matrix");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Box box(const json& j, const std::string& where) {
  check_keys(j, where, {"lo", "hi"});
  Box b{vector(require(j, where, "lo"), where + ".lo"), vector(require(j, where, "hi"), where + ".hi")};
  try {
    b.validate();
  } catch (const InvalidSetError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return b;
}

CustomSystemSpec parse_custom(const json& j) {
  const std::string w = "system.custom";
  check_keys(j, w, {"eta_dim", "zeta_dim", "eta_field", "drift", "psi", "v_hat", "metric"});
  CustomSystemSpec c;
  c.n_eta = count(require(j, w, "eta_dim"), w + ".eta_dim");
  c.n_zeta = count(require(j, w, "zeta_dim"), w + ".zeta_dim");
  if (c.n_eta == 0 || c.n_zeta == 0) throw ConfigError(w + ": dimensions must be positive");
  c.eta_field = require(j, w, "eta_field");
  if (j.contains("drift")) c.drift = j.at("drift");
  c.psi = require(j, w, "psi");
  const json& v = require(j, w, "v_hat");
  check_keys(v, w + ".v_hat", {"P", "kappa", "kappa_hat"});
  c.v_hat_P = matrix(require(v, w + ".v_hat", "P"), w + ".v_hat.P");
  c.kappa = number(require(v, w + ".v_hat", "kappa"), w + ".v_hat.kappa");
  c.kappa_hat = number(require(v, w + ".v_hat", "kappa_hat"), w + ".v_hat.kappa_hat");
  if (static_cast<std::size_t>(c.v_hat_P.rows()) != c.n_eta || c.v_hat_P.cols() != c.v_hat_P.rows())
    throw ConfigError(w + ".v_hat.P: expected an eta_dim x eta_dim matrix");
  if (j.contains("metric")) {
    const json& m = j.at("metric");
    check_keys(m, w + ".metric", {"G", "rate", "alpha"});
    c.metric_G = matrix(require(m, w + ".metric", "G"), w + ".metric.G");
    c.metric_rate = number(require(m, w + ".metric", "rate"), w + ".metric.rate");
    c.metric_alpha = number(require(m, w + ".metric", "alpha"), w + ".metric.alpha");
  }
  return c;
}

StabilizingFunction parse_psi(const json& j, std::size_t n_eta, std::size_t n_zeta) {
  const std::string w = "system.custom.psi";
  check_keys(j, w, {"affine", "polynomial"});
  if (j.contains("affine") == j.contains("polynomial")) throw ConfigError(w + ": give exactly one of affine, polynomial");
  if (j.contains("affine")) {
    const json& a = j.at("affine");
    check_keys(a, w + ".affine", {"A", "b"});
    Mat A = matrix(require(a, w + ".affine", "A"), w + ".affine.A");
    Vec b = a.contains("b") ? vector(a.at("b"), w + ".affine.b") : Vec::Zero(static_cast<Eigen::Index>(n_zeta));
    if (static_cast<std::size_t>(A.rows()) != n_zeta || static_cast<std::size_t>(A.cols()) != n_eta ||
        static_cast<std::size_t>(b.size()) != n_zeta)
      throw ConfigError(w + ".affine: expected A of size zeta_dim x eta_dim and b of size zeta_dim");
    return StabilizingFunction::affine(std::move(A), std::move(b), "psi");
  }
  PolynomialMap p = polynomial_map_from_json(j.at("polynomial"), n_eta);
  if (p.n_out() != n_zeta) throw ConfigError(w + ".polynomial: expected zeta_dim components");
  return StabilizingFunction::polynomial(std::move(p), "psi");
}

VectorField eta_subsystem_of(const VectorField& f, const StabilizingFunction& psi) {
  const std::size_t n = f.state_dim(), m = f.input_dim();
  VectorField sub(
      n, m,
      [f, psi, m](std::span<const double> x, std::span<const double> u, std::span<double> dx) {
        const Vec y = to_vec(x);
        Vec z = psi(y);
        for (std::size_t i = 0; i < m; ++i) z(static_cast<Eigen::Index>(i)) += u[i];
        f.eval(x, std::span<const double>(z.data(), m), dx);
      },
      f.name() + "/eta-subsystem");
  sub.with_jacobians(
      [f, psi](const Vec& y, const Vec& u) {
        const Vec z = psi(y) + u;
        return Mat(f.jacobian_x(y, z) + f.jacobian_u(y, z) * psi.jacobian(y));
      },
      [f, psi](const Vec& y, const Vec& u) { return f.jacobian_u(y, psi(y) + u); });
  return sub;
}

Box leading(const Box& b, std::size_t n) {
  return Box{b.lo.head(static_cast<Eigen::Index>(n)), b.hi.head(static_cast<Eigen::Index>(n))};
}

}  // namespace

ProjectConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "config",
             {"system", "lambda", "grid", "regions", "scheduler", "verification", "epsilon", "replay", "simulate",
              "output_dir"});
  ProjectConfig c;

  const json& sys = require(j, "config", "system");
  check_keys(sys, "system", {"builtin", "custom"});
  if (sys.contains("builtin") == sys.contains("custom")) throw ConfigError("system: give exactly one of builtin, custom");
  std::size_t n = 0, m = 0;
  if (sys.contains("builtin")) {
    if (!sys.at("builtin").is_string()) throw ConfigError("system.builtin: expected a string");
    c.builtin = sys.at("builtin").get<std::string>();
    const auto names = examples::builtin_names();
    if (std::find(names.begin(), names.end(), c.builtin) == names.end())
      throw ConfigError("system.builtin: unknown example '" + c.builtin + "'");
    n = 2;
    m = 1;
    c.lambda = examples::saturated_cascade::kLambda;
  } else {
    c.custom = parse_custom(sys.at("custom"));
    n = c.custom->n_eta + c.custom->n_zeta;
    m = c.custom->n_zeta;
  }
  if (j.contains("lambda")) c.lambda = number(j.at("lambda"), "lambda");
  if (!(c.lambda > 0.0)) throw ConfigError("lambda: must be positive");

  const json& g = require(j, "config", "grid");
  check_keys(g, "grid", {"domain", "eta", "inputs", "mu", "tau", "step"});
  c.grid.domain = box(require(g, "grid", "domain"), "grid.domain");
  c.grid.eta = number(require(g, "grid", "eta"), "grid.eta");
  c.grid.inputs = box(require(g, "grid", "inputs"), "grid.inputs");
  c.grid.mu = number(require(g, "grid", "mu"), "grid.mu");
  c.grid.tau = number(require(g, "grid", "tau"), "grid.tau");
  if (g.contains("step")) c.step = number(g.at("step"), "grid.step");
  if (static_cast<std::size_t>(c.grid.domain.dim()) != n) throw ConfigError("grid.domain: dimension does not match the system");
  if (static_cast<std::size_t>(c.grid.inputs.dim()) != m) throw ConfigError("grid.inputs: dimension does not match the system");

  c.regions.domain = c.grid.domain;
  if (j.contains("regions")) {
    const json& r = j.at("regions");
    check_keys(r, "regions", {"target", "obstacles", "margin"});
    c.regions.target = box(require(r, "regions", "target"), "regions.target");
    if (r.contains("obstacles")) {
      if (!r.at("obstacles").is_array()) throw ConfigError("regions.obstacles: expected an array of boxes");
      for (std::size_t i = 0; i < r.at("obstacles").size(); ++i)
        c.regions.obstacles.push_back(box(r.at("obstacles")[i], "regions.obstacles[" + std::to_string(i) + "]"));
    }
    if (r.contains("margin")) c.regions.margin = number(r.at("margin"), "regions.margin");
  } else {
    c.regions.target = c.grid.domain;
  }
  try {
    c.regions.validate();
  } catch (const InvalidSetError& e) {
    throw ConfigError(e.what());
  }

  if (j.contains("scheduler")) {
    const json& s = j.at("scheduler");
    check_keys(s, "scheduler", {"pattern", "initial"});
    if (!require(s, "scheduler", "pattern").is_string()) throw ConfigError("scheduler.pattern: expected a string");
    c.scheduler_pattern = s.at("pattern").get<std::string>();
    const std::size_t initial = s.contains("initial") ? count(s.at("initial"), "scheduler.initial") : 1;
    if (initial < 1 || initial > c.scheduler_pattern.size())
      throw ConfigError("scheduler.initial: expected a 1-based state index within the pattern");
    c.scheduler_initial = initial - 1;
  }
  (void)c.scheduler();  // validates the pattern

  c.verification.state_box = c.grid.domain;
  c.verification.input_box = c.grid.inputs;
  if (j.contains("verification")) {
    const json& v = j.at("verification");
    const std::string w = "verification";
    check_keys(v, w, {"state_box", "input_box", "samples", "contraction_samples", "contraction_state_box", "tol", "seed"});
    if (v.contains("state_box")) c.verification.state_box = box(v.at("state_box"), w + ".state_box");
    if (v.contains("input_box")) c.verification.input_box = box(v.at("input_box"), w + ".input_box");
    if (v.contains("samples")) c.verification.samples = count(v.at("samples"), w + ".samples");
    if (v.contains("contraction_samples"))
      c.verification.contraction_samples = count(v.at("contraction_samples"), w + ".contraction_samples");
    if (v.contains("contraction_state_box"))
      c.verification.contraction_state_box = box(v.at("contraction_state_box"), w + ".contraction_state_box");
    if (v.contains("tol")) c.verification.tol = number(v.at("tol"), w + ".tol");
    if (v.contains("seed")) c.verification.seed = count(v.at("seed"), w + ".seed");
    if (static_cast<std::size_t>(c.verification.state_box.dim()) != n ||
        static_cast<std::size_t>(c.verification.input_box.dim()) != m)
      throw ConfigError("verification: box dimensions do not match the system");
  }

  if (j.contains("epsilon")) {
    const json& e = j.at("epsilon");
    check_keys(e, "epsilon", {"value", "runs", "length", "seed"});
    if (e.contains("value")) c.epsilon.epsilon = number(e.at("value"), "epsilon.value");
    if (e.contains("runs")) c.epsilon.runs = count(e.at("runs"), "epsilon.runs");
    if (e.contains("length")) c.epsilon.length = count(e.at("length"), "epsilon.length");
    if (e.contains("seed")) c.epsilon.seed = count(e.at("seed"), "epsilon.seed");
  }

  if (j.contains("replay")) {
    const json& r = j.at("replay");
    check_keys(r, "replay", {"x0", "horizon_slots"});
    if (r.contains("x0")) {
      if (!r.at("x0").is_array()) throw ConfigError("replay.x0: expected an array of points");
      for (const auto& p : r.at("x0")) {
        c.replay_x0.push_back(vector(p, "replay.x0"));
        if (static_cast<std::size_t>(c.replay_x0.back().size()) != n) throw ConfigError("replay.x0: wrong dimension");
      }
    }
    if (r.contains("horizon_slots")) c.replay_slots = count(r.at("horizon_slots"), "replay.horizon_slots");
  }

  c.simulate.x0 = Vec::Zero(static_cast<Eigen::Index>(n));
  c.simulate.input = Vec::Zero(static_cast<Eigen::Index>(m));
  if (j.contains("simulate")) {
    const json& s = j.at("simulate");
    check_keys(s, "simulate", {"x0", "horizon", "input"});
    if (s.contains("x0")) c.simulate.x0 = vector(s.at("x0"), "simulate.x0");
    if (s.contains("horizon")) c.simulate.horizon = number(s.at("horizon"), "simulate.horizon");
    if (s.contains("input")) c.simulate.input = vector(s.at("input"), "simulate.input");
    if (static_cast<std::size_t>(c.simulate.x0.size()) != n || static_cast<std::size_t>(c.simulate.input.size()) != m)
      throw ConfigError("simulate: dimensions do not match the system");
  }

  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ConfigError("output_dir: expected a string");
    c.output_dir = j.at("output_dir").get<std::string>();
  }
  if (c.output_dir.is_relative() && !base_dir.empty()) c.output_dir = base_dir / c.output_dir;

  try {
    c.grid.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  return c;
}

ProjectConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(f, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, std::filesystem::path(path).parent_path());
}

SystemBundle build_system(const ProjectConfig& cfg) {
  if (!cfg.builtin.empty()) {
    namespace sc = examples::saturated_cascade;
    SystemBundle b{sc::kName,          sc::plant(),
                   sc::psi(),          sc::law(cfg.lambda),
                   sc::closed_loop(cfg.lambda), sc::closed_loop_expanded(cfg.lambda),
                   sc::eta_subsystem(), sc::v1(),
                   sc::certificates(), ConstantMetric(Mat::Identity(1, 1), sc::kSubsystemRate, sc::kSubsystemAlpha)};
    return b;
  }

  const CustomSystemSpec& c = *cfg.custom;
  try {
    PolynomialMap fmap = polynomial_map_from_json(c.eta_field, c.n_eta + c.n_zeta);
    if (fmap.n_out() != c.n_eta) throw ConfigError("system.custom.eta_field: expected eta_dim components");
    VectorField f = VectorField::from_polynomial(c.n_eta, c.n_zeta, std::move(fmap), "custom");
    StabilizingFunction psi = parse_psi(c.psi, c.n_eta, c.n_zeta);
    QuadraticIncrementalForm v_hat(c.v_hat_P, c.kappa, c.kappa_hat);
    std::vector<GainCertificate> certs{GainCertificate::lyapunov(c.kappa, c.kappa_hat, "v_hat")};
    std::optional<ConstantMetric> metric;
    if (c.metric_G) {
      metric.emplace(*c.metric_G, c.metric_rate, c.metric_alpha);
      certs.push_back(GainCertificate::metric(c.metric_rate, c.metric_alpha, "metric"));
    }

    CascadeSystem plant(f, 1);
    FeedbackLaw law = synthesize_law(CascadeSystem(f, 1), psi, cfg.lambda, certs);
    if (c.drift) {
      PolynomialMap dmap = polynomial_map_from_json(*c.drift, c.n_eta + c.n_zeta);
      if (dmap.n_out() != c.n_zeta) throw ConfigError("system.custom.drift: expected zeta_dim components");
      InputTransform pre = InputTransform::from_polynomial(std::move(dmap));
      plant.with_drift(pre.eval, pre.polynomial);
      law = apply_input_transform(law, pre);
    }
    VectorField cl = closed_loop_field(plant, law);
    VectorField sub = eta_subsystem_of(f, psi);
    return SystemBundle{"custom", plant, psi, law, cl, cl, sub, v_hat, certs, metric};
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("system.custom: ") + e.what());
  }
}

std::vector<VerificationReport> verify_lyapunov(const ProjectConfig& cfg, const SystemBundle& sys, unsigned threads) {
  const VerificationSpec& v = cfg.verification;
  DecayCheckOptions opt;
  opt.n_samples = v.samples;
  opt.tol = v.tol;
  opt.seed = v.seed;
  opt.threads = threads;

  std::vector<VerificationReport> out;
  const std::size_t n_eta = sys.plant.n_eta();
  const Box eta_box = leading(v.state_box, n_eta);

  VerificationReport sub = verify_condition_iii(sys.eta_subsystem, sys.v_hat, eta_box, v.input_box, opt);
  sub.label = "eta-subsystem decay";
  out.push_back(std::move(sub));

  const ComposedForm composed = compose_lyapunov(sys.v_hat, sys.psi);
  const auto quad = composed.as_quadratic();
  VerificationReport cl = quad ? verify_condition_iii(sys.closed_loop, *quad, v.state_box, v.input_box, opt)
                               : verify_condition_iii(sys.closed_loop, composed, sys.v_hat.kappa(),
                                                      InputGain::quadratic(1.0), v.state_box, v.input_box, opt);
  cl.label = "closed-loop decay";
  cl.values["lambda"] = cfg.lambda;
  cl.values["required_gain"] = required_gain(sys.v_hat.kappa(), sys.v_hat.kappa_hat());
  for (auto& w : gain_warnings(cfg.lambda, sys.certificates)) cl.warnings.push_back(std::move(w));
  out.push_back(std::move(cl));

  if (quad) {
    VerificationReport sandwich = verify_condition_i(*quad, std::nullopt, v.state_box, v.samples / 10, 1e-12, v.seed);
    sandwich.label = "closed-loop sandwich bounds";
    out.push_back(std::move(sandwich));
    VerificationReport root = verify_sqrt_decay(sys.closed_loop, SqrtForm(*quad), v.state_box, v.input_box, opt);
    root.label = "closed-loop sqrt decay";
    out.push_back(std::move(root));
  }
  return out;
}

std::vector<VerificationReport> verify_contraction(const ProjectConfig& cfg, const SystemBundle& sys) {
  const VerificationSpec& v = cfg.verification;
  ContractionCheckOptions opt;
  opt.n_samples = v.contraction_samples;
  opt.tol = v.tol;
  opt.seed = v.seed;
  const Box states = v.contraction_state_box.value_or(v.state_box);
  std::vector<VerificationReport> out;

  if (!sys.subsystem_metric) throw ConfigError("verify contraction: the system section declares no metric");
  const ConstantMetric& m = *sys.subsystem_metric;
  VerificationReport sub = check_contraction_states_inputs(sys.eta_subsystem, m.field(), m.lambda_hat, m.alpha,
                                                           leading(states, sys.plant.n_eta()), v.input_box, opt);
  sub.label = "eta-subsystem metric";
  sub.values["required_gain"] = required_gain_contraction(m.lambda_hat, m.alpha);
  sub.warnings = gain_warnings(cfg.lambda, sys.certificates);
  out.push_back(std::move(sub));

  const MetricField block = build_block_metric(MetricField::constant(sys.v_hat.P()), sys.psi);
  const Vec x0 = Vec::Zero(static_cast<Eigen::Index>(sys.closed_loop.state_dim()));
  const Vec u0 = Vec::Zero(static_cast<Eigen::Index>(sys.closed_loop.input_dim()));
  const double alpha = 2.0 * sigma_max(sqrt_psd(block(x0)) * sys.closed_loop.jacobian_u(x0, u0));
  VerificationReport cl =
      check_contraction_states_inputs(sys.closed_loop, block, sys.v_hat.kappa(), alpha, states, v.input_box, opt);
  cl.label = "closed-loop block metric";
  cl.values["alpha"] = alpha;
  cl.values["lambda_hat"] = sys.v_hat.kappa();
  out.push_back(std::move(cl));
  return out;
}

}  // namespace incstab
