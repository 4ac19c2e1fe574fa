#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "incstab/config.hpp"
#include "incstab/examples.hpp"
#include "incstab/errors.hpp"

namespace py = pybind11;
using namespace incstab;

namespace {

struct Controller {
  std::shared_ptr<const SymbolicAbstraction> abs;
  std::shared_ptr<const GameArena> arena;
  ControllerTable table;
};

struct Project {
  ProjectConfig cfg;
  SystemBundle sys;
};

Box make_box(const Vec& lo, const Vec& hi) {
  Box b{lo, hi};
  b.validate();
  return b;
}

}  // namespace

PYBIND11_MODULE(_incstab, m) {
  m.doc() = "Backstepping synthesis, incremental stability checks and symbolic control";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError");

  m.def("required_gain", &required_gain, py::arg("kappa"), py::arg("kappa_hat"));
  m.def("required_gain_contraction", &required_gain_contraction, py::arg("lambda_hat"), py::arg("alpha"));

  m.def(
      "compose_lyapunov_matrix",
      [](const Mat& p_hat, const Mat& A) {
        QuadraticIncrementalForm v(p_hat, 1.0, 0.0);
        return *compose_lyapunov(v, StabilizingFunction::affine(A, Vec::Zero(A.rows()))).matrix();
      },
      py::arg("p_hat"), py::arg("A"), "Block matrix of the composed quadratic form for psi(y) = A y.");
  m.def(
      "block_metric_matrix",
      [](const Mat& g_hat, const Mat& A) {
        const MetricField g = build_block_metric(MetricField::constant(g_hat), StabilizingFunction::affine(A, Vec::Zero(A.rows())));
        return g(Vec::Zero(g_hat.rows() + A.rows()));
      },
      py::arg("g_hat"), py::arg("A"));

  m.def(
      "grid_counts",
      [](const Vec& lo, const Vec& hi, double eta, const Vec& ulo, const Vec& uhi, double mu) {
        GridSpec s{make_box(lo, hi), eta, make_box(ulo, uhi), mu, 1.0};
        const GridSets g = build_grid(s);
        return std::make_pair(g.states.size(), g.inputs.size());
      },
      py::arg("lo"), py::arg("hi"), py::arg("eta"), py::arg("input_lo"), py::arg("input_hi"), py::arg("mu"));

  m.def(
      "simulate_builtin",
      [](const Vec& x0, double horizon, double step, double lambda, double v) {
        const VectorField f = examples::saturated_cascade::closed_loop(lambda);
        const Trajectory tr = integrate(f, x0, InputSignal::constant(Vec::Constant(1, v)), horizon, step);
        Mat states(static_cast<Eigen::Index>(tr.size()), x0.size());
        for (std::size_t i = 0; i < tr.size(); ++i) states.row(static_cast<Eigen::Index>(i)) = tr.states[i].transpose();
        return std::make_pair(tr.times, states);
      },
      py::arg("x0"), py::arg("horizon"), py::arg("step") = 1e-3, py::arg("lam") = 16.0, py::arg("v") = 0.0,
      "Closed loop of the built-in saturated cascade; returns (times, states).");

  py::class_<Project>(m, "Project")
      .def(py::init([](const std::string& path) {
             ProjectConfig cfg = load_config(path);
             SystemBundle sys = build_system(cfg);
             return Project{std::move(cfg), std::move(sys)};
           }),
           py::arg("config_path"))
      .def_property(
          "eta", [](const Project& p) { return p.cfg.grid.eta; },
          [](Project& p, double eta) {
            p.cfg.grid.eta = eta;
            p.cfg.grid.validate();
          })
      .def_property_readonly("lam", [](const Project& p) { return p.cfg.lambda; })
      .def("law_description", [](const Project& p) { return p.sys.law.describe().dump(); })
      .def("law", [](const Project& p, const Vec& x, const Vec& v) { return p.sys.law(x, v); })
      .def("closed_loop", [](const Project& p, const Vec& x, const Vec& v) { return p.sys.closed_loop(x, v); })
      .def(
          "verify_json",
          [](const Project& p, const std::string& which, unsigned threads) {
            if (which == "lyapunov") return reports_to_json(verify_lyapunov(p.cfg, p.sys, threads));
            if (which == "contraction") return reports_to_json(verify_contraction(p.cfg, p.sys));
            throw ConfigError("which must be 'lyapunov' or 'contraction'");
          },
          py::arg("which"), py::arg("threads") = 1)
      .def(
          "abstract",
          [](const Project& p, unsigned threads) {
            py::gil_scoped_release release;
            return std::make_shared<SymbolicAbstraction>(
                compute_transitions(p.sys.abstraction_field, p.cfg.grid, {p.cfg.step, threads}));
          },
          py::arg("threads") = 0)
      .def(
          "check_epsilon",
          [](const Project& p, const SymbolicAbstraction& abs, std::size_t runs, std::size_t length, std::uint64_t seed) {
            const EpsilonResult r = check_epsilon(p.sys.abstraction_field, abs, p.cfg.epsilon.epsilon, runs, length, seed,
                                                  p.cfg.step);
            return std::make_pair(r.report.pass, r.report.values.at("max_deviation"));
          },
          py::arg("abstraction"), py::arg("runs") = 200, py::arg("length") = 50, py::arg("seed") = 1)
      .def("synthesize",
           [](const Project& p, std::shared_ptr<SymbolicAbstraction> abs) {
             auto arena = std::make_shared<GameArena>(build_arena(*abs, p.cfg.scheduler()));
             ControllerTable t = solve_reach_avoid_stay(*arena, p.cfg.regions);
             return Controller{abs, arena, std::move(t)};
           })
      .def(
          "replay",
          [](const Project& p, const Controller& c, const Vec& x0, std::size_t slots) {
            const ReplayResult r =
                closed_loop_replay(p.sys.abstraction_field, *c.arena, c.table, p.cfg.regions, x0, {slots, p.cfg.step});
            py::dict d;
            d["success"] = r.success;
            d["failure"] = r.failure;
            d["reached_step"] = r.reached_step ? py::cast(*r.reached_step) : py::none();
            std::vector<double> inputs;
            for (const Vec& u : r.inputs) inputs.push_back(u(0));
            d["inputs"] = inputs;
            d["available"] = r.available;
            Mat states(static_cast<Eigen::Index>(r.samples.size()), x0.size());
            for (std::size_t i = 0; i < r.samples.size(); ++i)
              states.row(static_cast<Eigen::Index>(i)) = r.samples.states[i].transpose();
            d["states"] = states;
            d["obstacle_contacts"] = r.obstacle_contacts;
            return d;
          },
          py::arg("controller"), py::arg("x0"), py::arg("slots") = 200);

  py::class_<SymbolicAbstraction, std::shared_ptr<SymbolicAbstraction>>(m, "Abstraction")
      .def_property_readonly("n_states", &SymbolicAbstraction::n_states)
      .def_property_readonly("n_inputs", &SymbolicAbstraction::n_inputs)
      .def_property_readonly("blocked_count", &SymbolicAbstraction::blocked_count)
      .def("successor",
           [](const SymbolicAbstraction& a, std::size_t s, std::size_t u) -> py::object {
             if (s >= a.n_states() || u >= a.n_inputs()) throw py::index_error("state or input index out of range");
             const auto n = a.successor(s, u);
             return n == SymbolicAbstraction::kBlocked ? py::none() : py::cast(n);
           })
      .def("save", [](const SymbolicAbstraction& a, const std::string& path) { save_abstraction(path, a); })
      .def_static("load", [](const std::string& path) { return std::make_shared<SymbolicAbstraction>(load_abstraction(path)); });

  py::class_<Controller>(m, "Controller")
      .def_property_readonly("winning_count", [](const Controller& c) { return c.table.winning_count(); })
      .def_property_readonly("core_size", [](const Controller& c) { return c.table.core_size; })
      .def("sound", [](const Controller& c) { return check_controller(*c.arena, c.table).pass; })
      .def("is_winning", [](const Controller& c, const Vec& x, std::size_t automaton_state) {
        const auto s = c.abs->states.nearest(x);
        return s.has_value() && c.table.winning(c.arena->id(*s, automaton_state));
      });
}
