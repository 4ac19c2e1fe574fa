// incstab command-line front end. Artifacts live under the config's output_dir:
//   simulate.csv/.svg, law.json, verify_<which>.json, abstraction.bin/.json,
//   epsilon.json, controller.csv/.json, replay_<i>.csv, replay.svg, replay.json

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "incstab/config.hpp"
#include "incstab/errors.hpp"
#include "incstab/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace incstab;

namespace {

enum Exit { kOk = 0, kFail = 1, kUsage = 2, kRuntime = 3 };

struct MissingArtifact : Error {
  using Error::Error;
};

struct Options {
  std::string config;
  unsigned threads = 0;
  std::optional<std::uint64_t> seed;
  std::optional<double> eta, tau, epsilon, lambda;
  std::string x0;
  std::optional<double> horizon;
  std::string which = "lyapunov";
  bool svg = true;
};

Vec parse_point(const std::string& s, std::size_t n) {
  std::vector<double> v;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("--x0: cannot parse '" + item + "'");
    }
  }
  if (v.size() != n) throw ConfigError("--x0: expected " + std::to_string(n) + " comma-separated values");
  return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ProjectConfig load(const Options& o) {
  ProjectConfig c = load_config(o.config);
  if (o.eta) c.grid.eta = *o.eta;
  if (o.tau) c.grid.tau = *o.tau;
  if (o.epsilon) c.epsilon.epsilon = *o.epsilon;
  if (o.lambda) c.lambda = *o.lambda;
  if (o.seed) {
    c.epsilon.seed = *o.seed;
    c.verification.seed = *o.seed;
  }
  try {
    c.grid.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("grid: ") + e.what());
  }
  if (!(c.lambda > 0.0)) throw ConfigError("lambda: must be positive");
  fs::create_directories(c.output_dir);
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

json report_json(const VerificationReport& r) { return json::parse(r.to_json()); }

SymbolicAbstraction require_abstraction(const ProjectConfig& c) {
  const fs::path p = c.output_dir / "abstraction.bin";
  if (!fs::exists(p)) throw MissingArtifact(p.string() + " not found; run `incstab abstract` first");
  try {
    return load_abstraction(p, c.grid);
  } catch (const DimensionError& e) {
    throw MissingArtifact(std::string(e.what()) + "; rerun `incstab abstract` with the current grid");
  }
}

ControllerTable require_controller(const ProjectConfig& c, const GameArena& arena) {
  const fs::path p = c.output_dir / "controller.csv";
  if (!fs::exists(p)) throw MissingArtifact(p.string() + " not found; run `incstab synthesize` first");
  std::ifstream f(p);
  return read_controller_csv(f, arena);
}

PhasePlot make_plot(const ProjectConfig& c) {
  PhasePlot plot(c.grid.domain);
  plot.add_box(c.grid.domain, "black");
  plot.add_box(c.regions.target, "green", "green");
  for (const Box& b : c.regions.obstacles) plot.add_box(b, "blue", "blue");
  return plot;
}

int cmd_simulate(const Options& o) {
  const ProjectConfig c = load(o);
  const SystemBundle sys = build_system(c);
  const Vec x0 = o.x0.empty() ? c.simulate.x0 : parse_point(o.x0, sys.closed_loop.state_dim());
  const double horizon = o.horizon.value_or(c.simulate.horizon);
  if (!c.grid.domain.contains(x0)) std::cerr << "warning: x0 lies outside the declared domain\n";
  const Trajectory tr = integrate(sys.closed_loop, x0, InputSignal::constant(c.simulate.input), horizon, c.step);
  std::ofstream f(c.output_dir / "simulate.csv");
  write_trajectory_csv(f, tr);
  if (o.svg && tr.states.front().size() >= 2) {
    PhasePlot plot = make_plot(c);
    plot.add_trajectory(tr, "red");
    plot.save(c.output_dir / "simulate.svg");
  }
  std::cout << (c.output_dir / "simulate.csv").string() << ": " << tr.size() << " rows\n";
  return kOk;
}

int cmd_synthesize_law(const Options& o) {
  const ProjectConfig c = load(o);
  const SystemBundle sys = build_system(c);
  json j = sys.law.describe();
  j["warnings"] = sys.law.warnings();
  j["required_gain"] = required_gain(sys.v_hat.kappa(), sys.v_hat.kappa_hat());
  if (sys.subsystem_metric)
    j["required_gain_contraction"] =
        required_gain_contraction(sys.subsystem_metric->lambda_hat, sys.subsystem_metric->alpha);
  write_text(c.output_dir / "law.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  for (const auto& w : sys.law.warnings()) std::cerr << "warning: " << w << "\n";
  return kOk;
}

int cmd_verify(const Options& o) {
  const ProjectConfig c = load(o);
  const SystemBundle sys = build_system(c);
  std::vector<VerificationReport> reports;
  if (o.which == "lyapunov")
    reports = verify_lyapunov(c, sys, o.threads);
  else
    reports = verify_contraction(c, sys);
  bool pass = true;
  for (const auto& r : reports) pass = pass && r.pass;
  const std::string text = reports_to_json(reports);
  write_text(c.output_dir / ("verify_" + o.which + ".json"), text + "\n");
  std::cout << text << "\n";
  for (const auto& r : reports)
    for (const auto& w : r.warnings) std::cerr << "warning: " << r.label << ": " << w << "\n";
  return pass ? kOk : kFail;
}

int cmd_abstract(const Options& o) {
  const ProjectConfig c = load(o);
  const SystemBundle sys = build_system(c);
  const SymbolicAbstraction abs = compute_transitions(sys.abstraction_field, c.grid, {c.step, o.threads});
  save_abstraction(c.output_dir / "abstraction.bin", abs);
  const std::string meta = abstraction_metadata_json(abs);
  write_text(c.output_dir / "abstraction.json", meta + "\n");
  std::cout << meta << "\n";
  if (abs.diverged) std::cerr << "warning: " << abs.diverged << " transitions diverged and were marked BLOCKED\n";
  return kOk;
}

int cmd_check_epsilon(const Options& o) {
  const ProjectConfig c = load(o);
  const SystemBundle sys = build_system(c);
  const SymbolicAbstraction abs = require_abstraction(c);
  const EpsilonResult res = check_epsilon(sys.abstraction_field, abs, c.epsilon.epsilon, c.epsilon.runs,
                                          c.epsilon.length, c.epsilon.seed, c.step);
  const std::string text = res.report.to_json();
  write_text(c.output_dir / "epsilon.json", text + "\n");
  std::cout << text << "\n";
  return res.report.pass ? kOk : kFail;
}

int cmd_synthesize(const Options& o) {
  const ProjectConfig c = load(o);
  const SymbolicAbstraction abs = require_abstraction(c);
  const GameArena arena = build_arena(abs, c.scheduler());
  const ControllerTable table = solve_reach_avoid_stay(arena, c.regions);
  const VerificationReport check = check_controller(arena, table);
  {
    std::ofstream f(c.output_dir / "controller.csv");
    write_controller_csv(f, arena, table);
  }
  json j{{"core_size", table.core_size},
         {"winning_count", table.winning_count()},
         {"product_states", arena.size()},
         {"scheduler", c.scheduler_pattern},
         {"initial_automaton_state", c.scheduler_initial + 1},
         {"check", report_json(check)}};
  json initial = json::array();
  for (const Vec& x0 : c.replay_x0) {
    const auto s = abs.states.nearest(x0);
    initial.push_back({{"x0", to_std(x0)},
                       {"winning", s && table.winning(arena.id(*s, c.scheduler_initial))}});
  }
  j["initial_conditions"] = initial;
  write_text(c.output_dir / "controller.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  if (table.winning_count() == 0) std::cerr << "warning: the winning set is empty\n";
  return check.pass ? kOk : kFail;
}

int cmd_replay(const Options& o) {
  const ProjectConfig c = load(o);
  const SystemBundle sys = build_system(c);
  const SymbolicAbstraction abs = require_abstraction(c);
  const GameArena arena = build_arena(abs, c.scheduler());
  const ControllerTable table = require_controller(c, arena);

  std::vector<Vec> starts = c.replay_x0;
  if (!o.x0.empty()) starts = {parse_point(o.x0, sys.closed_loop.state_dim())};
  if (starts.empty()) throw ConfigError("replay: no initial condition (set replay.x0 or pass --x0)");

  PhasePlot plot = make_plot(c);
  const char* colors[] = {"red", "orange", "purple", "brown"};
  json runs = json::array();
  bool all_ok = true;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (!c.grid.domain.contains(starts[i])) throw ConfigError("replay: x0 must lie inside the domain");
    const ReplayResult r = closed_loop_replay(sys.abstraction_field, arena, table, c.regions, starts[i],
                                              {c.replay_slots, c.step});
    {
      std::ofstream f(c.output_dir / ("replay_" + std::to_string(i + 1) + ".csv"));
      write_replay_csv(f, r);
    }
    plot.add_trajectory(r.fine, colors[i % 4]);

    std::size_t stayed = 0;
    bool left_after_reach = false;
    if (r.reached_step)
      for (std::size_t k = *r.reached_step; k < r.samples.states.size(); ++k) {
        if (!c.regions.in_target(r.samples.states[k])) left_after_reach = true;
        if (!left_after_reach) stayed = k - *r.reached_step;
      }
    bool zero_ok = true;
    for (std::size_t k = 0; k < r.inputs.size(); ++k)
      if (!r.available[k] && !r.inputs[k].isZero(0.0)) zero_ok = false;
    const bool ok = r.success && r.reached_step && !left_after_reach && r.obstacle_contacts == 0 && zero_ok;
    all_ok = all_ok && ok;
    json run{{"x0", to_std(starts[i])},
             {"success", r.success},
             {"reached_step", r.reached_step ? json(*r.reached_step) : json(nullptr)},
             {"slots_in_target_after_reach", stayed},
             {"left_target_after_reach", left_after_reach},
             {"obstacle_contacts", r.obstacle_contacts},
             {"zero_input_in_unavailable_slots", zero_ok},
             {"pass", ok}};
    if (!r.success) {
      run["failure"] = r.failure;
      run["failure_step"] = r.failure_step;
    }
    runs.push_back(run);
  }
  if (o.svg) plot.save(c.output_dir / "replay.svg");
  write_text(c.output_dir / "replay.json", runs.dump(2) + "\n");
  std::cout << runs.dump(2) << "\n";
  return all_ok ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Backstepping, incremental stability certificates and symbolic control synthesis"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config, "Project configuration (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--threads", o.threads, "Worker threads, 0 = all cores");
  app.add_option("--seed", o.seed, "Override the sampling seeds");
  app.add_option("--eta", o.eta, "Override the state quantization");
  app.add_option("--tau", o.tau, "Override the sampling time");
  app.add_option("--epsilon", o.epsilon, "Override the precision checked by check-epsilon");
  app.add_option("--lambda", o.lambda, "Override the backstepping gain");
  app.add_flag("!--no-svg", o.svg, "Skip SVG output");

  auto* sim = app.add_subcommand("simulate", "Integrate the closed loop from x0");
  sim->add_option("--x0", o.x0, "Initial state, comma separated (use --x0=-1,2 for negatives)");
  sim->add_option("--horizon", o.horizon, "Seconds");
  app.add_subcommand("synthesize-law", "Write the feedback law description");
  auto* ver = app.add_subcommand("verify", "Check the Lyapunov or contraction certificates");
  ver->add_option("--which", o.which, "lyapunov | contraction")->check(CLI::IsMember({"lyapunov", "contraction"}));
  app.add_subcommand("abstract", "Build the symbolic abstraction");
  app.add_subcommand("check-epsilon", "Co-simulate the abstraction against the concrete system");
  app.add_subcommand("synthesize", "Solve the reach-avoid-stay game");
  auto* rep = app.add_subcommand("replay", "Run the controller on the concrete system");
  rep->add_option("--x0", o.x0, "Initial state, comma separated");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    if (cmd == "simulate") return cmd_simulate(o);
    if (cmd == "synthesize-law") return cmd_synthesize_law(o);
    if (cmd == "verify") return cmd_verify(o);
    if (cmd == "abstract") return cmd_abstract(o);
    if (cmd == "check-epsilon") return cmd_check_epsilon(o);
    if (cmd == "synthesize") return cmd_synthesize(o);
    if (cmd == "replay") return cmd_replay(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
