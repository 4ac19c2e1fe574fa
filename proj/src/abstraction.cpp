#include "incstab/abstraction.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "json.hpp"

#include "incstab/errors.hpp"

namespace incstab {

void GridSpec::validate() const {
  domain.validate();
  inputs.validate();
  if (!(eta > 0.0)) throw ContractViolation("grid: state quantization eta must be positive");
  if (!(mu > 0.0)) throw ContractViolation("grid: input quantization mu must be positive");
  if (!(tau > 0.0)) throw ContractViolation("grid: sampling time tau must be positive");
}

bool GridSpec::operator==(const GridSpec& o) const {
  return domain.lo == o.domain.lo && domain.hi == o.domain.hi && eta == o.eta && inputs.lo == o.inputs.lo &&
         inputs.hi == o.inputs.hi && mu == o.mu && tau == o.tau;
}

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(const Box& box, double spacing) : spacing_(spacing), box_(box) {
  box.validate();
  if (!(spacing > 0.0)) throw ContractViolation("grid: spacing must be positive");
  const auto n = static_cast<std::size_t>(box.dim());
  k_min_.resize(n);
  k_max_.resize(n);
  stride_.resize(n);
  size_ = 1;
  for (std::size_t a = 0; a < n; ++a) {
    const auto i = static_cast<Eigen::Index>(a);
    k_min_[a] = static_cast<std::int64_t>(std::ceil(box.lo(i) / spacing - 1e-9));
    k_max_[a] = static_cast<std::int64_t>(std::floor(box.hi(i) / spacing + 1e-9));
    if (k_min_[a] > k_max_[a])
      throw ContractViolation("grid: no lattice point inside the box along axis " + std::to_string(a));
  }
  for (std::size_t a = n; a-- > 0;) {
    stride_[a] = size_;
    size_ *= axis_count(a);
  }
  if (size_ == 0) throw ContractViolation("grid: empty grid");
}

void Grid::point(std::size_t index, std::span<double> out) const {
  for (std::size_t a = 0; a < dim(); ++a) {
    const auto k = static_cast<std::int64_t>((index / stride_[a]) % axis_count(a)) + k_min_[a];
    out[a] = static_cast<double>(k) * spacing_;
  }
}

Vec Grid::point(std::size_t index) const {
  Vec p(static_cast<Eigen::Index>(dim()));
  point(index, std::span<double>(p.data(), dim()));
  return p;
}

std::optional<std::size_t> Grid::nearest(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("grid: point dimension mismatch");
  std::size_t index = 0;
  for (std::size_t a = 0; a < dim(); ++a) {
    const auto i = static_cast<Eigen::Index>(a);
    const double tol = 1e-9 * std::max(1.0, std::max(std::abs(box_.lo(i)), std::abs(box_.hi(i))));
    if (!(x[a] >= box_.lo(i) - tol && x[a] <= box_.hi(i) + tol)) return std::nullopt;
    // std::round rounds halfway cases away from zero.
    auto k = static_cast<std::int64_t>(std::round(x[a] / spacing_));
    k = std::clamp(k, k_min_[a], k_max_[a]);
    index += static_cast<std::size_t>(k - k_min_[a]) * stride_[a];
  }
  return index;
}

std::optional<std::size_t> Grid::index_of_point(const Vec& p, double tol) const {
  auto idx = nearest(p);
  if (!idx) return std::nullopt;
  if ((point(*idx) - p).cwiseAbs().maxCoeff() > tol) return std::nullopt;
  return idx;
}

GridSets build_grid(const GridSpec& spec) {
  spec.validate();
  return {Grid(spec.domain, spec.eta), Grid(spec.inputs, spec.mu)};
}

std::size_t SymbolicAbstraction::blocked_count() const {
  return static_cast<std::size_t>(std::count(table.begin(), table.end(), kBlocked));
}

// ---------------------------------------------------------------------------
// Transitions

SymbolicAbstraction compute_transitions(const VectorField& field, const GridSpec& spec,
                                        const AbstractionOptions& options) {
  GridSets grids = build_grid(spec);
  if (static_cast<std::size_t>(spec.domain.dim()) != field.state_dim() ||
      static_cast<std::size_t>(spec.inputs.dim()) != field.input_dim())
    throw DimensionError("compute_transitions: grid and field dimensions disagree");
  if (grids.states.size() >= SymbolicAbstraction::kBlocked)
    throw ContractViolation("compute_transitions: too many states for 32-bit indices");
  const std::size_t n_steps = steps_in(spec.tau, options.step);

  SymbolicAbstraction abs;
  abs.spec = spec;
  abs.states = std::move(grids.states);
  abs.inputs = std::move(grids.inputs);
  const std::size_t ns = abs.states.size(), nu = abs.inputs.size();
  const std::size_t n = field.state_dim(), m = field.input_dim();
  abs.table.assign(ns * nu, SymbolicAbstraction::kBlocked);

  const unsigned threads = options.threads == 0 ? default_threads() : options.threads;
  std::vector<std::size_t> diverged(threads, 0);
  const std::size_t chunk = (ns + threads - 1) / threads;
  parallel_for(threads, threads, [&](std::size_t wb, std::size_t we) {
    for (std::size_t w = wb; w < we; ++w) {
      Rk4Stepper stepper(field);
      std::vector<double> x0(n), x(n), u(m);
      const std::size_t begin = std::min(ns, w * chunk), end = std::min(ns, begin + chunk);
      for (std::size_t s = begin; s < end; ++s) {
        abs.states.point(s, x0);
        for (std::size_t ui = 0; ui < nu; ++ui) {
          abs.inputs.point(ui, u);
          x = x0;
          if (!stepper.try_advance(x, u, n_steps, options.step)) {
            ++diverged[w];
            continue;
          }
          if (auto succ = abs.states.nearest(x)) abs.table[s * nu + ui] = static_cast<std::uint32_t>(*succ);
        }
      }
    }
  });
  for (auto d : diverged) abs.diverged += d;
  return abs;
}

// ---------------------------------------------------------------------------
// Empirical precision

std::vector<EpsilonRun> random_epsilon_runs(const SymbolicAbstraction& abs, std::size_t n_runs,
                                            std::size_t run_length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_state(0, abs.n_states() - 1);
  std::uniform_int_distribution<std::uint32_t> pick_input(0, static_cast<std::uint32_t>(abs.n_inputs() - 1));
  std::vector<EpsilonRun> runs(n_runs);
  for (auto& r : runs) {
    r.x0 = abs.states.point(pick_state(rng));
    r.inputs.resize(run_length);
    for (auto& u : r.inputs) u = pick_input(rng);
  }
  return runs;
}

EpsilonResult check_epsilon(const VectorField& field, const SymbolicAbstraction& abs, double epsilon,
                            std::span<const EpsilonRun> runs, double step) {
  const std::size_t n_steps = steps_in(abs.spec.tau, step);
  EpsilonResult out;
  out.report.label = "epsilon";
  out.run_deviation.assign(runs.size(), 0.0);
  out.run_steps.assign(runs.size(), 0);
  Rk4Stepper stepper(field);
  std::size_t blocked = 0, total_steps = 0;
  double worst = 0.0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto start = abs.states.index_of_point(runs[r].x0);
    if (!start) throw ContractViolation("check_epsilon: run does not start at a grid point");
    std::size_t s = *start;
    Vec x = abs.states.point(s);
    for (std::size_t k = 0; k < runs[r].inputs.size(); ++k) {
      const std::uint32_t ui = runs[r].inputs[k];
      const std::uint32_t next = abs.successor(s, ui);
      if (next == SymbolicAbstraction::kBlocked) {
        ++blocked;
        break;
      }
      const Vec u = abs.inputs.point(ui);
      if (!stepper.try_advance(std::span<double>(x.data(), static_cast<std::size_t>(x.size())),
                               std::span<const double>(u.data(), static_cast<std::size_t>(u.size())), n_steps, step)) {
        ++blocked;
        break;
      }
      s = next;
      const double dev = (x - abs.states.point(s)).norm();
      out.run_deviation[r] = std::max(out.run_deviation[r], dev);
      ++out.run_steps[r];
      ++total_steps;
      if (dev > worst) {
        worst = dev;
        out.report.worst_index = r;
        out.report.worst_point = {static_cast<double>(r), static_cast<double>(k + 1)};
      }
    }
  }
  out.report.n_samples = total_steps;
  out.report.max_violation = worst - epsilon;
  out.report.pass = worst <= epsilon;
  out.report.values["max_deviation"] = worst;
  out.report.values["epsilon"] = epsilon;
  out.report.values["runs"] = static_cast<double>(runs.size());
  out.report.values["blocked_runs"] = static_cast<double>(blocked);
  return out;
}

EpsilonResult check_epsilon(const VectorField& field, const SymbolicAbstraction& abs, double epsilon,
                            std::size_t n_runs, std::size_t run_length, std::uint64_t seed, double step) {
  const auto runs = random_epsilon_runs(abs, n_runs, run_length, seed);
  return check_epsilon(field, abs, epsilon, runs, step);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::array<char, 8> kMagic = {'I', 'N', 'C', 'R', 'A', 'B', 'S', '1'};

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  std::array<unsigned char, sizeof(T)> bytes;
  if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
    throw CorruptFileError("abstraction file is truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T v;
  std::memcpy(&v, bytes.data(), sizeof(T));
  return v;
}

void put_vec(std::ostream& os, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put_le<double>(os, v(i));
}

Vec get_vec(std::istream& is, std::uint64_t n) {
  Vec v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = get_le<double>(is);
  return v;
}

}  // namespace

void save_abstraction(const std::filesystem::path& path, const SymbolicAbstraction& abs) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(abs.spec.domain.dim()));
  put_le<std::uint64_t>(os, static_cast<std::uint64_t>(abs.spec.inputs.dim()));
  put_vec(os, abs.spec.domain.lo);
  put_vec(os, abs.spec.domain.hi);
  put_le<double>(os, abs.spec.eta);
  put_vec(os, abs.spec.inputs.lo);
  put_vec(os, abs.spec.inputs.hi);
  put_le<double>(os, abs.spec.mu);
  put_le<double>(os, abs.spec.tau);
  put_le<std::uint64_t>(os, abs.n_states());
  put_le<std::uint64_t>(os, abs.n_inputs());
  for (std::uint32_t t : abs.table) put_le<std::uint32_t>(os, t);
  if (!os) throw Error("failed writing '" + path.string() + "'");
}

std::string abstraction_metadata_json(const SymbolicAbstraction& abs) {
  nlohmann::json j{{"n_states", abs.n_states()},
                   {"n_inputs", abs.n_inputs()},
                   {"tau", abs.spec.tau},
                   {"eta", abs.spec.eta},
                   {"blocked_count", abs.blocked_count()}};
  return j.dump(2);
}

SymbolicAbstraction load_abstraction(const std::filesystem::path& path, const std::optional<GridSpec>& expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path.string() + "'");
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size())) throw CorruptFileError("abstraction file is truncated");
  if (magic != kMagic) throw CorruptFileError("not an abstraction file (bad magic or version)");

  const auto n = get_le<std::uint64_t>(is);
  const auto m = get_le<std::uint64_t>(is);
  if (n == 0 || n > 64 || m > 64) throw CorruptFileError("abstraction file has implausible dimensions");
  SymbolicAbstraction abs;
  abs.spec.domain.lo = get_vec(is, n);
  abs.spec.domain.hi = get_vec(is, n);
  abs.spec.eta = get_le<double>(is);
  abs.spec.inputs.lo = get_vec(is, m);
  abs.spec.inputs.hi = get_vec(is, m);
  abs.spec.mu = get_le<double>(is);
  abs.spec.tau = get_le<double>(is);
  const auto ns = get_le<std::uint64_t>(is);
  const auto nu = get_le<std::uint64_t>(is);

  if (expected) {
    if (static_cast<std::uint64_t>(expected->domain.dim()) != n || static_cast<std::uint64_t>(expected->inputs.dim()) != m)
      throw DimensionError("abstraction file dimensions (" + std::to_string(n) + ", " + std::to_string(m) +
                           ") do not match the configured grid");
    if (!(*expected == abs.spec)) throw DimensionError("abstraction file grid does not match the configured grid");
  }
  GridSets grids;
  try {
    grids = build_grid(abs.spec);
  } catch (const Error& e) {
    throw CorruptFileError(std::string("abstraction file holds an invalid grid: ") + e.what());
  }
  if (grids.states.size() != ns || grids.inputs.size() != nu)
    throw CorruptFileError("abstraction file grid sizes are inconsistent with its spec");
  abs.states = std::move(grids.states);
  abs.inputs = std::move(grids.inputs);
  abs.table.resize(static_cast<std::size_t>(ns * nu));
  for (auto& t : abs.table) {
    t = get_le<std::uint32_t>(is);
    if (t != SymbolicAbstraction::kBlocked && t >= ns) throw CorruptFileError("abstraction file has a bad successor");
  }
  if (is.peek() != std::char_traits<char>::eof()) throw CorruptFileError("abstraction file has trailing bytes");
  return abs;
}

}  // namespace incstab
