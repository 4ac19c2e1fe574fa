#include "incstab/sampling.hpp"

#include <algorithm>
#include <random>
#include <thread>
#include <vector>

#include <boost/random/sobol.hpp>

#include "incstab/errors.hpp"

namespace incstab {

void Box::validate() const {
  if (lo.size() != hi.size()) throw InvalidSetError("box: lo and hi have different sizes");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (!(lo(i) <= hi(i))) throw InvalidSetError("box: lo > hi in component " + std::to_string(i));
}

bool Box::contains(const Vec& x, double tol) const {
  if (x.size() != lo.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (x(i) < lo(i) - tol || x(i) > hi(i) + tol) return false;
  return true;
}

Vec Box::from_unit(const Vec& unit) const {
  return lo + (hi - lo).cwiseProduct(unit);
}

Box Box::product(const Box& a, const Box& b) {
  Box r{Vec(a.dim() + b.dim()), Vec(a.dim() + b.dim())};
  r.lo << a.lo, b.lo;
  r.hi << a.hi, b.hi;
  return r;
}

Mat unit_samples(std::size_t dim, std::size_t n, SamplingScheme scheme, std::uint64_t seed) {
  Mat out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  if (dim == 0 || n == 0) return out;
  if (scheme == SamplingScheme::kSobol) {
    boost::random::sobol engine(static_cast<unsigned>(dim));
    engine.discard(dim);  // drop the all-zero first point
    if (seed != 0) engine.discard(seed * dim);
    const double norm = 1.0 / (static_cast<double>(engine.max()) + 1.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < dim; ++d)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = static_cast<double>(engine()) * norm;
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < dim; ++d)
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = dist(rng);
  }
  return out;
}

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t begin, std::size_t end)>& body) {
  if (threads == 0) threads = default_threads();
  const std::size_t workers = std::min<std::size_t>(threads, std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace incstab
