#include "incstab/polynomial.hpp"

#include <cmath>
#include <sstream>

#include "incstab/errors.hpp"

namespace incstab {

Polynomial Polynomial::constant(std::size_t n_vars, double c) {
  Polynomial p(n_vars);
  p.add_term(Exponents(n_vars, 0), c);
  return p;
}

Polynomial Polynomial::variable(std::size_t n_vars, std::size_t index) {
  if (index >= n_vars) throw DimensionError("Polynomial::variable: index out of range");
  Polynomial p(n_vars);
  Exponents e(n_vars, 0);
  e[index] = 1;
  p.add_term(e, 1.0);
  return p;
}

void Polynomial::add_term(const Exponents& exponents, double coef) {
  if (exponents.size() != n_vars_) throw DimensionError("Polynomial: exponent vector has wrong length");
  if (coef == 0.0) return;
  auto [it, inserted] = terms_.emplace(exponents, coef);
  if (!inserted) {
    it->second += coef;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double Polynomial::eval(std::span<const double> x) const {
  if (x.size() != n_vars_) throw DimensionError("Polynomial::eval: wrong number of variables");
  double sum = 0.0;
  for (const auto& [e, c] : terms_) {
    double t = c;
    for (std::size_t i = 0; i < n_vars_; ++i)
      for (std::uint32_t k = 0; k < e[i]; ++k) t *= x[i];
    sum += t;
  }
  return sum;
}

Polynomial Polynomial::derivative(std::size_t var) const {
  if (var >= n_vars_) throw DimensionError("Polynomial::derivative: variable out of range");
  Polynomial d(n_vars_);
  for (const auto& [e, c] : terms_) {
    if (e[var] == 0) continue;
    Exponents de = e;
    de[var] -= 1;
    d.add_term(de, c * static_cast<double>(e[var]));
  }
  return d;
}

std::size_t Polynomial::degree() const {
  std::size_t deg = 0;
  for (const auto& [e, c] : terms_) {
    std::size_t s = 0;
    for (auto k : e) s += k;
    deg = std::max(deg, s);
  }
  return deg;
}

Polynomial Polynomial::embed(std::size_t n_vars, std::span<const std::size_t> target) const {
  if (target.size() != n_vars_) throw DimensionError("Polynomial::embed: target map has wrong length");
  Polynomial out(n_vars);
  for (const auto& [e, c] : terms_) {
    Exponents ne(n_vars, 0);
    for (std::size_t i = 0; i < n_vars_; ++i) {
      if (target[i] >= n_vars) throw DimensionError("Polynomial::embed: target index out of range");
      ne[target[i]] += e[i];
    }
    out.add_term(ne, c);
  }
  return out;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
  if (o.n_vars_ != n_vars_) throw DimensionError("Polynomial: variable count mismatch");
  Polynomial r = *this;
  for (const auto& [e, c] : o.terms_) r.add_term(e, c);
  return r;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + (-o); }

Polynomial Polynomial::operator*(const Polynomial& o) const {
  if (o.n_vars_ != n_vars_) throw DimensionError("Polynomial: variable count mismatch");
  Polynomial r(n_vars_);
  for (const auto& [e1, c1] : terms_) {
    for (const auto& [e2, c2] : o.terms_) {
      Exponents e(n_vars_);
      for (std::size_t i = 0; i < n_vars_; ++i) e[i] = e1[i] + e2[i];
      r.add_term(e, c1 * c2);
    }
  }
  return r;
}

Polynomial Polynomial::operator*(double s) const {
  Polynomial r(n_vars_);
  for (const auto& [e, c] : terms_) r.add_term(e, c * s);
  return r;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& [e, c] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << c;
    for (std::size_t i = 0; i < n_vars_; ++i) {
      if (e[i] == 0) continue;
      os << "*x" << (i + 1);
      if (e[i] > 1) os << '^' << e[i];
    }
  }
  return os.str();
}

PolynomialMap::PolynomialMap(std::size_t n_vars, std::vector<Polynomial> components)
    : n_vars_(n_vars), components_(std::move(components)) {
  for (const auto& c : components_)
    if (c.n_vars() != n_vars_) throw DimensionError("PolynomialMap: component has wrong variable count");
  jac_.resize(components_.size());
  for (std::size_t r = 0; r < components_.size(); ++r)
    for (std::size_t c = 0; c < n_vars_; ++c) jac_[r].push_back(components_[r].derivative(c));
}

void PolynomialMap::eval(std::span<const double> x, std::span<double> out) const {
  if (out.size() != components_.size()) throw DimensionError("PolynomialMap::eval: output size mismatch");
  for (std::size_t i = 0; i < components_.size(); ++i) out[i] = components_[i].eval(x);
}

Vec PolynomialMap::eval(const Vec& x) const {
  Vec out(static_cast<Eigen::Index>(components_.size()));
  eval(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
       std::span<double>(out.data(), static_cast<std::size_t>(out.size())));
  return out;
}

Mat PolynomialMap::jacobian(const Vec& x) const {
  const auto& sym = jac_;
  Mat j(static_cast<Eigen::Index>(n_out()), static_cast<Eigen::Index>(n_vars_));
  const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
  for (std::size_t r = 0; r < n_out(); ++r)
    for (std::size_t c = 0; c < n_vars_; ++c)
      j(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = sym[r][c].eval(xs);
  return j;
}

}  // namespace incstab
