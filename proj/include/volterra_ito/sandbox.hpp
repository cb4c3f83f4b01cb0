#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "volterra_ito/errors.hpp"
#include "volterra_ito/quadrature.hpp"

// Exact Malliavin calculus on polynomials in n i.i.d. standard normals xi_0..xi_{n-1}.
// H = R^n, D is the gradient, delta its Gaussian adjoint, and the predictable
// projection conditions coordinate i on xi_0..xi_{i-1}.

namespace vito::sandbox {

struct Factor {
  std::uint32_t var;
  std::uint32_t power;
  auto operator<=>(const Factor&) const = default;
};

/// Sorted by variable, powers >= 1. The empty monomial is the constant 1.
using Monomial = std::vector<Factor>;

inline Monomial monomial_product(const Monomial& a, const Monomial& b) {
  Monomial out;
  out.reserve(a.size() + b.size());
  auto i = a.begin(), j = b.begin();
  while (i != a.end() || j != b.end()) {
    if (j == b.end() || (i != a.end() && i->var < j->var)) {
      out.push_back(*i++);
    } else if (i == a.end() || j->var < i->var) {
      out.push_back(*j++);
    } else {
      out.push_back({i->var, i->power + j->power});
      ++i;
      ++j;
    }
  }
  return out;
}

inline unsigned monomial_degree(const Monomial& m) {
  unsigned d = 0;
  for (const auto& f : m) d += f.power;
  return d;
}

/// Polynomial in `dim` Gaussian coordinates; zero coefficients are never stored.
class GaussPoly {
public:
  using Terms = std::map<Monomial, double>;

  explicit GaussPoly(std::size_t dim) : dim_(dim) {}

  static GaussPoly constant(std::size_t dim, double c) {
    GaussPoly p(dim);
    p.add_term({}, c);
    return p;
  }

  static GaussPoly variable(std::size_t dim, std::size_t i, unsigned power = 1) {
    if (i >= dim) detail::domain_fail("sandbox: coordinate ", i, " out of range for dimension ", dim);
    GaussPoly p(dim);
    p.add_term(power == 0 ? Monomial{} : Monomial{{static_cast<std::uint32_t>(i), power}}, 1.0);
    return p;
  }

  std::size_t dim() const noexcept { return dim_; }
  const Terms& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }

  void add_term(const Monomial& m, double c) {
    if (c == 0.0) return;
    for (const auto& f : m)
      if (f.var >= dim_ || f.power == 0) detail::domain_fail("sandbox: malformed monomial");
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  unsigned degree() const {
    unsigned d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, monomial_degree(m));
    return d;
  }

  double max_abs_coefficient() const {
    double v = 0.0;
    for (const auto& [m, c] : terms_) v = std::max(v, std::abs(c));
    return v;
  }

  /// Formal partial derivative in coordinate i.
  GaussPoly partial(std::size_t i) const {
    GaussPoly out(dim_);
    for (const auto& [m, c] : terms_) {
      auto it = std::find_if(m.begin(), m.end(), [&](const Factor& f) { return f.var == i; });
      if (it == m.end()) continue;
      Monomial d = m;
      auto& f = d[static_cast<std::size_t>(it - m.begin())];
      const double k = f.power;
      if (--f.power == 0) d.erase(d.begin() + (it - m.begin()));
      out.add_term(d, c * k);
    }
    return out;
  }

  /// Replace xi_j^k by its moment m_k for every j >= first (conditional expectation given xi_{<first}).
  GaussPoly integrate_out_from(std::size_t first) const {
    GaussPoly out(dim_);
    for (const auto& [m, c] : terms_) {
      Monomial kept;
      double scale = c;
      for (const auto& f : m) {
        if (f.var >= first) {
          scale *= gaussian_moment(f.power);
        } else {
          kept.push_back(f);
        }
      }
      out.add_term(kept, scale);
    }
    return out;
  }

  GaussPoly& operator+=(const GaussPoly& o) {
    check_dim(o);
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  GaussPoly& operator-=(const GaussPoly& o) {
    check_dim(o);
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  GaussPoly& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto& [m, c] : terms_) c *= s;
    return *this;
  }

  friend GaussPoly operator+(GaussPoly a, const GaussPoly& b) { return a += b; }
  friend GaussPoly operator-(GaussPoly a, const GaussPoly& b) { return a -= b; }
  friend GaussPoly operator*(GaussPoly a, double s) { return a *= s; }
  friend GaussPoly operator*(double s, GaussPoly a) { return a *= s; }
  friend GaussPoly operator*(const GaussPoly& a, const GaussPoly& b) {
    a.check_dim(b);
    GaussPoly out(a.dim_);
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) out.add_term(monomial_product(ma, mb), ca * cb);
    return out;
  }

  bool operator==(const GaussPoly&) const = default;

private:
  void check_dim(const GaussPoly& o) const {
    if (o.dim_ != dim_) detail::domain_fail("sandbox: dimension mismatch ", dim_, " vs ", o.dim_);
  }

  std::size_t dim_;
  Terms terms_;
};

/// H-valued polynomial: one GaussPoly per coordinate direction.
class PolyField {
public:
  explicit PolyField(std::size_t dim) : components_(dim, GaussPoly(dim)) {}
  explicit PolyField(std::vector<GaussPoly> components) : components_(std::move(components)) {
    for (const auto& c : components_)
      if (c.dim() != components_.size()) detail::domain_fail("sandbox: field length must equal the dimension");
  }

  std::size_t dim() const noexcept { return components_.size(); }
  const GaussPoly& operator[](std::size_t i) const { return components_[i]; }
  GaussPoly& operator[](std::size_t i) { return components_[i]; }
  const std::vector<GaussPoly>& components() const noexcept { return components_; }

  friend PolyField operator*(const GaussPoly& f, const PolyField& u) {
    PolyField out(u.dim());
    for (std::size_t i = 0; i < u.dim(); ++i) out[i] = f * u[i];
    return out;
  }

  bool operator==(const PolyField&) const = default;

private:
  std::vector<GaussPoly> components_;
};

inline GaussPoly inner(const PolyField& u, const PolyField& v) {
  if (u.dim() != v.dim()) detail::domain_fail("sandbox: field dimension mismatch");
  GaussPoly out(u.dim());
  for (std::size_t i = 0; i < u.dim(); ++i) out += u[i] * v[i];
  return out;
}

/// E[f(xi)] by Isserlis/Wick: product of single-coordinate moments per monomial.
inline double wick_expectation(const GaussPoly& f) {
  double s = 0.0;
  for (const auto& [m, c] : f.terms()) {
    double term = c;
    for (const auto& fac : m) {
      if (fac.power % 2 == 1) {
        term = 0.0;
        break;
      }
      term *= gaussian_moment(fac.power);
    }
    s += term;
  }
  return s;
}

/// Upper bound on the magnitudes summed by wick_expectation; used as the
/// scale for relative residual checks.
inline double wick_scale(const GaussPoly& f) {
  double s = 0.0;
  for (const auto& [m, c] : f.terms()) {
    double term = std::abs(c);
    for (const auto& fac : m) term *= gaussian_moment(fac.power + fac.power % 2);
    s += term;
  }
  return std::max(s, 1.0);
}

inline double l2_norm(const GaussPoly& f) { return std::sqrt(std::max(wick_expectation(f * f), 0.0)); }

inline PolyField derive(const GaussPoly& f) {
  PolyField out(f.dim());
  for (std::size_t i = 0; i < f.dim(); ++i) out[i] = f.partial(i);
  return out;
}

/// delta(u) = sum_i xi_i u_i - sum_i d_i u_i.
inline GaussPoly diverge(const PolyField& u) {
  const std::size_t n = u.dim();
  GaussPoly out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out += GaussPoly::variable(n, i) * u[i];
    out -= u[i].partial(i);
  }
  return out;
}

/// Component i -> E[u_i | xi_0..xi_{i-1}].
inline PolyField project_predictable(const PolyField& u) {
  PolyField out(u.dim());
  for (std::size_t i = 0; i < u.dim(); ++i) out[i] = u[i].integrate_out_from(i);
  return out;
}

/// |E[f delta(u)] - E[<Df, u>]| relative to the size of the terms involved.
inline double check_adjointness(const GaussPoly& f, const PolyField& u) {
  const GaussPoly lhs = f * diverge(u);
  const GaussPoly rhs = inner(derive(f), u);
  return std::abs(wick_expectation(lhs) - wick_expectation(rhs)) / std::max(wick_scale(lhs), wick_scale(rhs));
}

/// Largest coefficient of delta(f u) - (f delta(u) - <Df, u>); the identity is exact.
inline double check_product_rule(const GaussPoly& f, const PolyField& u) {
  const GaussPoly residual = diverge(f * u) - (f * diverge(u) - inner(derive(f), u));
  return residual.max_abs_coefficient();
}

/// |E[<Df, Pi Df>] - E[|Pi Df|^2]| relative to scale.
inline double check_ortho_identity(const GaussPoly& f) {
  const PolyField u = derive(f);
  const PolyField p = project_predictable(u);
  const GaussPoly a = inner(u, p), b = inner(p, p);
  return std::abs(wick_expectation(a) - wick_expectation(b)) / std::max(wick_scale(a), wick_scale(b));
}

struct IsometryResult {
  double lhs;        // E[delta(u)^2]
  double rhs_squared_hs;  // E|u|^2 + E[sum_ij (d_i u_j)^2]
  double rhs_exact;  // E|u|^2 + E[sum_ij d_i u_j d_j u_i]
  double scale;
};

inline IsometryResult check_isometry(const PolyField& u) {
  const std::size_t n = u.dim();
  const GaussPoly d = diverge(u);
  const GaussPoly lhs = d * d;
  GaussPoly norm(n), hs(n), trace(n);
  for (std::size_t i = 0; i < n; ++i) norm += u[i] * u[i];
  std::vector<std::vector<GaussPoly>> grad(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) grad[i].push_back(u[j].partial(i));  // grad[i][j] = d_i u_j
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      hs += grad[i][j] * grad[i][j];
      trace += grad[i][j] * grad[j][i];
    }
  const double e_norm = wick_expectation(norm);
  const double scale = std::max({wick_scale(lhs), wick_scale(norm + trace), wick_scale(norm + hs)});
  return {wick_expectation(lhs), e_norm + wick_expectation(hs), e_norm + wick_expectation(trace), scale};
}

/// delta(Pi D f) - (f - E f): zero in the continuum, a discrete residue here.
inline GaussPoly factorization_defect(const GaussPoly& f) {
  GaussPoly centered = f;
  centered -= GaussPoly::constant(f.dim(), wick_expectation(f));
  return diverge(project_predictable(derive(f))) - centered;
}

/// (sum_i xi_i / sqrt(n))^2: the discretized W_1^2.
inline GaussPoly discretized_w1_squared(std::size_t n) {
  GaussPoly g(n);
  const double c = std::sqrt(1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) g += GaussPoly::variable(n, i) * c;
  return g * g;
}

// ---------------------------------------------------------------------------
// Randomized exact suite

struct SuiteCase {
  GaussPoly f;
  PolyField u;
  PolyField v;
};

/// Sparse polynomial with small integer coefficients, so every Wick sum is exact.
inline GaussPoly random_poly(std::mt19937_64& rng, std::size_t dim, unsigned max_degree, unsigned max_terms) {
  GaussPoly p(dim);
  const unsigned terms = 1 + static_cast<unsigned>(rng() % max_terms);
  for (unsigned k = 0; k < terms; ++k) {
    const unsigned deg = static_cast<unsigned>(rng() % (max_degree + 1));
    GaussPoly m = GaussPoly::constant(dim, static_cast<double>(static_cast<int>(rng() % 7) - 3));
    for (unsigned d = 0; d < deg; ++d) m = m * GaussPoly::variable(dim, rng() % dim);
    p += m;
  }
  return p;
}

inline SuiteCase random_case(std::mt19937_64& rng, std::size_t dim, unsigned max_degree) {
  SuiteCase c{random_poly(rng, dim, max_degree, 4), PolyField(dim), PolyField(dim)};
  for (std::size_t i = 0; i < dim; ++i) {
    if (rng() % 3 != 0) c.u[i] = random_poly(rng, dim, max_degree, 3);
    if (rng() % 3 != 0) c.v[i] = random_poly(rng, dim, max_degree, 3);
  }
  return c;
}

struct SuiteReport {
  std::size_t cases = 0;
  double max_adjointness = 0.0;
  double max_product_rule = 0.0;
  double max_ortho = 0.0;
  double max_idempotence = 0.0;     // largest coefficient of Pi(Pi u) - Pi u
  double max_self_adjoint = 0.0;    // |E<Pi u, v> - E<u, Pi v>| / scale
  double max_isometry = 0.0;        // |lhs - rhs_exact| / scale
  double max_isometry_hs_gap = 0.0;  // |rhs_squared_hs - rhs_exact| / scale, reported only
  std::vector<double> defect_norms;     // factorization defect L2 norm for each n
  std::vector<std::size_t> defect_dims;
  double max_defect_rel_error = 0.0;    // vs sqrt(2/n)
  double max_multilinear_defect = 0.0;
  double tolerance = 1e-12;

  bool pass() const {
    return max_adjointness <= tolerance && max_product_rule <= tolerance && max_ortho <= tolerance &&
           max_idempotence <= tolerance && max_self_adjoint <= tolerance && max_isometry <= tolerance &&
           max_defect_rel_error <= tolerance && max_multilinear_defect <= tolerance;
  }

  nlohmann::json to_json() const {
    return {{"cases", cases},
            {"adjointness", max_adjointness},
            {"product_rule", max_product_rule},
            {"ortho_identity", max_ortho},
            {"projection_idempotence", max_idempotence},
            {"projection_self_adjoint", max_self_adjoint},
            {"isometry_exact", max_isometry},
            {"isometry_hs_gap", max_isometry_hs_gap},
            {"defect_dims", defect_dims},
            {"defect_norms", defect_norms},
            {"defect_rel_error", max_defect_rel_error},
            {"multilinear_defect", max_multilinear_defect},
            {"tolerance", tolerance},
            {"pass", pass()}};
  }
};

/// Multilinear polynomial: each coordinate appears with power at most one.
inline GaussPoly random_multilinear(std::mt19937_64& rng, std::size_t dim) {
  GaussPoly p(dim);
  for (unsigned k = 0; k < 4; ++k) {
    Monomial m;
    for (std::size_t i = 0; i < dim; ++i)
      if (rng() % 2) m.push_back({static_cast<std::uint32_t>(i), 1});
    p.add_term(m, static_cast<double>(static_cast<int>(rng() % 7) - 3));
  }
  return p;
}

inline SuiteReport run_suite(std::size_t cases = 200, std::uint64_t seed = 20240601,
                             std::vector<std::size_t> defect_dims = {4, 16, 64, 256}) {
  std::mt19937_64 rng(seed);
  SuiteReport r;
  r.cases = cases;
  for (std::size_t k = 0; k < cases; ++k) {
    const std::size_t dim = 1 + rng() % 6;
    const unsigned degree = 1 + static_cast<unsigned>(rng() % 8);
    const SuiteCase c = random_case(rng, dim, degree);
    r.max_adjointness = std::max(r.max_adjointness, check_adjointness(c.f, c.u));
    r.max_product_rule = std::max(r.max_product_rule, check_product_rule(c.f, c.u));
    r.max_ortho = std::max(r.max_ortho, check_ortho_identity(c.f));

    const PolyField pu = project_predictable(c.u);
    const PolyField ppu = project_predictable(pu);
    for (std::size_t i = 0; i < dim; ++i)
      r.max_idempotence = std::max(r.max_idempotence, (ppu[i] - pu[i]).max_abs_coefficient());
    const GaussPoly a = inner(pu, c.v), b = inner(c.u, project_predictable(c.v));
    r.max_self_adjoint = std::max(r.max_self_adjoint, std::abs(wick_expectation(a) - wick_expectation(b)) /
                                                          std::max(wick_scale(a), wick_scale(b)));

    const IsometryResult iso = check_isometry(c.u);
    r.max_isometry = std::max(r.max_isometry, std::abs(iso.lhs - iso.rhs_exact) / iso.scale);
    r.max_isometry_hs_gap = std::max(r.max_isometry_hs_gap, std::abs(iso.rhs_squared_hs - iso.rhs_exact) / iso.scale);

    r.max_multilinear_defect =
        std::max(r.max_multilinear_defect, factorization_defect(random_multilinear(rng, dim)).max_abs_coefficient());
  }
  for (std::size_t n : defect_dims) {
    const double norm = l2_norm(factorization_defect(discretized_w1_squared(n)));
    const double expected = std::sqrt(2.0 / static_cast<double>(n));
    r.defect_dims.push_back(n);
    r.defect_norms.push_back(norm);
    r.max_defect_rel_error = std::max(r.max_defect_rel_error, std::abs(norm - expected) / expected);
  }
  return r;
}

}  // namespace vito::sandbox
