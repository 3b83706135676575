#pragma once

// Level-set and tail measures for Borel transforms of finite point measures,
//
//   F(E) = sum_n p_n / (u_n - E).
//
// On each of the N+1 open branches cut out by the atoms, E + F(E) increases
// strictly from -inf to +inf, so every level equation has exactly one root per
// branch and plain bisection finds it without any bracketing guesswork.
// F alone increases from 0+ to +inf left of the first atom, from -inf to +inf
// between atoms, and from -inf to 0- right of the last atom.

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "corrlab/core.hpp"

namespace corrlab::boole {

struct Atom {
  double u = 0.0;  // location
  double p = 0.0;  // weight > 0
};

class PointMeasure {
 public:
  PointMeasure() = default;

  /// Sorts atoms and merges equal locations by adding weights.
  explicit PointMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    for (const auto& a : atoms_) {
      require(std::isfinite(a.u), "atom location must be finite");
      require(std::isfinite(a.p) && a.p > 0.0, "atom weight must be positive and finite");
    }
    std::stable_sort(atoms_.begin(), atoms_.end(), [](const Atom& x, const Atom& y) { return x.u < y.u; });
    std::vector<Atom> merged;
    for (const auto& a : atoms_) {
      if (!merged.empty() && merged.back().u == a.u)
        merged.back().p += a.p;
      else
        merged.push_back(a);
    }
    atoms_ = std::move(merged);
  }

  [[nodiscard]] const std::vector<Atom>& atoms() const { return atoms_; }
  [[nodiscard]] std::size_t size() const { return atoms_.size(); }
  [[nodiscard]] bool empty() const { return atoms_.empty(); }

  [[nodiscard]] double total_mass() const {
    double c = 0.0;
    for (const auto& a : atoms_) c += a.p;
    return c;
  }

  [[nodiscard]] PointMeasure scaled(double factor) const {
    require(factor > 0.0, "scale factor must be positive");
    auto a = atoms_;
    for (auto& x : a) x.p *= factor;
    return PointMeasure(std::move(a));
  }

 private:
  std::vector<Atom> atoms_;
};

/// F(z) = sum p_n / (u_n - z). Real z equal to an atom is rejected.
inline cplx borel_transform(const PointMeasure& m, cplx z) {
  cplx f = 0.0;
  for (const auto& a : m.atoms()) {
    if (z.imag() == 0.0 && z.real() == a.u) throw ValidationError("Borel transform evaluated at an atom");
    f += a.p / (a.u - z);
  }
  return f;
}

inline double borel_transform_real(const PointMeasure& m, double e) {
  double f = 0.0;
  for (const auto& a : m.atoms()) f += a.p / (a.u - e);
  return f;
}

namespace detail {

// Root of an increasing function g on the open interval (lo, hi), with g -> -inf
// at lo and +inf at hi (either end may be infinite). Stops at one ULP.
template <typename G>
double branch_root(G g, double lo, double hi) {
  if (std::isinf(lo)) {
    double step = 1.0;
    double x = hi - step;
    while (!(g(x) < 0.0)) {
      step *= 2.0;
      x = hi - step;
      if (!std::isfinite(x)) throw NumericalError("left branch root bracketing failed");
    }
    lo = x;
  }
  if (std::isinf(hi)) {
    double step = 1.0;
    double x = lo + step;
    while (!(g(x) > 0.0)) {
      step *= 2.0;
      x = lo + step;
      if (!std::isfinite(x)) throw NumericalError("right branch root bracketing failed");
    }
    hi = x;
  }
  for (int it = 0; it < 2000; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) return mid;
    const double v = g(mid);
    if (v == 0.0) return mid;
    (v < 0.0 ? lo : hi) = mid;
  }
  throw NumericalError("branch bisection did not terminate");
}

}  // namespace detail

/// The N+1 roots of E + F(E) = level, one per branch, in increasing order.
inline std::vector<double> level_roots(const PointMeasure& m, double level) {
  const auto& at = m.atoms();
  auto g = [&](double e) { return e + borel_transform_real(m, e) - level; };
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> roots;
  roots.reserve(at.size() + 1);
  for (std::size_t b = 0; b <= at.size(); ++b) {
    const double lo = b == 0 ? -inf : at[b - 1].u;
    const double hi = b == at.size() ? inf : at[b].u;
    roots.push_back(detail::branch_root(g, lo, hi));
  }
  return roots;
}

/// |{E : alpha < E + F(E) < beta}| as the sum of root gaps w_n - v_n.
inline double level_set_measure(const PointMeasure& m, double alpha, double beta) {
  require(alpha <= beta, "level_set_measure needs alpha <= beta");
  if (alpha == beta) return 0.0;
  const auto v = level_roots(m, alpha);
  const auto w = level_roots(m, beta);
  double total = 0.0;
  for (std::size_t n = 0; n < v.size(); ++n) total += w[n] - v[n];
  return total;
}

/// |{E : F(E) > t}| for t > 0: the union of (r_n, u_n) where r_n solves F = t
/// on the branch ending at atom u_n.
inline double tail_measure(const PointMeasure& m, double t) {
  require(t > 0.0, "tail_measure needs t > 0");
  const auto& at = m.atoms();
  auto g = [&](double e) { return borel_transform_real(m, e) - t; };
  double total = 0.0;
  for (std::size_t n = 0; n < at.size(); ++n) {
    double lo = n == 0 ? -std::numeric_limits<double>::infinity() : at[n - 1].u;
    if (n == 0) {
      // F -> 0+ to the far left, so the bracket is found by expanding leftwards.
      double step = 1.0;
      double x = at[0].u - step;
      while (!(g(x) < 0.0)) {
        step *= 2.0;
        x = at[0].u - step;
        if (!std::isfinite(x)) throw NumericalError("tail bracketing failed");
      }
      lo = x;
    }
    const double r = detail::branch_root(g, lo, at[n].u);
    total += at[n].u - r;
  }
  return total;
}

/// Support of the a.c. density of the Sym corner state at finite volume:
/// |{E : |omega0 - E - F(E)| < 2 gamma}| where F is the Borel transform of the
/// half-line measure at site 1. Equals 4 gamma.
inline double finite_volume_support(const PointMeasure& m, double omega0, double gamma) {
  require(gamma >= 0.0, "gamma must be >= 0");
  return level_set_measure(m, omega0 - 2.0 * gamma, omega0 + 2.0 * gamma);
}

/// Fine-grid indicator integration of {alpha < E + F(E) < beta}; a test oracle.
inline double level_set_measure_grid(const PointMeasure& m, double alpha, double beta, double h) {
  require(h > 0.0, "grid step must be positive");
  const double c = m.total_mass();
  double lo = std::min(alpha, 0.0) - c - 10.0, hi = std::max(beta, 0.0) + c + 10.0;
  for (const auto& a : m.atoms()) {
    lo = std::min(lo, a.u - c - 10.0);
    hi = std::max(hi, a.u + c + 10.0);
  }
  const auto steps = static_cast<long>(std::ceil((hi - lo) / h));
  double acc = 0.0;
  for (long i = 0; i < steps; ++i) {
    const double e = lo + (static_cast<double>(i) + 0.5) * h;
    const double y = e + borel_transform_real(m, e);
    if (alpha < y && y < beta) acc += h;
  }
  return acc;
}

/// CSV "u,p" with a header line; '#' lines are comments.
inline void write_measure_csv(std::ostream& os, const PointMeasure& m) {
  char buf[96];
  os << "u,p\n";
  for (const auto& a : m.atoms()) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", a.u, a.p);
    os << buf;
  }
}

inline PointMeasure read_measure_csv(std::istream& is) {
  std::vector<Atom> atoms;
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      if (line == "u,p") continue;
    }
    std::istringstream ls(line);
    Atom a;
    char comma = 0;
    if (!(ls >> a.u >> comma >> a.p) || comma != ',')
      throw ValidationError("measure CSV line " + std::to_string(lineno) + ": expected 'u,p'");
    atoms.push_back(a);
  }
  return PointMeasure(std::move(atoms));
}

}  // namespace corrlab::boole
