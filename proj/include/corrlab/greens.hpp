#pragma once

// Green's functions G(u, v; z) = <delta_u, (H - z)^{-1} delta_v>, three ways:
// a sparse solve on the finite box, the backward continued fraction of the
// half-line Anderson chain, and the closed-form corner value of H_Sym.

#include <cmath>
#include <complex>
#include <queue>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "corrlab/boole.hpp"
#include "corrlab/core.hpp"
#include "corrlab/disorder.hpp"
#include "corrlab/lattice.hpp"
#include "corrlab/linalg.hpp"

namespace corrlab {

inline void require_upper_half_plane(cplx z) {
  if (!(z.imag() > 0.0)) throw ValidationError("spectral parameter needs Im z > 0");
}

/// G(., v; z) on the whole box.
inline Eigen::VectorXcd resolvent_column(const Hamiltonian& h, Vertex v, cplx z) {
  require_upper_half_plane(z);
  ResolventSolver solver(h.matrix());
  return solver.column(h.lattice().index_of(v), z);
}

inline cplx greens_entry(const Hamiltonian& h, Vertex u, Vertex v, cplx z) {
  const int iu = h.lattice().index_of(u);
  return resolvent_column(h, v, z)(iu);
}

/// Green's function data of the half-line chain on sites 0..L with potential
/// omegas[0..L] and unit hopping.
struct HalflineGreens {
  cplx g00;      // G(0, 0; z)
  cplx g11plus;  // G+(1, 1; z) of the chain 1..L (0 when L = 0)
  cplx sigma;    // -1 / g00
};

/// Backward continued fraction g_L = 1/(w_L - z), g_j = 1/(w_j - z - g_{j+1}).
/// L defaults to omegas.size() - 1.
inline HalflineGreens halfline_cf(const std::vector<double>& omegas, cplx z, int L = -1) {
  require_upper_half_plane(z);
  if (L < 0) L = static_cast<int>(omegas.size()) - 1;
  require(L >= 0 && L < static_cast<int>(omegas.size()),
          "half-line length " + std::to_string(L) + " needs " + std::to_string(L + 1) + " potential values");
  cplx g = 1.0 / (omegas[static_cast<std::size_t>(L)] - z);
  cplx g1 = 0.0;
  for (int j = L - 1; j >= 0; --j) {
    g1 = g;
    g = 1.0 / (omegas[static_cast<std::size_t>(j)] - z - g1);
  }
  return {g, g1, -1.0 / g};
}

/// Both roots of gamma^2 G^2 - a G + 1 = 0 evaluated without cancellation.
inline std::pair<cplx, cplx> corner_roots(cplx a, double gamma) {
  const double g2 = gamma * gamma;
  cplx s = std::sqrt(a * a - 4.0 * g2);
  if (std::abs(a - s) > std::abs(a + s)) s = -s;
  const cplx big = (a + s) / (2.0 * g2);
  const cplx small = 2.0 / (a + s);
  return {small, big};
}

/// a = omega_0 - z - G+_And(1, 1; z), the coefficient of the corner quadratic.
inline cplx corner_coefficient(const std::vector<double>& omegas, cplx z, int L = -1) {
  const auto hl = halfline_cf(omegas, z, L);
  return omegas[0] - z - hl.g11plus;
}

/// G_Sym((0,0), (0,0); z) for the box with columns 0..L and an infinite spine:
/// the root of gamma^2 G^2 - a G + 1 = 0 with Im G > 0.
inline cplx sym_corner_formula(const std::vector<double>& omegas, double gamma, cplx z, int L = -1) {
  require_upper_half_plane(z);
  require(gamma > 0.0, "gamma must be positive");
  const cplx a = corner_coefficient(omegas, z, L);
  const auto [r1, r2] = corner_roots(a, gamma);
  const bool ok1 = r1.imag() > 0.0, ok2 = r2.imag() > 0.0;
  if (ok1 == ok2) throw NumericalError("corner quadratic has no unique root in the upper half-plane");
  return ok1 ? r1 : r2;
}

inline double corner_quadratic_residual(cplx g, cplx a, double gamma) {
  return std::abs(gamma * gamma * g * g - a * g + 1.0);
}

/// Measure of the chain 1..L at site 1: atoms at its eigenvalues with weights
/// |phi_k(1)|^2. Its Borel transform is G+_And(1, 1; z).
inline boole::PointMeasure halfline_site1_measure(const std::vector<double>& omegas, int L = -1) {
  if (L < 0) L = static_cast<int>(omegas.size()) - 1;
  require(L >= 1 && L < static_cast<int>(omegas.size()), "site-1 measure needs L >= 1");
  Eigen::VectorXd d(L), e(L - 1);
  for (int j = 0; j < L; ++j) d(j) = omegas[static_cast<std::size_t>(j + 1)];
  e.setConstant(-1.0);
  const auto es = tridiagonal_eigensystem(d, e, true);
  std::vector<boole::Atom> atoms;
  atoms.reserve(static_cast<std::size_t>(L));
  for (int k = 0; k < L; ++k) {
    const double p = es.vectors(0, k) * es.vectors(0, k);
    if (p > 0.0) atoms.push_back({es.values(k), p});
  }
  return boole::PointMeasure(std::move(atoms));
}

/// Vertices reachable from `start` in the graph of `m` with the edge {a, b} deleted.
inline std::vector<char> component_without_edge(const SparseReal& m, int start, int a, int b) {
  std::vector<char> seen(static_cast<std::size_t>(m.rows()), 0);
  std::queue<int> todo;
  todo.push(start);
  seen[static_cast<std::size_t>(start)] = 1;
  while (!todo.empty()) {
    const int x = todo.front();
    todo.pop();
    for (SparseReal::InnerIterator it(m, x); it; ++it) {
      const int y = static_cast<int>(it.col());
      if (y == x || it.value() == 0.0) continue;
      if ((x == a && y == b) || (x == b && y == a)) continue;
      if (!seen[static_cast<std::size_t>(y)]) {
        seen[static_cast<std::size_t>(y)] = 1;
        todo.push(y);
      }
    }
  }
  return seen;
}

struct FeenbergTerms {
  cplx full;         // G(u, v; z)
  cplx left;         // G(u, e-; z)
  cplx right;        // G+(e+, v; z) on v's side of the cut
  double weight;     // edge weight w_e
  double residual;   // |full - weight * left * right|
};

/// Index-level factorization check on a symmetric matrix h = -A + V. The
/// edge {e_minus, e_plus} must be a bridge with u on the e_minus side and v
/// on the e_plus side.
inline FeenbergTerms feenberg_terms(const SparseReal& h, int e_minus, int e_plus, int u, int v, cplx z) {
  require_upper_half_plane(z);
  const double w = -h.coeff(e_minus, e_plus);
  if (w == 0.0) throw ValidationError("cut edge is not an edge of the graph");
  const auto side = component_without_edge(h, e_plus, e_minus, e_plus);
  if (side[static_cast<std::size_t>(e_minus)]) throw ValidationError("cut edge is not a bridge");
  if (!side[static_cast<std::size_t>(v)]) throw ValidationError("v is not on the far side of the cut");
  if (side[static_cast<std::size_t>(u)]) throw ValidationError("u is not on the near side of the cut");

  std::vector<int> local(static_cast<std::size_t>(h.rows()), -1);
  int count = 0;
  for (int i = 0; i < h.rows(); ++i)
    if (side[static_cast<std::size_t>(i)]) local[static_cast<std::size_t>(i)] = count++;
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < h.rows(); ++i) {
    if (local[static_cast<std::size_t>(i)] < 0) continue;
    for (SparseReal::InnerIterator it(h, i); it; ++it) {
      const int j = static_cast<int>(it.col());
      if (local[static_cast<std::size_t>(j)] >= 0)
        trips.emplace_back(local[static_cast<std::size_t>(i)], local[static_cast<std::size_t>(j)], it.value());
    }
  }
  SparseReal sub(count, count);
  sub.setFromTriplets(trips.begin(), trips.end());
  sub.makeCompressed();

  ResolventSolver whole(h);
  whole.set_z(z);
  const Eigen::VectorXcd col_v = whole.column(v);
  const Eigen::VectorXcd col_e = whole.column(e_minus);
  ResolventSolver part(sub);
  const Eigen::VectorXcd col_plus = part.column(local[static_cast<std::size_t>(v)], z);

  FeenbergTerms t;
  t.full = col_v(u);
  t.left = col_e(u);
  t.right = col_plus(local[static_cast<std::size_t>(e_plus)]);
  t.weight = w;
  t.residual = std::abs(t.full - w * t.left * t.right);
  return t;
}

/// |G(u, v) - w_e G(u, e-) G+(e+, v)| for the cut edge (e_minus, e_plus).
inline double feenberg_check(const Hamiltonian& h, Vertex e_minus, Vertex e_plus, Vertex u, Vertex v, cplx z) {
  const auto& lat = h.lattice();
  return feenberg_terms(h.matrix(), lat.index_of(e_minus), lat.index_of(e_plus), lat.index_of(u), lat.index_of(v), z)
      .residual;
}

}  // namespace corrlab
