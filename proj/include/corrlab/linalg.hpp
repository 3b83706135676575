#pragma once

// Shared numerical kernels: dense symmetric eigensolver (LAPACK MRRR),
// symmetric tridiagonal eigensolver, shifted sparse resolvent solvers (general
// LU and an O(n) tree elimination).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <lapacke.h>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "corrlab/core.hpp"
#include "corrlab/lattice.hpp"

namespace corrlab {

/// Eigenpairs H phi_k = E_k phi_k with phi_k stored as columns of `vectors`.
/// `vectors` may hold only a subset of columns (see prune_by_overlap); `values`
/// always matches the column count.
struct EigenSystem {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;

  [[nodiscard]] int dim() const { return static_cast<int>(vectors.rows()); }
  [[nodiscard]] int count() const { return static_cast<int>(values.size()); }
};

inline EigenSystem dense_eigensystem(Eigen::MatrixXd a, bool want_vectors = true) {
  const auto n = static_cast<lapack_int>(a.rows());
  require(a.rows() == a.cols(), "eigensystem needs a square matrix");
  EigenSystem es;
  es.values.resize(n);
  if (n == 0) return es;
  if (want_vectors) es.vectors.resize(n, n);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(n));
  lapack_int found = 0;
  const lapack_int info =
      LAPACKE_dsyevr(LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', 'A', 'U', n, a.data(), n, 0.0, 0.0, 0, 0, 0.0,
                     &found, es.values.data(), want_vectors ? es.vectors.data() : nullptr, n, isuppz.data());
  if (info != 0 || found != n)
    throw NumericalError("dsyevr failed (info=" + std::to_string(info) + ", found=" + std::to_string(found) + ")");
  return es;
}

inline Eigen::VectorXd dense_eigenvalues(Eigen::MatrixXd a) { return dense_eigensystem(std::move(a), false).values; }

/// Symmetric tridiagonal matrix: diag(d) with off-diagonal e (size n-1).
inline EigenSystem tridiagonal_eigensystem(const Eigen::VectorXd& d, const Eigen::VectorXd& e,
                                           bool want_vectors = true) {
  require(e.size() + 1 == d.size() || (d.size() == 0 && e.size() == 0), "tridiagonal size mismatch");
  EigenSystem es;
  if (d.size() == 1) {
    es.values = d;
    if (want_vectors) es.vectors = Eigen::MatrixXd::Ones(1, 1);
    return es;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(d, e, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("tridiagonal eigensolver did not converge");
  es.values = solver.eigenvalues();
  if (want_vectors) es.vectors = solver.eigenvectors();
  return es;
}

/// Keeps the eigenvectors whose overlap with `site` matters: columns are
/// dropped smallest-first while the discarded weight sum_k phi_k(site)^2 stays
/// below `dropped_weight`. The evolved state of delta_site then changes by at
/// most sqrt(dropped_weight) in norm. Column order of the survivors is kept.
inline EigenSystem prune_by_overlap(const EigenSystem& full, int site, double dropped_weight) {
  const int k = full.count();
  std::vector<int> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  auto w = [&](int c) { return full.vectors(site, c) * full.vectors(site, c); };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w(a) < w(b); });
  std::vector<char> keep(static_cast<std::size_t>(k), 1);
  double acc = 0.0;
  for (int c : order) {
    if (acc + w(c) > dropped_weight) break;
    acc += w(c);
    keep[static_cast<std::size_t>(c)] = 0;
  }
  const int kept = static_cast<int>(std::count(keep.begin(), keep.end(), 1));
  EigenSystem out;
  out.values.resize(kept);
  out.vectors.resize(full.dim(), kept);
  int j = 0;
  for (int c = 0; c < k; ++c) {
    if (!keep[static_cast<std::size_t>(c)]) continue;
    out.values(j) = full.values(c);
    out.vectors.col(j) = full.vectors.col(c);
    ++j;
  }
  return out;
}

using SparseComplex = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;

/// Factorizes (H - z) for a fixed sparsity pattern and solves against unit
/// sources. The symbolic analysis is done once; each new z refactorizes.
class ResolventSolver {
 public:
  // Resolvents are not evaluated closer than this to the real axis.
  static constexpr double kEtaFloor = 1e-6;

  template <typename SparseIn>
  explicit ResolventSolver(const SparseIn& h) {
    base_ = h.template cast<cplx>();
    base_.makeCompressed();
    shifted_ = base_;
    lu_.analyzePattern(shifted_);
  }

  void set_z(cplx z) {
    if (!(z.imag() > 0.0)) throw ValidationError("resolvent needs Im z > 0");
    if (z.imag() < kEtaFloor) throw ValidationError("Im z below the eta floor 1e-6");
    if (has_z_ && z == z_) return;
    shifted_ = base_;
    for (int i = 0; i < shifted_.rows(); ++i) shifted_.coeffRef(i, i) -= z;
    lu_.factorize(shifted_);
    if (lu_.info() != Eigen::Success) throw NumericalError("sparse LU factorization failed: " + lu_.lastErrorMessage());
    z_ = z;
    has_z_ = true;
  }

  /// Column v of (H - z)^{-1}, i.e. G(., v; z).
  Eigen::VectorXcd column(int v) {
    if (!has_z_) throw ValidationError("set_z must be called before column");
    Eigen::VectorXcd b = Eigen::VectorXcd::Zero(shifted_.rows());
    b(v) = 1.0;
    Eigen::VectorXcd x = lu_.solve(b);
    const double res = (shifted_ * x - b).norm();
    if (!(res <= 1e-8 * std::max(1.0, x.norm())))
      throw NumericalError("resolvent solve residual " + std::to_string(res) + " exceeds tolerance");
    return x;
  }

  Eigen::VectorXcd column(int v, cplx z) {
    set_z(z);
    return column(v);
  }

 private:
  SparseComplex base_;
  SparseComplex shifted_;
  Eigen::SparseLU<SparseComplex, Eigen::COLAMDOrdering<int>> lu_;
  cplx z_{};
  bool has_z_ = false;
};

/// Resolvent columns of a matrix whose off-diagonal pattern is a tree, by
/// eliminating leaves towards the source vertex. O(n) per z, no fill-in.
class TreeResolvent {
 public:
  explicit TreeResolvent(const SparseReal& h) {
    require(is_tree(h), "matrix graph is not a tree");
    const auto n = static_cast<std::size_t>(h.rows());
    diag_.assign(n, 0.0);
    nbr_.resize(n);
    for (int i = 0; i < h.rows(); ++i)
      for (SparseReal::InnerIterator it(h, i); it; ++it) {
        if (it.col() == i)
          diag_[n_t(i)] += it.value();
        else if (it.value() != 0.0)
          nbr_[n_t(i)].push_back({static_cast<int>(it.col()), it.value()});
      }
  }

  /// Connected, symmetric pattern with exactly n - 1 undirected edges.
  static bool is_tree(const SparseReal& h) {
    const int n = static_cast<int>(h.rows());
    if (n == 0 || h.rows() != h.cols()) return false;
    long edges = 0;
    for (int i = 0; i < n; ++i)
      for (SparseReal::InnerIterator it(h, i); it; ++it)
        if (it.col() != i && it.value() != 0.0) ++edges;
    if (edges != 2L * (n - 1)) return false;
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (SparseReal::InnerIterator it(h, i); it; ++it) {
        const auto j = static_cast<int>(it.col());
        if (j == i || it.value() == 0.0 || seen[n_t(j)]) continue;
        seen[n_t(j)] = 1;
        ++count;
        stack.push_back(j);
      }
    }
    return count == n;
  }

  /// G(., v; z).
  Eigen::VectorXcd column(int v, cplx z) {
    if (!(z.imag() > 0.0)) throw ValidationError("resolvent needs Im z > 0");
    if (z.imag() < ResolventSolver::kEtaFloor) throw ValidationError("Im z below the eta floor 1e-6");
    require(v >= 0 && v < static_cast<int>(diag_.size()), "resolvent source outside the matrix");
    if (v != root_) root_at(v);
    // Everything below runs in BFS positions with real arithmetic; std::complex
    // division goes through a slow library call.
    const std::size_t n = diag_.size();
    const double zr = z.real(), zi = z.imag();
    dr_.resize(n);
    di_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      dr_[k] = bdiag_[k] - zr;
      di_[k] = -zi;
    }
    for (std::size_t k = n; k-- > 0;) {
      const double m = dr_[k] * dr_[k] + di_[k] * di_[k];
      if (!(m > 0.0)) throw NumericalError("zero pivot in tree elimination");
      const double im = 1.0 / m;
      dr_[k] *= im;  // now 1/d
      di_[k] *= -im;
      if (k == 0) break;
      const double u2 = bup_[k] * bup_[k];
      dr_[n_t(bpar_[k])] -= u2 * dr_[k];
      di_[n_t(bpar_[k])] -= u2 * di_[k];
    }
    xr_.resize(n);
    xi_.resize(n);
    xr_[0] = dr_[0];
    xi_[0] = di_[0];
    for (std::size_t k = 1; k < n; ++k) {
      const double pr = -bup_[k] * xr_[n_t(bpar_[k])], pi = -bup_[k] * xi_[n_t(bpar_[k])];
      xr_[k] = pr * dr_[k] - pi * di_[k];
      xi_[k] = pr * di_[k] + pi * dr_[k];
    }
    // residual of (H - z) x = e_v
    rr_.resize(n);
    ri_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double a = bdiag_[k] - zr;
      rr_[k] = a * xr_[k] + zi * xi_[k];
      ri_[k] = a * xi_[k] - zi * xr_[k];
    }
    rr_[0] -= 1.0;
    for (std::size_t k = 1; k < n; ++k) {
      const auto p = n_t(bpar_[k]);
      rr_[k] += bup_[k] * xr_[p];
      ri_[k] += bup_[k] * xi_[p];
      rr_[p] += bup_[k] * xr_[k];
      ri_[p] += bup_[k] * xi_[k];
    }
    double res = 0.0, xn = 0.0;
    Eigen::VectorXcd x(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      res += rr_[k] * rr_[k] + ri_[k] * ri_[k];
      xn += xr_[k] * xr_[k] + xi_[k] * xi_[k];
      x(order_[k]) = cplx(xr_[k], xi_[k]);
    }
    if (!(std::sqrt(res) <= 1e-8 * std::max(1.0, std::sqrt(xn))))
      throw NumericalError("tree resolvent residual " + std::to_string(std::sqrt(res)) + " exceeds tolerance");
    return x;
  }

 private:
  static std::size_t n_t(long i) { return static_cast<std::size_t>(i); }

  void root_at(int v) {
    const std::size_t n = diag_.size();
    order_.assign(1, v);
    bpar_.assign(1, -1);
    bup_.assign(1, 0.0);
    std::vector<int> pos(n, -1);
    pos[n_t(v)] = 0;
    for (std::size_t k = 0; k < order_.size(); ++k) {
      const int i = order_[k];
      for (const auto& [j, w] : nbr_[n_t(i)]) {
        if (pos[n_t(j)] >= 0) continue;
        pos[n_t(j)] = static_cast<int>(order_.size());
        order_.push_back(j);
        bpar_.push_back(static_cast<int>(k));
        bup_.push_back(w);
      }
    }
    bdiag_.resize(n);
    for (std::size_t k = 0; k < n; ++k) bdiag_[k] = diag_[n_t(order_[k])];
    root_ = v;
  }

  std::vector<double> diag_;
  std::vector<std::vector<std::pair<int, double>>> nbr_;
  int root_ = -1;
  // BFS from root_: vertex, parent position, H(vertex, parent), diagonal
  std::vector<int> order_;
  std::vector<int> bpar_;
  std::vector<double> bup_;
  std::vector<double> bdiag_;
  std::vector<double> dr_, di_, xr_, xi_, rr_, ri_;
};

/// Ordinary least squares y = slope * x + intercept with r^2.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "line fit needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return f;
}

}  // namespace corrlab
