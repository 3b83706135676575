#pragma once

// Vertical sine transform and the fibers of H_Sym.
//
// On the Dirichlet path {0..rows-1} the adjacency is diagonalized by the
// orthonormal sine basis S_k(n2) = sqrt(2/(rows+1)) sin(p_k (n2+1)),
// p_k = pi k/(rows+1). Conjugating H_Sym by it leaves one tridiagonal fiber
//
//   h_p = -Delta + omega(n1) - 2 gamma cos(p) [n1 = 0]
//
// per p_k, and the spectral measure of delta_(0,0) has density
// (1/pi gamma) 1{|Sigma| < 2 gamma} sqrt(1 - Sigma^2/(4 gamma^2)) with
// Sigma = -1/G_And(0,0; E + i0).

#include <cmath>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "corrlab/core.hpp"
#include "corrlab/greens.hpp"
#include "corrlab/linalg.hpp"
#include "corrlab/parallel.hpp"

namespace corrlab {

class SineTransform {
 public:
  explicit SineTransform(int rows) : rows_(rows) {
    require(rows >= 1, "sine transform needs rows >= 1");
    basis_.resize(rows, rows);
    const double norm = std::sqrt(2.0 / (rows + 1.0));
    for (int k = 0; k < rows; ++k)
      for (int n = 0; n < rows; ++n) basis_(k, n) = norm * std::sin(p(k) * (n + 1.0));
  }

  [[nodiscard]] int rows() const { return rows_; }

  /// p_k for 0-based k, i.e. pi (k+1)/(rows+1).
  [[nodiscard]] double p(int k) const { return std::numbers::pi * (k + 1.0) / (rows_ + 1.0); }

  /// basis()(k, n2) = S_k(n2); symmetric and orthogonal, so it is its own inverse.
  [[nodiscard]] const Eigen::MatrixXd& basis() const { return basis_; }

  /// psi(n1, n2) with cols x rows layout -> (F psi)(n1, k).
  [[nodiscard]] Eigen::MatrixXd forward(const Eigen::MatrixXd& psi) const {
    if (psi.cols() != rows_)
      throw ValidationError("sine transform grid mismatch: got " + std::to_string(psi.cols()) + " rows, expected " +
                            std::to_string(rows_));
    return psi * basis_;
  }

  [[nodiscard]] Eigen::MatrixXd inverse(const Eigen::MatrixXd& psi_hat) const { return forward(psi_hat); }

 private:
  int rows_;
  Eigen::MatrixXd basis_;
};

/// Lattice vector (Sym ordering, index n2*cols + n1) viewed as a cols x rows grid.
inline Eigen::MatrixXd as_grid(const Eigen::VectorXd& v, int cols, int rows) {
  require(v.size() == static_cast<Eigen::Index>(cols) * rows, "vector size does not match the grid");
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), cols, rows);
}

inline Eigen::VectorXd as_vector(const Eigen::MatrixXd& g) {
  return Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
}

struct FiberOperator {
  double p = 0.0;
  Eigen::VectorXd diag;  // omega(n1) - 2 gamma cos(p) [n1 = 0]
  Eigen::VectorXd off;   // all -1

  [[nodiscard]] int size() const { return static_cast<int>(diag.size()); }

  [[nodiscard]] Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = diag.asDiagonal();
    for (int i = 0; i + 1 < size(); ++i) m(i, i + 1) = m(i + 1, i) = off(i);
    return m;
  }

  [[nodiscard]] EigenSystem eigensystem(bool want_vectors = true) const {
    return tridiagonal_eigensystem(diag, off, want_vectors);
  }
};

inline FiberOperator fiber(const std::vector<double>& omegas, double gamma, double p, int cols) {
  require(p >= 0.0 && p <= std::numbers::pi, "fiber momentum must lie in [0, pi]");
  require(cols >= 1 && cols <= static_cast<int>(omegas.size()), "fiber needs cols potential values");
  FiberOperator f;
  f.p = p;
  f.diag.resize(cols);
  for (int i = 0; i < cols; ++i) f.diag(i) = omegas[static_cast<std::size_t>(i)];
  f.diag(0) -= 2.0 * gamma * std::cos(p);
  f.off = Eigen::VectorXd::Constant(std::max(cols - 1, 0), -1.0);
  return f;
}

/// Eigenpairs of every fiber of the cols x rows Sym box.
struct SymFibers {
  SineTransform transform;
  std::vector<EigenSystem> blocks;  // one per p_k
  int cols = 0;

  [[nodiscard]] int rows() const { return transform.rows(); }
};

inline SymFibers sym_fibers(const std::vector<double>& omegas, double gamma, int cols, int rows) {
  SymFibers sf{SineTransform(rows), {}, cols};
  sf.blocks.reserve(static_cast<std::size_t>(rows));
  for (int k = 0; k < rows; ++k) sf.blocks.push_back(fiber(omegas, gamma, sf.transform.p(k), cols).eigensystem());
  return sf;
}

/// Full eigensystem of H_Sym in lattice ordering: phi_(k,j)(n1, n2) = S_k(n2) phi^k_j(n1),
/// listed block by block (k outer, j inner).
inline EigenSystem sym_eigensystem(const SymFibers& sf) {
  const int cols = sf.cols, rows = sf.rows();
  const int n = cols * rows;
  EigenSystem es;
  es.values.resize(n);
  es.vectors.resize(n, n);
  const auto& s = sf.transform.basis();
  for (int k = 0; k < rows; ++k) {
    const auto& b = sf.blocks[static_cast<std::size_t>(k)];
    for (int j = 0; j < cols; ++j) {
      const int c = k * cols + j;
      es.values(c) = b.values(j);
      for (int n2 = 0; n2 < rows; ++n2) es.vectors.col(c).segment(n2 * cols, cols) = s(k, n2) * b.vectors.col(j);
    }
  }
  return es;
}

/// Sigma(E + i eta) = -1/G_And(0, 0; E + i eta) on the chain 0..L.
inline std::vector<cplx> sigma_scan(const std::vector<double>& omegas, const std::vector<double>& grid, double eta,
                                    int L = -1) {
  require(eta > 0.0, "sigma_scan needs eta > 0");
  std::vector<cplx> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out[i] = halfline_cf(omegas, {grid[i], eta}, L).sigma;
  return out;
}

/// Real boundary value of Sigma by Richardson extrapolation 2 Sigma(eta/2) - Sigma(eta).
inline double sigma_boundary(const std::vector<double>& omegas, double e, double eta, int L = -1) {
  require(eta > 0.0, "sigma_boundary needs eta > 0");
  const cplx s1 = halfline_cf(omegas, {e, eta}, L).sigma;
  const cplx s2 = halfline_cf(omegas, {e, 0.5 * eta}, L).sigma;
  return (2.0 * s2 - s1).real();
}

inline std::vector<double> energy_grid(double lo, double hi, double h) {
  require(hi > lo && h > 0.0, "energy grid needs lo < hi and h > 0");
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / h)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = i + 1 == n ? hi : lo + static_cast<double>(i) * h;
  return g;
}

/// Grid enclosing the spectrum of H_Sym, [-2 - 2 gamma, 2 + omega_max + 2 gamma], with a small margin.
inline std::vector<double> sym_spectrum_grid(double omega_max, double gamma, double h) {
  return energy_grid(-2.0 - 2.0 * gamma - 0.05, 2.0 + omega_max + 2.0 * gamma + 0.05, h);
}

/// Trapezoid weights of a nonuniform grid.
inline std::vector<double> trapezoid_weights(const std::vector<double>& grid) {
  std::vector<double> w(grid.size(), 0.0);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double h = grid[i + 1] - grid[i];
    w[i] += 0.5 * h;
    w[i + 1] += 0.5 * h;
  }
  return w;
}

struct SpectralDensity {
  std::vector<double> grid;
  std::vector<double> density;
  std::vector<double> sigma;  // boundary value of Sigma used at each grid point
  double eta = 0.0;
  double gamma = 0.0;

  [[nodiscard]] double mass() const {
    const auto w = trapezoid_weights(grid);
    double m = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) m += w[i] * density[i];
    return m;
  }

  /// Trapezoid mass restricted to E > e0.
  [[nodiscard]] double mass_above(double e0) const {
    double m = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      if (grid[i] <= e0) continue;
      m += 0.5 * (grid[i + 1] - grid[i]) * (density[i] + density[i + 1]);
    }
    return m;
  }

  /// Grid estimate of |{E : |Sigma(E)| < 2 gamma}|.
  [[nodiscard]] double support_measure() const {
    const auto w = trapezoid_weights(grid);
    double m = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (std::abs(sigma[i]) < 2.0 * gamma) m += w[i];
    return m;
  }
};

inline double density_from_sigma(double sigma, double gamma) {
  if (!(std::abs(sigma) < 2.0 * gamma)) return 0.0;
  const double r = sigma / (2.0 * gamma);
  return std::sqrt(std::max(0.0, 1.0 - r * r)) / (std::numbers::pi * gamma);
}

inline SpectralDensity spectral_density(const std::vector<double>& omegas, double gamma,
                                        const std::vector<double>& grid, double eta, int L = -1, int threads = 1) {
  require(gamma > 0.0, "gamma must be positive");
  require(eta > 0.0, "spectral_density needs eta > 0");
  require(std::is_sorted(grid.begin(), grid.end()), "energy grid must be increasing");
  SpectralDensity sd;
  sd.grid = grid;
  sd.eta = eta;
  sd.gamma = gamma;
  sd.sigma.resize(grid.size());
  sd.density.resize(grid.size());
  const int chunks = 64;
  const std::size_t n = grid.size();
  parallel_for(chunks, threads, [&](int c) {
    const std::size_t lo = n * static_cast<std::size_t>(c) / chunks;
    const std::size_t hi = n * static_cast<std::size_t>(c + 1) / chunks;
    for (std::size_t i = lo; i < hi; ++i) {
      sd.sigma[i] = sigma_boundary(omegas, grid[i], eta, L);
      sd.density[i] = density_from_sigma(sd.sigma[i], gamma);
    }
  });
  return sd;
}

enum class SpectralLabel { Recurrent, Transient, Outside };

inline std::string to_string(SpectralLabel l) {
  switch (l) {
    case SpectralLabel::Recurrent: return "recurrent";
    case SpectralLabel::Transient: return "transient";
    case SpectralLabel::Outside: return "outside";
  }
  return "?";
}

/// Density level below which a grid value counts as numerical dust:
/// ten times the mass defect spread over the grid span.
inline double density_threshold(const SpectralDensity& sd) {
  const double span = sd.grid.back() - sd.grid.front();
  return std::max(1e-12, 10.0 * std::abs(1.0 - sd.mass()) / span);
}

/// [-2, 2 + omega_max) is recurrent; elsewhere spectrum (density above the
/// threshold) is transient and the rest is outside.
inline SpectralLabel classify(double e, double omega_max, double density, double threshold) {
  if (e >= -2.0 && e < 2.0 + omega_max) return SpectralLabel::Recurrent;
  return density > threshold ? SpectralLabel::Transient : SpectralLabel::Outside;
}

inline std::vector<SpectralLabel> classify(const SpectralDensity& sd, double omega_max) {
  const double thr = density_threshold(sd);
  std::vector<SpectralLabel> out(sd.grid.size());
  for (std::size_t i = 0; i < sd.grid.size(); ++i) out[i] = classify(sd.grid[i], omega_max, sd.density[i], thr);
  return out;
}

struct CriticalGamma {
  double gamma = 0.0;       // |Sigma(E_c)| / 2
  double sigma_edge = 0.0;  // Sigma(E_c), E_c = 2 + omega_max
  bool below_floor = false; // |Sigma(E_c)| too small to trust
};

inline CriticalGamma critical_gamma(const std::vector<double>& omegas, double omega_max, double eta, int L = -1) {
  constexpr double floor = 1e-12;
  CriticalGamma c;
  c.sigma_edge = sigma_boundary(omegas, 2.0 + omega_max, eta, L);
  c.gamma = 0.5 * std::abs(c.sigma_edge);
  c.below_floor = std::abs(c.sigma_edge) < floor;
  return c;
}

/// CSV "E,density,label".
inline void write_density_csv(std::ostream& os, const SpectralDensity& sd, double omega_max) {
  const auto labels = classify(sd, omega_max);
  char buf[96];
  os << "E,density,label\n";
  for (std::size_t i = 0; i < sd.grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,", sd.grid[i], sd.density[i]);
    os << buf << to_string(labels[i]) << '\n';
  }
}

}  // namespace corrlab
