#pragma once

// Time evolution and time-averaged moments
//
//   M^q_T = (2/T) int_0^inf e^{-2t/T} <0| e^{itH} |X|^q e^{-itH} |0> dt,   |n| = n1 + n2,
//
// by two routes. In the eigenbasis the t-integral is exact:
//   M^q_T = sum_{k,l} c_k c_l B_kl / (1 + (T (E_k - E_l)/2)^2),
// with c_k = phi_k(0) and B = Phi^T |X|^q Phi. Through the resolvent,
//   M^q_T = (1/(pi T)) sum_n |n|^q int |G(n, 0; E + i/T)|^2 dE.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "corrlab/core.hpp"
#include "corrlab/disorder.hpp"
#include "corrlab/floquet.hpp"
#include "corrlab/greens.hpp"
#include "corrlab/lattice.hpp"
#include "corrlab/linalg.hpp"

namespace corrlab {

// Dropped origin weight when pruning eigenvectors for time averages.
inline constexpr double kPruneWeight = 1e-14;

inline EigenSystem eigensystem(const Hamiltonian& h) { return dense_eigensystem(h.dense(), true); }

/// psi_t = exp(-i t H) psi_0.
inline Eigen::VectorXcd evolve(const EigenSystem& es, const Eigen::VectorXcd& psi0, double t) {
  require(psi0.size() == es.dim(), "initial state has the wrong dimension");
  const Eigen::VectorXcd coeff = es.vectors.transpose().cast<cplx>() * psi0;
  Eigen::VectorXcd phased(coeff.size());
  for (Eigen::Index k = 0; k < coeff.size(); ++k) phased(k) = std::polar(1.0, -t * es.values(k)) * coeff(k);
  return es.vectors.cast<cplx>() * phased;
}

inline Eigen::VectorXcd evolve(const Hamiltonian& h, const Eigen::VectorXcd& psi0, double t) {
  return evolve(eigensystem(h), psi0, t);
}

/// |n|^q per vertex (0^0 = 1).
inline Eigen::VectorXd position_weights(const LatticeOperator& lat, double q) {
  require(q >= 0.0, "moment order q must be >= 0");
  Eigen::VectorXd w(lat.size());
  for (int i = 0; i < lat.size(); ++i) w(i) = std::pow(static_cast<double>(lat.vertex_at(i).norm1()), q);
  return w;
}

/// Indicator of the layer within `width` sites of the far edges n1 = cols-1, n2 = rows-1.
inline Eigen::VectorXd boundary_layer_weights(const LatticeOperator& lat, int width = 5) {
  Eigen::VectorXd w(lat.size());
  const auto& s = lat.spec();
  for (int i = 0; i < lat.size(); ++i) {
    const Vertex v = lat.vertex_at(i);
    w(i) = (v.n1 >= s.cols - width || v.n2 >= s.rows - width) ? 1.0 : 0.0;
  }
  return w;
}

inline double lorentz_kernel(double gap, double t) {
  const double x = 0.5 * t * gap;
  return 1.0 / (1.0 + x * x);
}

namespace detail {

// sum_{k,l} B_kl K(E_k - E_l, T), B symmetric.
inline double kernel_contract(const Eigen::MatrixXd& b, const Eigen::VectorXd& ek, const Eigen::VectorXd& el,
                              double t) {
  double acc = 0.0;
  for (Eigen::Index l = 0; l < b.cols(); ++l) {
    double col = 0.0;
    for (Eigen::Index k = 0; k < b.rows(); ++k) col += b(k, l) * lorentz_kernel(ek(k) - el(l), t);
    acc += col;
  }
  return acc;
}

// int_{|x|>R} dx / (x^2 + eta^2) and int_{|x|>R} dx / (x^2 + eta^2)^2.
inline std::array<double, 2> lorentz_tails(double r, double eta) {
  const double u = eta / r;
  const double u2 = u * u;
  // atan(u) - u/(1+u^2), series below 1e-2 to avoid cancellation
  const double d = u < 1e-2 ? u * u2 * (2.0 / 3.0 - u2 * (4.0 / 5.0 - u2 * 6.0 / 7.0)) : std::atan(u) - u / (1.0 + u2);
  return {2.0 * std::atan(u) / eta, d / (eta * eta * eta)};
}

}  // namespace detail

/// Time averages (2/T) int e^{-2t/T} <psi_t, W psi_t> dt of psi_0 = delta_origin
/// for several diagonal observables W. Result(w, t) for weights[w], Ts[t].
inline Eigen::MatrixXd time_averages(const EigenSystem& es, int origin, const std::vector<Eigen::VectorXd>& weights,
                                     const std::vector<double>& Ts, double prune_weight = kPruneWeight) {
  require(origin >= 0 && origin < es.dim(), "origin index out of range");
  for (double t : Ts) require(t > 0.0, "averaging times must be positive");
  const EigenSystem kept = prune_by_overlap(es, origin, prune_weight);
  const Eigen::VectorXd c = kept.vectors.row(origin).transpose();
  const Eigen::MatrixXd a = kept.vectors * c.asDiagonal();
  Eigen::MatrixXd out(weights.size(), Ts.size());
  for (std::size_t w = 0; w < weights.size(); ++w) {
    require(weights[w].size() == es.dim(), "weight vector has the wrong dimension");
    const Eigen::MatrixXd b = a.transpose() * (weights[w].asDiagonal() * a);
    for (std::size_t t = 0; t < Ts.size(); ++t)
      out(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(t)) =
          detail::kernel_contract(b, kept.values, kept.values, Ts[t]);
  }
  return out;
}

/// Same as time_averages for H_Sym, using the fiber eigenpairs. Weights are in
/// Sym lattice ordering (n2 * cols + n1). Cost rows^2 cols^3 instead of (cols rows)^3.
inline Eigen::MatrixXd sym_time_averages(const SymFibers& sf, Vertex origin,
                                         const std::vector<Eigen::VectorXd>& weights, const std::vector<double>& Ts,
                                         double prune_weight = kPruneWeight) {
  const int cols = sf.cols, rows = sf.rows();
  require(origin.n1 >= 0 && origin.n1 < cols && origin.n2 >= 0 && origin.n2 < rows, "origin outside the box");
  for (double t : Ts) require(t > 0.0, "averaging times must be positive");
  const auto& s = sf.transform.basis();

  // global pruning by c^2, smallest first
  struct Entry {
    double w;
    int k, j;
  };
  std::vector<Entry> all;
  all.reserve(static_cast<std::size_t>(cols) * rows);
  for (int k = 0; k < rows; ++k)
    for (int j = 0; j < cols; ++j) {
      const double c = s(k, origin.n2) * sf.blocks[static_cast<std::size_t>(k)].vectors(origin.n1, j);
      all.push_back({c * c, k, j});
    }
  std::vector<std::vector<char>> keep(static_cast<std::size_t>(rows), std::vector<char>(static_cast<std::size_t>(cols), 1));
  {
    auto order = all;
    std::stable_sort(order.begin(), order.end(), [](const Entry& x, const Entry& y) { return x.w < y.w; });
    double acc = 0.0;
    for (const auto& e : order) {
      if (acc + e.w > prune_weight) break;
      acc += e.w;
      keep[static_cast<std::size_t>(e.k)][static_cast<std::size_t>(e.j)] = 0;
    }
  }

  // per block: A_k = phi^k[:, kept] * c, energies
  std::vector<Eigen::MatrixXd> a(static_cast<std::size_t>(rows));
  std::vector<Eigen::VectorXd> en(static_cast<std::size_t>(rows));
  for (int k = 0; k < rows; ++k) {
    const auto& b = sf.blocks[static_cast<std::size_t>(k)];
    const auto& kk = keep[static_cast<std::size_t>(k)];
    const int m = static_cast<int>(std::count(kk.begin(), kk.end(), 1));
    auto& ak = a[static_cast<std::size_t>(k)];
    auto& ek = en[static_cast<std::size_t>(k)];
    ak.resize(cols, m);
    ek.resize(m);
    int c = 0;
    for (int j = 0; j < cols; ++j) {
      if (!kk[static_cast<std::size_t>(j)]) continue;
      ak.col(c) = b.vectors.col(j) * (s(k, origin.n2) * b.vectors(origin.n1, j));
      ek(c) = b.values(j);
      ++c;
    }
  }

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(weights.size()), static_cast<Eigen::Index>(Ts.size()));
  for (std::size_t w = 0; w < weights.size(); ++w) {
    require(weights[w].size() == static_cast<Eigen::Index>(cols) * rows, "weight vector has the wrong dimension");
    const Eigen::MatrixXd grid = as_grid(weights[w], cols, rows);  // grid(n1, n2)
    // wk[n1] = S diag(W(n1, .)) S^T, rows x rows
    std::vector<Eigen::MatrixXd> wk(static_cast<std::size_t>(cols));
    for (int n1 = 0; n1 < cols; ++n1)
      wk[static_cast<std::size_t>(n1)] = s * grid.row(n1).transpose().asDiagonal() * s.transpose();
    Eigen::VectorXd pair_w(cols);
    for (int k = 0; k < rows; ++k) {
      const auto& ak = a[static_cast<std::size_t>(k)];
      if (ak.cols() == 0) continue;
      for (int k2 = k; k2 < rows; ++k2) {
        const auto& ak2 = a[static_cast<std::size_t>(k2)];
        if (ak2.cols() == 0) continue;
        for (int n1 = 0; n1 < cols; ++n1) pair_w(n1) = wk[static_cast<std::size_t>(n1)](k, k2);
        const Eigen::MatrixXd b = ak.transpose() * (pair_w.asDiagonal() * ak2);
        const double mult = k == k2 ? 1.0 : 2.0;
        for (std::size_t t = 0; t < Ts.size(); ++t)
          out(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(t)) +=
              mult * detail::kernel_contract(b, en[static_cast<std::size_t>(k)], en[static_cast<std::size_t>(k2)], Ts[t]);
      }
    }
  }
  return out;
}

/// M^q_T for each T by the eigenbasis route.
inline std::vector<double> moments_time(const EigenSystem& es, const LatticeOperator& lat, double q,
                                        const std::vector<double>& Ts, Vertex origin = {0, 0}) {
  const auto m = time_averages(es, lat.index_of(origin), {position_weights(lat, q)}, Ts);
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) out[static_cast<std::size_t>(i)] = m(0, i);
  return out;
}

inline std::vector<double> moments_time(const Hamiltonian& h, double q, const std::vector<double>& Ts,
                                        Vertex origin = {0, 0}) {
  return moments_time(eigensystem(h), h.lattice(), q, Ts, origin);
}

struct EnergyRouteOptions {
  double window_extra = 5.0;   // integrate over the spectral bounds widened by this (+ 10/T) on each side
  double step_factor = 1.0 / 3.0;  // grid step in units of Im z = 1/T
  int cutoff = -1;             // keep only |n| <= cutoff (-1: all)
  bool tail_correction = true; // add the analytic |E| -> inf tail beyond the window
};

/// Gershgorin enclosure of the spectrum of a symmetric sparse matrix.
inline std::pair<double, double> gershgorin_bounds(const SparseReal& m) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int i = 0; i < m.rows(); ++i) {
    double d = 0.0, r = 0.0;
    for (SparseReal::InnerIterator it(m, i); it; ++it) {
      if (it.col() == i)
        d += it.value();
      else
        r += std::abs(it.value());
    }
    lo = std::min(lo, d - r);
    hi = std::max(hi, d + r);
  }
  return {lo, hi};
}

/// Time averages of delta_origin for several diagonal observables, by trapezoid
/// quadrature of sum_n W(n) |G(n, 0; E + i/T)|^2 / (pi T). The integrand is
/// analytic in a strip of half-width 1/T, so a step of 1/(3T) is converged to
/// ~1e-8 relative. Trees use the O(n) elimination, other graphs sparse LU.
/// Result(w, t) as in time_averages.
inline Eigen::MatrixXd energy_averages(const SparseReal& h, int origin, const std::vector<Eigen::VectorXd>& weights,
                                       const std::vector<double>& Ts, const EnergyRouteOptions& opt = {}) {
  const auto n = static_cast<int>(h.rows());
  require(origin >= 0 && origin < n, "origin index out of range");
  for (const auto& w : weights) require(w.size() == n, "weight vector has the wrong dimension");
  for (double t : Ts) require(t > 0.0, "averaging times must be positive");

  const auto [lo, hi] = gershgorin_bounds(h);
  const double centre = 0.5 * (lo + hi);

  // leading large-|E| behaviour: G(n,0) ~ -delta_n0/(z-c) - ((H-c) delta_0)_n/(z-c)^2
  Eigen::VectorXd hd = h.row(origin).transpose();
  hd(origin) -= centre;
  std::vector<double> tail_s(weights.size());
  for (std::size_t w = 0; w < weights.size(); ++w) tail_s[w] = weights[w].dot(hd.cwiseProduct(hd));

  std::optional<TreeResolvent> tree;
  std::optional<ResolventSolver> lu;
  if (TreeResolvent::is_tree(h))
    tree.emplace(h);
  else
    lu.emplace(h);

  Eigen::MatrixXd out(static_cast<Eigen::Index>(weights.size()), static_cast<Eigen::Index>(Ts.size()));
  Eigen::VectorXd g2(n);
  for (std::size_t t = 0; t < Ts.size(); ++t) {
    const double eta = 1.0 / Ts[t];
    const double radius = 0.5 * (hi - lo) + opt.window_extra + 10.0 * eta;
    const auto steps = static_cast<long>(std::ceil(2.0 * radius / (opt.step_factor * eta)));
    const double hstep = 2.0 * radius / static_cast<double>(steps);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(weights.size()));
    for (long i = 0; i <= steps; ++i) {
      const cplx z{centre - radius + static_cast<double>(i) * hstep, eta};
      const Eigen::VectorXcd g = tree ? tree->column(origin, z) : lu->column(origin, z);
      g2 = g.cwiseAbs2();
      const double f = i == 0 || i == steps ? 0.5 : 1.0;
      for (std::size_t w = 0; w < weights.size(); ++w) acc(static_cast<Eigen::Index>(w)) += f * weights[w].dot(g2);
    }
    const auto tail = detail::lorentz_tails(radius, eta);
    for (std::size_t w = 0; w < weights.size(); ++w) {
      double integral = acc(static_cast<Eigen::Index>(w)) * hstep;
      if (opt.tail_correction) integral += weights[w](origin) * tail[0] + tail_s[w] * tail[1];
      out(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(t)) = integral / (std::numbers::pi * Ts[t]);
    }
  }
  return out;
}

/// M^q_T for each T by the resolvent route.
inline std::vector<double> moments_energy(const Hamiltonian& h, double q, const std::vector<double>& Ts,
                                          Vertex origin = {0, 0}, const EnergyRouteOptions& opt = {}) {
  const auto& lat = h.lattice();
  Eigen::VectorXd w = position_weights(lat, q);
  if (opt.cutoff >= 0)
    for (int i = 0; i < lat.size(); ++i)
      if (lat.vertex_at(i).norm1() > opt.cutoff) w(i) = 0.0;
  const auto m = energy_averages(h.matrix(), lat.index_of(origin), {w}, Ts, opt);
  std::vector<double> out(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) out[static_cast<std::size_t>(i)] = m(0, i);
  return out;
}

/// (1/T) int_0^T |<phi, e^{itH} psi>|^2 dt = sum_{k,l} a_k a_l sinc((E_k - E_l) T),
/// a_k = <phi, phi_k><phi_k, psi>.
inline std::vector<double> cesaro_transition(const EigenSystem& es, const Eigen::VectorXd& phi,
                                             const Eigen::VectorXd& psi, const std::vector<double>& Ts) {
  require(phi.size() == es.dim() && psi.size() == es.dim(), "state has the wrong dimension");
  const Eigen::VectorXd a = (es.vectors.transpose() * phi).cwiseProduct(es.vectors.transpose() * psi);
  const double amax = a.cwiseAbs().maxCoeff();
  std::vector<int> idx;
  for (Eigen::Index k = 0; k < a.size(); ++k)
    if (std::abs(a(k)) > 1e-16 * amax) idx.push_back(static_cast<int>(k));
  std::vector<double> out;
  for (double t : Ts) {
    require(t > 0.0, "averaging times must be positive");
    double acc = 0.0;
    for (int k : idx) {
      for (int l : idx) {
        const double x = (es.values(k) - es.values(l)) * t;
        acc += a(k) * a(l) * (x == 0.0 ? 1.0 : std::sin(x) / x);
      }
    }
    out.push_back(acc);
  }
  return out;
}

enum class MomentRoute { TimeQuadrature, EnergyContour };

inline std::string to_string(MomentRoute r) { return r == MomentRoute::TimeQuadrature ? "time" : "energy"; }

struct MomentCurve {
  double q = 1.0;
  std::vector<double> Ts;
  std::vector<double> values;
  std::vector<double> stderr_;  // standard error of the realization mean
  MomentRoute route = MomentRoute::TimeQuadrature;
  int realizations = 1;

  [[nodiscard]] std::size_t size() const { return Ts.size(); }

  /// Points with lo <= T <= hi.
  [[nodiscard]] MomentCurve window(double lo, double hi) const {
    MomentCurve c = *this;
    c.Ts.clear();
    c.values.clear();
    c.stderr_.clear();
    for (std::size_t i = 0; i < Ts.size(); ++i) {
      if (Ts[i] < lo || Ts[i] > hi) continue;
      c.Ts.push_back(Ts[i]);
      c.values.push_back(values[i]);
      c.stderr_.push_back(i < stderr_.size() ? stderr_[i] : 0.0);
    }
    return c;
  }
};

inline std::vector<double> log_spaced(double lo, double hi, int n) {
  require(lo > 0.0 && hi > lo && n >= 2, "log_spaced needs 0 < lo < hi and n >= 2");
  std::vector<double> out(static_cast<std::size_t>(n));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (n - 1.0));
  out.front() = lo;
  out.back() = hi;
  return out;
}

/// Realization mean and standard error per column. rows = realizations.
inline std::pair<std::vector<double>, std::vector<double>> mean_and_stderr(
    const std::vector<std::vector<double>>& samples) {
  require(!samples.empty(), "no samples to average");
  const std::size_t m = samples.front().size();
  const double r = static_cast<double>(samples.size());
  std::vector<double> mean(m, 0.0), se(m, 0.0);
  for (const auto& s : samples)
    for (std::size_t i = 0; i < m; ++i) mean[i] += s[i];
  for (auto& x : mean) x /= r;
  if (samples.size() > 1) {
    for (const auto& s : samples)
      for (std::size_t i = 0; i < m; ++i) se[i] += (s[i] - mean[i]) * (s[i] - mean[i]);
    for (auto& x : se) x = std::sqrt(x / (r - 1.0) / r);
  }
  return {mean, se};
}

/// Least-squares slope of log M^q_T against q log T.
inline double growth_exponent(const MomentCurve& c) {
  require(c.q > 0.0, "growth exponent needs q > 0");
  if (c.size() < 5) throw ValidationError("growth exponent needs at least 5 points");
  const double span = std::log10(c.Ts.back() / c.Ts.front());
  if (span < 1.5 - 1e-9) throw ValidationError("growth exponent needs a window of at least 1.5 decades");
  std::vector<double> x, y;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (!(c.values[i] > 0.0)) throw ValidationError("growth exponent needs positive moment values");
    x.push_back(c.q * std::log(c.Ts[i]));
    y.push_back(std::log(c.values[i]));
  }
  return fit_line(x, y).slope;
}

/// CSV "q,T,value,stderr,route,realizations".
inline void write_moment_csv(std::ostream& os, const MomentCurve& c) {
  char buf[160];
  os << "q,T,value,stderr,route,realizations\n";
  for (std::size_t i = 0; i < c.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%s,%d\n", c.q, c.Ts[i], c.values[i],
                  i < c.stderr_.size() ? c.stderr_[i] : 0.0, to_string(c.route).c_str(), c.realizations);
    os << buf;
  }
}

}  // namespace corrlab
