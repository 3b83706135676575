#pragma once

// Monte Carlo estimators: fractional moments E|G(0, n; z)|^s and their decay,
// a-priori constants and the gamma threshold, eigenfunction correlators,
// spectrum enclosure and the packing-dimension surrogate.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "corrlab/core.hpp"
#include "corrlab/disorder.hpp"
#include "corrlab/dynamics.hpp"
#include "corrlab/floquet.hpp"
#include "corrlab/greens.hpp"
#include "corrlab/lattice.hpp"
#include "corrlab/linalg.hpp"
#include "corrlab/parallel.hpp"

namespace corrlab {

struct DecayFit {
  std::vector<int> distances;
  std::vector<double> means;
  std::vector<double> stderr_;
  std::vector<double> log_means;
  double slope = 0.0;      // -mu
  double intercept = 0.0;  // log prefactor
  double r_squared = 0.0;
  int realizations = 0;

  [[nodiscard]] double decay_rate() const { return -slope; }
};

/// Fits log(mean) against distance. Distances may repeat (several targets per shell).
inline DecayFit fit_decay(std::vector<int> distances, std::vector<double> means, std::vector<double> stderr_,
                          int realizations) {
  require(distances.size() == means.size() && means.size() == stderr_.size(), "decay fit input size mismatch");
  DecayFit f;
  f.distances = std::move(distances);
  f.means = std::move(means);
  f.stderr_ = std::move(stderr_);
  f.realizations = realizations;
  std::vector<double> x;
  for (std::size_t i = 0; i < f.means.size(); ++i) {
    if (!(f.means[i] > 0.0)) throw NumericalError("decay fit needs positive means (distance " + std::to_string(f.distances[i]) + ")");
    f.log_means.push_back(std::log(f.means[i]));
    x.push_back(f.distances[i]);
  }
  const auto lf = fit_line(x, f.log_means);
  f.slope = lf.slope;
  f.intercept = lf.intercept;
  f.r_squared = lf.r_squared;
  return f;
}

/// |G(target, origin; z)|^s for each target from one sparse solve.
inline std::vector<double> fractional_moments(const SparseReal& h, int origin, const std::vector<int>& targets,
                                              cplx z, double s) {
  require(s > 0.0 && s < 1.0, "fractional moment exponent s must lie in (0, 1)");
  require_upper_half_plane(z);
  ResolventSolver solver(h);
  const Eigen::VectorXcd g = solver.column(origin, z);
  std::vector<double> out;
  out.reserve(targets.size());
  for (int t : targets) out.push_back(std::pow(std::abs(g(t)), s));
  return out;
}

inline constexpr int kMinFitRealizations = 30;

/// Monte Carlo mean of |G((0,0), n; z)|^s over R realizations, fitted against |n|.
inline DecayFit fractional_moment_scan(const GraphSpec& graph, const DisorderSpec& disorder, double s, cplx z,
                                       const std::vector<Vertex>& targets, int realizations, int threads = 1) {
  if (realizations < kMinFitRealizations)
    throw ValidationError("fractional moment scan needs at least " + std::to_string(kMinFitRealizations) +
                          " realizations");
  auto lat = std::make_shared<const LatticeOperator>(build_lattice(graph));
  std::vector<int> idx;
  std::vector<int> dist;
  for (const auto& v : targets) {
    idx.push_back(lat->index_of(v));
    dist.push_back(v.norm1());
  }
  const int origin = lat->index_of({0, 0});
  std::vector<std::vector<double>> samples(static_cast<std::size_t>(realizations));
  parallel_for(realizations, threads, [&](int r) {
    const Hamiltonian h(lat, sample_disorder(disorder.with_realization(static_cast<std::uint64_t>(r)), graph.cols));
    samples[static_cast<std::size_t>(r)] = fractional_moments(h.matrix(), origin, idx, z, s);
  });
  auto [mean, se] = mean_and_stderr(samples);
  return fit_decay(dist, mean, se, realizations);
}

/// Path graph 0..length-1 with unit hopping and the given potential.
inline SparseReal chain_hamiltonian(const std::vector<double>& omegas, int length) {
  require(length >= 1 && length <= static_cast<int>(omegas.size()), "chain needs length potential values");
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < length; ++i) {
    trips.emplace_back(i, i, omegas[static_cast<std::size_t>(i)]);
    if (i + 1 < length) {
      trips.emplace_back(i, i + 1, -1.0);
      trips.emplace_back(i + 1, i, -1.0);
    }
  }
  SparseReal m(length, length);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

/// 1D half-line Anderson scan: E|G(0, n; z)|^s for n in `distances`; mu_And = -slope.
inline DecayFit anderson_chain_scan(const DisorderSpec& disorder, double s, cplx z, int length,
                                    const std::vector<int>& distances, int realizations, int threads = 1) {
  if (realizations < kMinFitRealizations)
    throw ValidationError("fractional moment scan needs at least " + std::to_string(kMinFitRealizations) +
                          " realizations");
  for (int d : distances) require(d >= 0 && d < length, "chain target outside the chain");
  std::vector<std::vector<double>> samples(static_cast<std::size_t>(realizations));
  parallel_for(realizations, threads, [&](int r) {
    const auto sample = sample_disorder(disorder.with_realization(static_cast<std::uint64_t>(r)), length);
    samples[static_cast<std::size_t>(r)] = fractional_moments(chain_hamiltonian(sample.omegas, length), 0, distances, z, s);
  });
  auto [mean, se] = mean_and_stderr(samples);
  return fit_decay(distances, mean, se, realizations);
}

/// C_AP(s) = max{(2 C_W omega_max rho)^s, (4 C_W omega_max^2 rho^2)^s} / (1 - s).
inline double apriori_constant(double s, double omega_max, double rho_sup, double c_w = 1.0) {
  if (!(s > 0.0 && s < 1.0)) throw ValidationError("a-priori constant needs s in (0, 1)");
  require(omega_max >= 0.0 && rho_sup > 0.0 && c_w > 0.0, "a-priori constant needs omega_max >= 0, rho > 0, C_W > 0");
  const double t1 = std::pow(2.0 * c_w * omega_max * rho_sup, s);
  const double t2 = std::pow(4.0 * c_w * omega_max * omega_max * rho_sup * rho_sup, s);
  return std::max(t1, t2) / (1.0 - s);
}

/// gamma_0 = (exp(-mu (ell + 2)) / C_AP)^{1/s}: the largest gamma with C_AP gamma^s <= exp(-mu (ell + 2)).
inline double gamma_threshold(double s, int ell, double mu_hat, double c_ap) {
  require(s > 0.0 && s < 1.0, "gamma threshold needs s in (0, 1)");
  require(mu_hat > 0.0, "gamma threshold needs mu > 0");
  require(ell >= 1 && c_ap > 0.0, "gamma threshold needs ell >= 1 and C_AP > 0");
  return std::pow(std::exp(-mu_hat * (ell + 2.0)) / c_ap, 1.0 / s);
}

/// Q(m, n) = sum_k |phi_k(m)| |phi_k(n)|.
inline double eigenfunction_correlator(const EigenSystem& es, int m, int n) {
  return (es.vectors.row(m).cwiseAbs().array() * es.vectors.row(n).cwiseAbs().array()).sum();
}

/// Q(m, n) for H_Sym from the fiber eigenpairs.
inline double sym_eigenfunction_correlator(const SymFibers& sf, Vertex m, Vertex n) {
  const auto& s = sf.transform.basis();
  double q = 0.0;
  for (int k = 0; k < sf.rows(); ++k) {
    const double sk = std::abs(s(k, m.n2) * s(k, n.n2));
    const auto& v = sf.blocks[static_cast<std::size_t>(k)].vectors;
    q += sk * (v.row(m.n1).cwiseAbs().array() * v.row(n.n1).cwiseAbs().array()).sum();
  }
  return q;
}

/// Realization-averaged Sym correlators Q((0,0), (d,0)) and Q((0,0), (0,d)) for d in `distances`.
struct SymCorrelatorScan {
  DecayFit horizontal;
  DecayFit vertical;
};

inline SymCorrelatorScan sym_correlator_scan(const GraphSpec& graph, const DisorderSpec& disorder,
                                             const std::vector<int>& distances, int realizations, int threads = 1) {
  require(graph.kind == ModelKind::Sym, "correlator scan uses the Sym fiber decomposition");
  graph.validate();
  for (int d : distances) require(d >= 0 && d < graph.cols && d < graph.rows, "correlator distance outside the box");
  std::vector<std::vector<double>> hs(static_cast<std::size_t>(realizations)), vs(hs.size());
  parallel_for(realizations, threads, [&](int r) {
    const auto sample = sample_disorder(disorder.with_realization(static_cast<std::uint64_t>(r)), graph.cols);
    const auto sf = sym_fibers(sample.omegas, graph.gamma, graph.cols, graph.rows);
    auto& h = hs[static_cast<std::size_t>(r)];
    auto& v = vs[static_cast<std::size_t>(r)];
    for (int d : distances) {
      h.push_back(sym_eigenfunction_correlator(sf, {0, 0}, {d, 0}));
      v.push_back(sym_eigenfunction_correlator(sf, {0, 0}, {0, d}));
    }
  });
  auto [hm, hse] = mean_and_stderr(hs);
  auto [vm, vse] = mean_and_stderr(vs);
  return {fit_decay(distances, hm, hse, realizations), fit_decay(distances, vm, vse, realizations)};
}

/// Largest growth exponent over the curves: the finite-volume stand-in for dim_P^+.
inline double packing_bound(const std::vector<MomentCurve>& curves) {
  require(!curves.empty(), "packing bound needs at least one curve");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : curves) best = std::max(best, growth_exponent(c));
  return best;
}

struct EnclosureReport {
  double min_eig = 0.0;
  double max_eig = 0.0;
  int violations = 0;        // eigenvalues outside [-2 - 2 gamma, 2 + omega_max + 2 gamma] beyond tol
  double covering_gap = 0.0; // largest gap of [-2, 2 + omega_max] free of eigenvalues
  int realizations = 0;
};

/// Largest gap of [lo, hi] not hit by the sorted points.
inline double covering_gap(std::vector<double> pts, double lo, double hi) {
  std::sort(pts.begin(), pts.end());
  double prev = lo, gap = 0.0;
  for (double x : pts) {
    if (x < lo) continue;
    if (x > hi) break;
    gap = std::max(gap, x - prev);
    prev = x;
  }
  return std::max(gap, hi - prev);
}

/// Extreme eigenvalues of H_Sym over R realizations, enclosure violations and covering gap.
inline EnclosureReport spectrum_enclosure(const GraphSpec& graph, const DisorderSpec& disorder, int realizations,
                                          double tol = 1e-8, int threads = 1) {
  require(graph.kind == ModelKind::Sym, "spectrum enclosure is stated for Sym");
  require(realizations >= 1, "spectrum enclosure needs at least one realization");
  graph.validate();
  std::vector<std::vector<double>> eigs(static_cast<std::size_t>(realizations));
  parallel_for(realizations, threads, [&](int r) {
    const auto sample = sample_disorder(disorder.with_realization(static_cast<std::uint64_t>(r)), graph.cols);
    const SineTransform st(graph.rows);
    auto& out = eigs[static_cast<std::size_t>(r)];
    for (int k = 0; k < graph.rows; ++k) {
      const auto es = fiber(sample.omegas, graph.gamma, st.p(k), graph.cols).eigensystem(false);
      out.insert(out.end(), es.values.data(), es.values.data() + es.values.size());
    }
  });
  EnclosureReport rep;
  rep.realizations = realizations;
  rep.min_eig = std::numeric_limits<double>::infinity();
  rep.max_eig = -rep.min_eig;
  const double lo = -2.0 - 2.0 * graph.gamma, hi = 2.0 + disorder.omega_max + 2.0 * graph.gamma;
  std::vector<double> all;
  for (const auto& e : eigs) {
    for (double x : e) {
      rep.min_eig = std::min(rep.min_eig, x);
      rep.max_eig = std::max(rep.max_eig, x);
      if (x < lo - tol || x > hi + tol) ++rep.violations;
    }
    all.insert(all.end(), e.begin(), e.end());
  }
  rep.covering_gap = covering_gap(std::move(all), -2.0, 2.0 + disorder.omega_max);
  return rep;
}

/// CSV "distance,mean,stderr,log_mean".
inline void write_decay_csv(std::ostream& os, const DecayFit& f) {
  char buf[128];
  os << "distance,mean,stderr,log_mean\n";
  for (std::size_t i = 0; i < f.means.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", f.distances[i], f.means[i], f.stderr_[i], f.log_means[i]);
    os << buf;
  }
}

}  // namespace corrlab
