#pragma once

// Realization-averaged moment curves with the boundary guard, growth-exponent
// windows, and the paired Sym/Diag contrast run.

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "corrlab/dynamics.hpp"
#include "corrlab/estimators.hpp"
#include "corrlab/floquet.hpp"
#include "corrlab/parallel.hpp"

namespace corrlab {

enum class RouteChoice { Auto, Time, Energy };

inline RouteChoice parse_route_choice(const std::string& s) {
  if (s == "auto") return RouteChoice::Auto;
  if (s == "time") return RouteChoice::Time;
  if (s == "energy") return RouteChoice::Energy;
  throw ValidationError("unknown route '" + s + "' (expected auto, time or energy)");
}

struct MomentPlan {
  std::vector<double> qs{1.0};
  std::vector<double> Ts = log_spaced(0.1, 1000.0, 41);
  RouteChoice route = RouteChoice::Auto;
  int guard_width = 5;         // layer at the far edges
  double guard_mass = 1e-3;    // time-averaged mass allowed in the layer
  double window_decades = 1.5; // fit window below the guard cap

  void validate() const {
    require(!qs.empty(), "moments need at least one q");
    for (double q : qs) require(q > 0.0, "moment order q must be > 0");
    require(Ts.size() >= 2, "moments need at least two averaging times");
    for (std::size_t i = 0; i < Ts.size(); ++i) {
      require(Ts[i] > 0.0, "averaging times must be positive");
      if (i > 0) require(Ts[i] > Ts[i - 1], "averaging times must be increasing");
    }
    require(guard_width >= 1, "guard width must be >= 1");
    require(guard_mass > 0.0, "guard mass must be > 0");
    require(window_decades > 0.0, "window must span a positive number of decades");
  }
};

struct MomentRun {
  std::vector<MomentCurve> curves;  // one per q, realization means
  std::vector<double> boundary;     // largest guard-layer mass over realizations, per T
  double cap = 0.0;                 // largest T with every guard value up to it below guard_mass
  std::vector<double> exponents;    // per q over [cap / 10^decades, cap]; NaN if the window is too short
  double window_lo = 0.0;
};

/// Time route (dense or Sym fibers) unless the plan asks for the energy route;
/// Diag defaults to the energy route through the O(n) tree solver.
inline MomentRoute resolve_route(const GraphSpec& g, RouteChoice r) {
  if (r == RouteChoice::Time) return MomentRoute::TimeQuadrature;
  if (r == RouteChoice::Energy) return MomentRoute::EnergyContour;
  return g.kind == ModelKind::Sym ? MomentRoute::TimeQuadrature : MomentRoute::EnergyContour;
}

/// Per-realization rows: the qs then the guard layer, columns T.
inline Eigen::MatrixXd realization_averages(const std::shared_ptr<const LatticeOperator>& lat,
                                            const DisorderSample& sample, const MomentPlan& plan, MomentRoute route) {
  std::vector<Eigen::VectorXd> ws;
  for (double q : plan.qs) ws.push_back(position_weights(*lat, q));
  ws.push_back(boundary_layer_weights(*lat, plan.guard_width));
  const auto& g = lat->spec();
  if (route == MomentRoute::TimeQuadrature) {
    if (g.kind == ModelKind::Sym) return sym_time_averages(sym_fibers(sample.omegas, g.gamma, g.cols, g.rows), {0, 0}, ws, plan.Ts);
    const Hamiltonian h(lat, sample);
    return time_averages(eigensystem(h), lat->index_of({0, 0}), ws, plan.Ts);
  }
  const Hamiltonian h(lat, sample);
  return energy_averages(h.matrix(), lat->index_of({0, 0}), ws, plan.Ts);
}

inline MomentRun run_moments(const GraphSpec& graph, const DisorderSpec& disorder, const MomentPlan& plan,
                             int realizations, int threads = 1) {
  graph.validate();
  disorder.validate();
  plan.validate();
  require(realizations >= 1, "moments need at least one realization");
  auto lat = std::make_shared<const LatticeOperator>(build_lattice(graph));
  const MomentRoute route = resolve_route(graph, plan.route);
  std::vector<Eigen::MatrixXd> per(static_cast<std::size_t>(realizations));
  parallel_for(realizations, threads, [&](int r) {
    const auto sample = sample_disorder(disorder.with_realization(static_cast<std::uint64_t>(r)), graph.cols);
    per[static_cast<std::size_t>(r)] = realization_averages(lat, sample, plan, route);
  });

  MomentRun run;
  const std::size_t nq = plan.qs.size(), nt = plan.Ts.size();
  for (std::size_t iq = 0; iq < nq; ++iq) {
    std::vector<std::vector<double>> samples;
    for (const auto& m : per) {
      std::vector<double> row(nt);
      for (std::size_t t = 0; t < nt; ++t) row[t] = m(static_cast<Eigen::Index>(iq), static_cast<Eigen::Index>(t));
      samples.push_back(std::move(row));
    }
    auto [mean, se] = mean_and_stderr(samples);
    MomentCurve c;
    c.q = plan.qs[iq];
    c.Ts = plan.Ts;
    c.values = std::move(mean);
    c.stderr_ = std::move(se);
    c.route = route;
    c.realizations = realizations;
    run.curves.push_back(std::move(c));
  }
  run.boundary.assign(nt, 0.0);
  for (const auto& m : per)
    for (std::size_t t = 0; t < nt; ++t)
      run.boundary[t] = std::max(run.boundary[t], m(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(t)));

  for (std::size_t t = 0; t < nt && run.boundary[t] < plan.guard_mass; ++t) run.cap = plan.Ts[t];
  run.window_lo = run.cap / std::pow(10.0, plan.window_decades);
  for (const auto& c : run.curves) {
    double a = std::numeric_limits<double>::quiet_NaN();
    if (run.cap > 0.0) {
      try {
        a = growth_exponent(c.window(run.window_lo * (1.0 - 1e-12), run.cap));
      } catch (const ValidationError&) {
      }
    }
    run.exponents.push_back(a);
  }
  return run;
}

struct ThresholdPlan {
  double s = 0.5;
  cplx z{0.5, 0.05};
  int chain_length = 200;
  std::vector<int> distances = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  int realizations = 100;
  double c_w = 1.0;
};

struct ThresholdReport {
  DecayFit chain;
  double mu_hat = 0.0;
  double c_ap = 0.0;
  double gamma0 = 0.0;
};

/// mu_And from a 1D scan at the Diag disorder, then gamma_0.
inline ThresholdReport diag_threshold(const DisorderSpec& disorder, int ell, const ThresholdPlan& p, int threads = 1) {
  ThresholdReport r;
  r.chain = anderson_chain_scan(disorder, p.s, p.z, p.chain_length, p.distances, p.realizations, threads);
  r.mu_hat = r.chain.decay_rate();
  if (!(r.mu_hat > 0.0)) throw NumericalError("1D scan shows no decay (mu = " + std::to_string(r.mu_hat) + ")");
  r.c_ap = apriori_constant(p.s, disorder.omega_max, disorder.rho_sup(), p.c_w);
  r.gamma0 = gamma_threshold(p.s, ell, r.mu_hat, r.c_ap);
  return r;
}

struct ContrastPlan {
  GraphSpec sym{ModelKind::Sym, 0.5, 1, 80, 80};
  DisorderSpec sym_disorder{};
  GraphSpec diag{ModelKind::Diag, 0.0, 2, 80, 80};  // gamma <= 0: gamma_factor * gamma_0
  DisorderSpec diag_disorder{Distribution::Uniform, 5.0, {}, 0, 0};
  double gamma_factor = 0.5;
  ThresholdPlan threshold{};
  MomentPlan moments{};
  int realizations = 20;
};

struct ContrastReport {
  MomentRun sym;
  MomentRun diag;
  std::optional<ThresholdReport> threshold;
  double diag_gamma = 0.0;
};

inline ContrastReport run_contrast(ContrastPlan p, std::uint64_t seed, int threads = 1) {
  ContrastReport rep;
  p.sym_disorder.seed = seed;
  p.diag_disorder.seed = seed;
  if (p.diag.gamma <= 0.0) {
    // separate stream for the 1D scan
    DisorderSpec chain = p.diag_disorder;
    chain.seed = mix64(seed ^ 0x5bd1e9955bd1e995ULL);
    rep.threshold = diag_threshold(chain, p.diag.ell, p.threshold, threads);
    p.diag.gamma = p.gamma_factor * rep.threshold->gamma0;
  }
  rep.diag_gamma = p.diag.gamma;
  rep.sym = run_moments(p.sym, p.sym_disorder, p.moments, p.realizations, threads);
  rep.diag = run_moments(p.diag, p.diag_disorder, p.moments, p.realizations, threads);
  return rep;
}

}  // namespace corrlab
