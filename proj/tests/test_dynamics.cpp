#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "corrlab/dynamics.hpp"

using namespace corrlab;

namespace {

std::shared_ptr<const LatticeOperator> lattice(GraphSpec g) { return std::make_shared<const LatticeOperator>(build_lattice(g)); }

Hamiltonian random_h(GraphSpec g, std::uint64_t seed, double wmax = 1.0) {
  auto lat = lattice(g);
  DisorderSpec d;
  d.seed = seed;
  d.omega_max = wmax;
  return Hamiltonian(lat, sample_disorder(d, g.cols));
}

Eigen::VectorXcd delta(int n, int i) {
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(n);
  v(i) = 1.0;
  return v;
}

// Origin row of the Sym eigenbasis straight from the fibers.
EigenSystem sym_origin_row(const SymFibers& sf) {
  EigenSystem es;
  const int n = sf.cols * sf.rows();
  es.values.resize(n);
  es.vectors.resize(1, n);
  int c = 0;
  for (int k = 0; k < sf.rows(); ++k) {
    const auto& b = sf.blocks[static_cast<std::size_t>(k)];
    for (int j = 0; j < sf.cols; ++j, ++c) {
      es.values(c) = b.values(j);
      es.vectors(0, c) = sf.transform.basis()(k, 0) * b.vectors(0, j);
    }
  }
  return es;
}

}  // namespace

TEST(Dynamics, EvolveAtZeroIsIdentity) {
  const auto h = random_h({ModelKind::Sym, 0.5, 1, 6, 5}, 1);
  const auto es = eigensystem(h);
  const auto psi = delta(30, 7);
  EXPECT_LT((evolve(es, psi, 0.0) - psi).norm(), 1e-12);
}

TEST(Dynamics, Unitarity) {
  const auto h = random_h({ModelKind::Diag, 0.3, 2, 8, 16}, 2);
  const auto es = eigensystem(h);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  Eigen::VectorXcd psi(es.dim());
  for (int i = 0; i < psi.size(); ++i) psi(i) = {n(rng), n(rng)};
  for (double t : {0.1, 1.0, 17.0, 250.0, 1000.0}) EXPECT_NEAR(evolve(es, psi, t).norm(), psi.norm(), 1e-10 * psi.norm());
}

TEST(Dynamics, SingleSitePhase) {
  EigenSystem es;
  es.values = Eigen::VectorXd::Constant(1, 0.7);
  es.vectors = Eigen::MatrixXd::Identity(1, 1);
  const cplx got = evolve(es, delta(1, 0), 3.0)(0);
  EXPECT_NEAR(std::abs(got - std::polar(1.0, -2.1)), 0.0, 1e-14);
}

TEST(Dynamics, EnergyConservation) {
  const auto h = random_h({ModelKind::Sym, 0.5, 1, 7, 7}, 4);
  const auto es = eigensystem(h);
  const Eigen::MatrixXd hd = h.dense();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  Eigen::VectorXcd psi(es.dim());
  for (int i = 0; i < psi.size(); ++i) psi(i) = {n(rng), n(rng)};
  psi.normalize();
  const double e0 = (psi.adjoint() * hd.cast<cplx>() * psi)(0).real();
  for (double t : {1.0, 10.0, 100.0}) {
    const auto pt = evolve(es, psi, t);
    EXPECT_NEAR((pt.adjoint() * hd.cast<cplx>() * pt)(0).real(), e0, 1e-8);
  }
}

TEST(Dynamics, MomentsVanishAsTGoesToZero) {
  const auto h = random_h({ModelKind::Sym, 0.5, 1, 10, 10}, 6);
  const auto m = moments_time(h, 1.0, {1e-4, 1e-2, 1.0});
  EXPECT_LT(m[0], 1e-6);
  EXPECT_LT(m[0], m[1]);
  EXPECT_LT(m[1], m[2]);
  EXPECT_THROW((void)moments_time(h, -1.0, {1.0}), ValidationError);
}

// Small T: the averaged mass leaving the origin is sum over neighbours ~ (T/2)^2 |H_0n|^2 to leading order.
TEST(Dynamics, ShortTimeExpansion) {
  const auto h = random_h({ModelKind::Sym, 0.5, 1, 8, 8}, 7);
  const double t = 1e-3;
  // neighbours of (0,0): (1,0) weight 1, (0,1) weight gamma; |n| = 1 for both
  const double expect = 2.0 * (t / 2.0) * (t / 2.0) * (1.0 + 0.25);
  EXPECT_NEAR(moments_time(h, 1.0, {t})[0], expect, 1e-3 * expect);
}

TEST(Dynamics, SymStructuredMatchesDense) {
  const int cols = 9, rows = 11;
  const auto h = random_h({ModelKind::Sym, 0.5, 1, cols, rows}, 8);
  const auto& lat = h.lattice();
  const std::vector<double> Ts{0.5, 3.0, 20.0, 200.0};
  const std::vector<Eigen::VectorXd> ws{position_weights(lat, 1.0), position_weights(lat, 2.0), boundary_layer_weights(lat, 3)};
  const auto dense = time_averages(eigensystem(h), 0, ws, Ts, 0.0);
  const auto fib = sym_time_averages(sym_fibers(h.sample().omegas, 0.5, cols, rows), {0, 0}, ws, Ts, 0.0);
  EXPECT_LT((dense - fib).cwiseAbs().maxCoeff(), 1e-10 * dense.cwiseAbs().maxCoeff());
  // off-corner origin
  const auto dense2 = time_averages(eigensystem(h), lat.index_of({2, 3}), ws, Ts, 0.0);
  const auto fib2 = sym_time_averages(sym_fibers(h.sample().omegas, 0.5, cols, rows), {2, 3}, ws, Ts, 0.0);
  EXPECT_LT((dense2 - fib2).cwiseAbs().maxCoeff(), 1e-10 * dense2.cwiseAbs().maxCoeff());
}

TEST(Dynamics, PruningIsHarmless) {
  const auto h = random_h({ModelKind::Diag, 0.1, 2, 10, 20}, 9, 3.0);
  const auto es = eigensystem(h);
  const std::vector<Eigen::VectorXd> ws{position_weights(h.lattice(), 1.0)};
  const auto a = time_averages(es, 0, ws, {10.0, 1000.0}, 0.0);
  const auto b = time_averages(es, 0, ws, {10.0, 1000.0});
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10 * a.cwiseAbs().maxCoeff());
}

TEST(Dynamics, RouteEquivalence) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const GraphSpec& g : {GraphSpec{ModelKind::Sym, 0.5, 1, 12, 12}, GraphSpec{ModelKind::Diag, 0.3, 2, 8, 16}}) {
      const auto h = random_h(g, 10 + seed);
      const std::vector<double> Ts{10.0, 100.0};
      const auto mt = moments_time(h, 1.0, Ts);
      const auto me = moments_energy(h, 1.0, Ts);
      for (std::size_t i = 0; i < Ts.size(); ++i) EXPECT_NEAR(me[i] / mt[i], 1.0, 1e-3) << to_string(g.kind) << " T=" << Ts[i];
    }
  }
}

TEST(Dynamics, EnergyRouteSingleSite) {
  // two-column Sym box is the smallest lattice; a single site is a 1x1 Hamiltonian on the origin only
  auto lat = lattice({ModelKind::Sym, 0.5, 1, 2, 2});
  DisorderSpec d;
  const Hamiltonian h(lat, sample_disorder(d, 2));
  EnergyRouteOptions opt;
  opt.cutoff = 0;
  for (double v : moments_energy(h, 1.0, {1.0, 10.0}, {0, 0}, opt)) EXPECT_EQ(v, 0.0);
}

// Truncating to |n| <= N changes the moment by less than the exponential envelope fitted to the shell weights.
TEST(Dynamics, CutoffTailAudit) {
  const GraphSpec g{ModelKind::Diag, 0.05, 2, 10, 20};
  const auto h = random_h(g, 11, 4.0);
  const auto& lat = h.lattice();
  const double T = 50.0;
  const int rmax = (g.cols - 1) + (g.rows - 1);
  std::vector<Eigen::VectorXd> shells;
  for (int r = 0; r <= rmax; ++r) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(lat.size());
    for (int i = 0; i < lat.size(); ++i) w(i) = lat.vertex_at(i).norm1() == r ? 1.0 : 0.0;
    shells.push_back(w);
  }
  const auto p = time_averages(eigensystem(h), 0, shells, {T}, 0.0);
  const int N = 6;
  std::vector<double> x, y;
  for (int r = 1; r <= rmax; ++r) {
    if (p(r, 0) <= 0.0) continue;
    x.push_back(r);
    y.push_back(std::log(p(r, 0)));
  }
  const auto fit = fit_line(x, y);
  ASSERT_LT(fit.slope, 0.0);
  double lift = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) lift = std::max(lift, y[i] - (fit.intercept + fit.slope * x[i]));
  double bound = 0.0;
  for (int r = N + 1; r <= rmax; ++r) bound += r * std::exp(fit.intercept + lift + fit.slope * r);

  EnergyRouteOptions opt;
  const double full = moments_energy(h, 1.0, {T})[0];
  opt.cutoff = N;
  const double cut = moments_energy(h, 1.0, {T}, {0, 0}, opt)[0];
  EXPECT_GE(full - cut, 0.0);
  EXPECT_LT(full - cut, bound * (1.0 + 1e-3));
}

TEST(Dynamics, CesaroEigenvectorAndOrthogonal) {
  const auto h = random_h({ModelKind::Sym, 0.5, 1, 6, 6}, 12);
  const auto es = eigensystem(h);
  const Eigen::VectorXd v3 = es.vectors.col(3), v9 = es.vectors.col(9);
  for (double c : cesaro_transition(es, v3, v3, {1.0, 10.0, 1e3})) EXPECT_NEAR(c, 1.0, 1e-12);
  for (double c : cesaro_transition(es, v3, v9, {1.0, 10.0, 1e3})) EXPECT_NEAR(c, 0.0, 1e-12);
}

TEST(Dynamics, CesaroDecaysLikeOneOverT) {
  DisorderSpec d;
  d.seed = 13;
  const int cols = 10, rows = 1000;
  const auto sf = sym_fibers(sample_disorder(d, cols).omegas, 0.5, cols, rows);
  const auto es = sym_origin_row(sf);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(1);
  const std::vector<double> Ts{10.0, 20.0, 40.0, 80.0, 160.0};
  const auto c = cesaro_transition(es, one, one, Ts);
  std::vector<double> x, y;
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    x.push_back(std::log(Ts[i]));
    y.push_back(std::log(c[i]));
  }
  EXPECT_NEAR(fit_line(x, y).slope, -1.0, 0.2);
}

TEST(Dynamics, GrowthExponentSynthetic) {
  MomentCurve c;
  c.Ts = log_spaced(1.0, 1e3, 9);
  for (double q : {0.5, 1.0, 2.0}) {
    c.q = q;
    c.values.clear();
    for (double t : c.Ts) c.values.push_back(3.0 * std::pow(t, q));
    EXPECT_NEAR(growth_exponent(c), 1.0, 1e-12);
  }
  c.q = 1.0;
  c.values.assign(c.Ts.size(), 7.0);
  EXPECT_NEAR(growth_exponent(c), 0.0, 1e-12);
}

TEST(Dynamics, GrowthExponentErrors) {
  MomentCurve c;
  c.Ts = log_spaced(1.0, 1e3, 4);
  c.values.assign(4, 1.0);
  EXPECT_THROW((void)growth_exponent(c), ValidationError);
  c.Ts = log_spaced(1.0, 10.0, 6);
  c.values.assign(6, 1.0);
  EXPECT_THROW((void)growth_exponent(c), ValidationError);
  c.Ts = log_spaced(1.0, 100.0, 6);
  c.values[2] = 0.0;
  EXPECT_THROW((void)growth_exponent(c), ValidationError);
  c.values[2] = -1.0;
  EXPECT_THROW((void)growth_exponent(c), ValidationError);
}

TEST(Dynamics, FreeSymGrowthNearBallistic) {
  const int cols = 60, rows = 60;
  auto lat = lattice({ModelKind::Sym, 1.0, 1, cols, rows});
  const auto sf = sym_fibers(std::vector<double>(cols, 0.0), 1.0, cols, rows);
  MomentCurve c;
  c.Ts = log_spaced(0.3, 9.5, 8);
  const auto m = sym_time_averages(sf, {0, 0}, {position_weights(*lat, 1.0), boundary_layer_weights(*lat)}, c.Ts);
  for (Eigen::Index i = 0; i < m.cols(); ++i) c.values.push_back(m(0, i));
  EXPECT_LT(m(1, m.cols() - 1), 1e-3);
  const double a = growth_exponent(c);
  EXPECT_GT(a, 0.8);
  EXPECT_LT(a, 1.3);
}

TEST(Dynamics, WeightInequalityAndCeiling) {
  const GraphSpec g{ModelKind::Diag, 0.4, 2, 9, 18};
  const auto h = random_h(g, 14);
  const auto es = eigensystem(h);
  const std::vector<double> Ts{0.3, 3.0, 30.0, 3000.0};
  const double nmax = (g.cols - 1) + (g.rows - 1);
  const auto m1 = moments_time(es, h.lattice(), 1.0, Ts);
  const auto m2 = moments_time(es, h.lattice(), 2.0, Ts);
  const auto m3 = moments_time(es, h.lattice(), 3.0, Ts);
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    EXPECT_LE(m2[i], nmax * m1[i] * (1 + 1e-12));
    EXPECT_LE(m3[i], nmax * nmax * m1[i] * (1 + 1e-12));
    EXPECT_LE(m3[i], std::pow(g.cols + g.rows, 3.0));
    EXPECT_GE(m1[i], 0.0);
  }
}

TEST(Dynamics, MomentCsv) {
  MomentCurve c;
  c.q = 1.0;
  c.Ts = {1.0, 10.0};
  c.values = {0.5, 2.0};
  c.stderr_ = {0.0, 0.25};
  c.route = MomentRoute::EnergyContour;
  c.realizations = 3;
  std::ostringstream os;
  write_moment_csv(os, c);
  EXPECT_EQ(os.str(), "q,T,value,stderr,route,realizations\n1,1,0.5,0,energy,3\n1,10,2,0.25,energy,3\n");
  const auto w = c.window(5.0, 20.0);
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w.values[0], 2.0);
}
