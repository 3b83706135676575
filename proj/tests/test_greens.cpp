#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "corrlab/greens.hpp"

using namespace corrlab;

namespace {

Hamiltonian make_h(GraphSpec g, std::uint64_t seed, double omega_max = 1.0) {
  DisorderSpec d;
  d.seed = seed;
  d.omega_max = omega_max;
  return assemble(std::make_shared<const LatticeOperator>(build_lattice(g)), sample_disorder(d, g.cols));
}

// Dense LU oracle: columns of (H - z)^{-1} from LAPACK zgesv.
Eigen::MatrixXcd dense_resolvent_columns(const Hamiltonian& h, cplx z, const std::vector<int>& cols) {
  Eigen::MatrixXcd m = h.dense().cast<cplx>();
  m.diagonal().array() -= z;
  const auto n = static_cast<lapack_int>(m.rows());
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(n, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) b(cols[c], static_cast<Eigen::Index>(c)) = 1.0;
  std::vector<lapack_int> piv(static_cast<std::size_t>(n));
  const lapack_int info = LAPACKE_zgesv(LAPACK_COL_MAJOR, n, static_cast<lapack_int>(cols.size()),
                                        reinterpret_cast<lapack_complex_double*>(m.data()), n, piv.data(),
                                        reinterpret_cast<lapack_complex_double*>(b.data()), n);
  if (info != 0) throw NumericalError("zgesv failed");
  return b;
}

Eigen::MatrixXcd dense_resolvent(const Hamiltonian& h, cplx z) {
  std::vector<int> all(static_cast<std::size_t>(h.size()));
  std::iota(all.begin(), all.end(), 0);
  return dense_resolvent_columns(h, z, all);
}

std::vector<double> random_omegas(std::mt19937_64& rng, int n, double wmax = 1.0) {
  std::uniform_real_distribution<double> u(0.0, wmax);
  std::vector<double> w(static_cast<std::size_t>(n));
  for (auto& x : w) x = u(rng);
  return w;
}

}  // namespace

TEST(Greens, SingleSite) {
  // 1x1 chain via the continued fraction and via a sparse solve
  const cplx z{0.3, 0.7};
  EXPECT_NEAR(std::abs(halfline_cf({0.8}, z).g00 - 1.0 / (0.8 - z)), 0.0, 1e-15);
  SparseReal m(1, 1);
  m.insert(0, 0) = 0.8;
  ResolventSolver s(m);
  EXPECT_NEAR(std::abs(s.column(0, z)(0) - 1.0 / (0.8 - z)), 0.0, 1e-15);
}

TEST(Greens, EntrySymmetryAndConjugation) {
  const auto h = make_h({ModelKind::Diag, 0.4, 2, 8, 10}, 3);
  const cplx z{0.2, 0.3};
  const auto& lat = h.lattice();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> pick(0, lat.size() - 1);
  for (int t = 0; t < 10; ++t) {
    const Vertex u = lat.vertex_at(pick(rng)), v = lat.vertex_at(pick(rng));
    EXPECT_NEAR(std::abs(greens_entry(h, u, v, z) - greens_entry(h, v, u, z)), 0.0, 1e-10);
    EXPECT_GT(greens_entry(h, u, u, z).imag(), 0.0);
  }
  // G(z-bar) = conj G(z) through the dense oracle
  const auto g = dense_resolvent(h, z);
  const auto gb = dense_resolvent(h, std::conj(z));
  EXPECT_NEAR((gb - g.conjugate()).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(Greens, MatchesDenseOracle) {
  const auto h = make_h({ModelKind::Sym, 0.5, 1, 60, 60}, 17);
  const cplx z{1.0, 0.1};
  const std::vector<int> cols{0, 1, 59, 60, 1234, 3599};
  const auto g = dense_resolvent_columns(h, z, cols);
  ResolventSolver s(h.matrix());
  s.set_z(z);
  double err = 0.0;
  for (std::size_t c = 0; c < cols.size(); ++c)
    err = std::max(err, (s.column(cols[c]) - g.col(static_cast<Eigen::Index>(c))).cwiseAbs().maxCoeff());
  EXPECT_LT(err, 1e-8);
}

TEST(Greens, RejectsLowerHalfPlaneAndEtaFloor) {
  const auto h = make_h({ModelKind::Sym, 0.5, 1, 4, 4}, 1);
  EXPECT_THROW(greens_entry(h, {0, 0}, {0, 0}, {0.0, 0.0}), ValidationError);
  EXPECT_THROW(greens_entry(h, {0, 0}, {0, 0}, {0.0, -0.1}), ValidationError);
  EXPECT_THROW(greens_entry(h, {0, 0}, {0, 0}, {0.0, 1e-8}), ValidationError);
  EXPECT_THROW(halfline_cf({0.0}, {0.0, 0.0}), ValidationError);
}

TEST(Greens, FreeHalfLineLimit) {
  std::vector<double> zero(10001, 0.0);
  const auto hl = halfline_cf(zero, {0.0, 1.0});
  const cplx expect{0.0, (std::sqrt(5.0) - 1.0) / 2.0};
  EXPECT_NEAR(std::abs(hl.g00 - expect), 0.0, 1e-12);
  // g^2 + z g + 1 = 0
  EXPECT_NEAR(std::abs(hl.g00 * hl.g00 + cplx(0.0, 1.0) * hl.g00 + 1.0), 0.0, 1e-12);
}

TEST(Greens, HalflineZeroLength) {
  const auto hl = halfline_cf({0.4, 9.0}, {0.1, 0.2}, 0);
  EXPECT_NEAR(std::abs(hl.g00 - 1.0 / (0.4 - cplx(0.1, 0.2))), 0.0, 1e-15);
  EXPECT_EQ(hl.g11plus, cplx(0.0));
}

TEST(Greens, SigmaIdentity) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto w = random_omegas(rng, 50);
    const cplx z{std::uniform_real_distribution<double>(-3, 4)(rng), std::uniform_real_distribution<double>(1e-3, 1)(rng)};
    const auto hl = halfline_cf(w, z);
    EXPECT_NEAR(std::abs(-hl.sigma - (w[0] - z - hl.g11plus)), 0.0, 1e-12 * std::max(1.0, std::abs(hl.sigma)));
  }
}

TEST(Greens, ContinuedFractionMatchesPathSolve) {
  std::mt19937_64 rng(3);
  const auto w = random_omegas(rng, 40);
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < 40; ++i) {
    trips.emplace_back(i, i, w[static_cast<std::size_t>(i)]);
    if (i + 1 < 40) {
      trips.emplace_back(i, i + 1, -1.0);
      trips.emplace_back(i + 1, i, -1.0);
    }
  }
  SparseReal m(40, 40);
  m.setFromTriplets(trips.begin(), trips.end());
  const cplx z{0.7, 0.05};
  ResolventSolver s(m);
  EXPECT_NEAR(std::abs(s.column(0, z)(0) - halfline_cf(w, z).g00), 0.0, 1e-10);
}

TEST(Greens, CornerDecoupledLimit) {
  std::mt19937_64 rng(4);
  const auto w = random_omegas(rng, 30);
  const cplx z{0.4, 0.1};
  const cplx a = corner_coefficient(w, z);
  EXPECT_NEAR(std::abs(sym_corner_formula(w, 1e-7, z) - 1.0 / a), 0.0, 1e-10);
  EXPECT_NEAR(std::abs(1.0 / a - halfline_cf(w, z).g00), 0.0, 1e-12);
}

TEST(Greens, CornerMatchesTruncation) {
  std::vector<double> zero(200, 0.0);
  const auto h = make_h({ModelKind::Sym, 0.5, 1, 200, 200}, 1, 0.0);
  const cplx z{0.3, 0.05};
  const cplx g = greens_entry(h, {0, 0}, {0, 0}, z);
  EXPECT_NEAR(std::abs(sym_corner_formula(zero, 0.5, z) - g), 0.0, 1e-4);
}

TEST(Greens, CornerHerglotzAndResidual) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ug(1e-3, 3.0), ue(-5, 6), ueta(1e-4, 2.0);
  for (int t = 0; t < 1000; ++t) {
    const auto w = random_omegas(rng, 20, 2.0);
    const double gamma = ug(rng);
    const cplx z{ue(rng), ueta(rng)};
    const cplx g = sym_corner_formula(w, gamma, z);
    EXPECT_GT(g.imag(), 0.0);
    const cplx a = corner_coefficient(w, z);
    EXPECT_LE(corner_quadratic_residual(g, a, gamma), 1e-12 * std::max(1.0, std::abs(a) * std::abs(g)));
  }
}

TEST(Greens, FeenbergDiagDiagonalEdge) {
  for (int ell : {1, 2, 3}) {
    const auto h = make_h({ModelKind::Diag, 0.3, ell, 12, 4 * ell + 3}, 7 + ell);
    const double r = feenberg_check(h, {0, ell - 1}, {1, ell}, {0, 0}, {1, ell}, {0.5, 0.05});
    EXPECT_LT(r, 1e-8) << "ell=" << ell;
    const auto t = feenberg_terms(h.matrix(), h.lattice().index_of({0, ell - 1}), h.lattice().index_of({1, ell}),
                                  0, h.lattice().index_of({1, ell}), {0.5, 0.05});
    EXPECT_GT(std::abs(t.full), 1e-6);
  }
}

TEST(Greens, FeenbergSymSpine) {
  const auto h = make_h({ModelKind::Sym, 0.5, 1, 40, 40}, 21);
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> pick(0, 38);
  const cplx z{0.9, 0.1};
  const auto g = dense_resolvent(h, z);
  for (int t = 0; t < 5; ++t) {
    const int b = pick(rng);
    const Vertex v{std::uniform_int_distribution<int>(0, 39)(rng), std::uniform_int_distribution<int>(b + 1, 39)(rng)};
    const Vertex u{std::uniform_int_distribution<int>(0, 39)(rng), std::uniform_int_distribution<int>(0, b)(rng)};
    const auto terms = feenberg_terms(h.matrix(), h.lattice().index_of({0, b}), h.lattice().index_of({0, b + 1}),
                                      h.lattice().index_of(u), h.lattice().index_of(v), z);
    EXPECT_NEAR(std::abs(terms.full - g(h.lattice().index_of(u), h.lattice().index_of(v))), 0.0, 1e-10);
    EXPECT_LT(terms.residual, 1e-8);
  }
}

TEST(Greens, FeenbergRejectsNonBridge) {
  // A cycle: 4-site ring
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < 4; ++i) {
    trips.emplace_back(i, (i + 1) % 4, -1.0);
    trips.emplace_back((i + 1) % 4, i, -1.0);
  }
  SparseReal m(4, 4);
  m.setFromTriplets(trips.begin(), trips.end());
  EXPECT_THROW(feenberg_terms(m, 0, 1, 0, 1, {0.0, 0.5}), ValidationError);
  const auto h = make_h({ModelKind::Sym, 0.5, 1, 5, 5}, 1);
  // horizontal edge of a row is a bridge, but v must sit on the far side
  EXPECT_THROW(feenberg_check(h, {1, 2}, {2, 2}, {3, 2}, {4, 2}, {0.0, 0.5}), ValidationError);
  EXPECT_THROW(feenberg_check(h, {1, 2}, {3, 2}, {0, 0}, {4, 2}, {0.0, 0.5}), ValidationError);
}

TEST(Greens, DecoupledEdgeGivesZero) {
  // the Sym box with the spine edge (0,1)-(0,2) removed: no path between the halves
  const auto h = make_h({ModelKind::Sym, 0.5, 1, 6, 5}, 1);
  SparseReal m = h.matrix();
  const int a = h.lattice().index_of({0, 1}), b = h.lattice().index_of({0, 2});
  m.coeffRef(a, b) = 0.0;
  m.coeffRef(b, a) = 0.0;
  ResolventSolver s(m);
  const auto col = s.column(0, {0.1, 0.2});
  EXPECT_EQ(col(h.lattice().index_of({3, 4})), cplx(0.0));
  EXPECT_THROW(feenberg_terms(m, a, b, 0, b, {0.1, 0.2}), ValidationError);
}

TEST(Greens, TruncationConvergenceMonitored) {
  DisorderSpec d;
  d.seed = 5;
  const auto s = sample_disorder(d, 40);
  const cplx z{0.6, 0.1};
  std::vector<double> errs;
  for (int rows : {10, 20, 40, 80}) {
    auto lat = std::make_shared<const LatticeOperator>(build_lattice({ModelKind::Sym, 0.5, 1, 40, rows}));
    const Hamiltonian h(lat, s);
    errs.push_back(std::abs(greens_entry(h, {0, 0}, {0, 0}, z) - sym_corner_formula(s.omegas, 0.5, z)));
  }
  EXPECT_LT(errs.back(), errs.front());
  EXPECT_LT(errs.back(), 1e-4);
}

TEST(Greens, HalflineMeasureTransform) {
  std::mt19937_64 rng(7);
  const auto w = random_omegas(rng, 25);
  const auto m = halfline_site1_measure(w);
  EXPECT_NEAR(m.total_mass(), 1.0, 1e-12);
  const cplx z{0.3, 0.2};
  EXPECT_NEAR(std::abs(boole::borel_transform(m, z) - halfline_cf(w, z).g11plus), 0.0, 1e-12);
}

TEST(Greens, TreeEliminationMatchesLU) {
  for (const GraphSpec& g : {GraphSpec{ModelKind::Sym, 0.5, 1, 9, 7}, GraphSpec{ModelKind::Diag, 0.01, 2, 12, 20}}) {
    auto lat = std::make_shared<const LatticeOperator>(build_lattice(g));
    DisorderSpec d;
    d.seed = 21;
    d.omega_max = 3.0;
    const Hamiltonian h(lat, sample_disorder(d, g.cols));
    ASSERT_TRUE(TreeResolvent::is_tree(h.matrix()));
    TreeResolvent tree(h.matrix());
    ResolventSolver lu(h.matrix());
    for (int v : {0, lat->size() / 2, lat->size() - 1})
      for (cplx z : {cplx(0.3, 1e-3), cplx(-2.5, 0.5), cplx(4.0, 1e-5)}) {
        const auto a = tree.column(v, z);
        const auto b = lu.column(v, z);
        EXPECT_LT((a - b).norm(), 1e-10 * b.norm());
      }
    EXPECT_THROW((void)tree.column(0, cplx(0.0, 0.0)), ValidationError);
  }
}

TEST(Greens, TreeEliminationRejectsCycles) {
  SparseReal m(4, 4);
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < 4; ++i) {
    t.emplace_back(i, (i + 1) % 4, -1.0);
    t.emplace_back((i + 1) % 4, i, -1.0);
  }
  m.setFromTriplets(t.begin(), t.end());
  EXPECT_FALSE(TreeResolvent::is_tree(m));
  EXPECT_THROW(TreeResolvent{m}, ValidationError);
}
