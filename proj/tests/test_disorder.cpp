#include <sstream>

#include <gtest/gtest.h>

#include "corrlab/disorder.hpp"
#include "corrlab/linalg.hpp"

using namespace corrlab;

TEST(Disorder, ZeroWidthIsZero) {
  DisorderSpec d;
  d.omega_max = 0.0;
  const auto s = sample_disorder(d, 17);
  for (double w : s.omegas) EXPECT_EQ(w, 0.0);
}

TEST(Disorder, Deterministic) {
  DisorderSpec d;
  d.seed = 42;
  d.realization_index = 7;
  EXPECT_EQ(sample_disorder(d, 100).omegas, sample_disorder(d, 100).omegas);
  EXPECT_NE(sample_disorder(d, 100).omegas, sample_disorder(d.with_realization(8), 100).omegas);
  DisorderSpec e = d;
  e.seed = 43;
  EXPECT_NE(sample_disorder(d, 100).omegas, sample_disorder(e, 100).omegas);
}

TEST(Disorder, UniformLawOfLargeNumbers) {
  DisorderSpec d;
  d.seed = 2024;
  const auto s = sample_disorder(d, 100000);
  double mean = 0.0, mx = 0.0, mn = 1.0;
  for (double w : s.omegas) {
    mean += w;
    mx = std::max(mx, w);
    mn = std::min(mn, w);
  }
  mean /= 1e5;
  EXPECT_NEAR(mean, 0.5, 0.01);
  EXPECT_LE(mx, 1.0);
  EXPECT_GE(mn, 0.0);
}

TEST(Disorder, CustomDensity) {
  DisorderSpec d;
  d.distribution = Distribution::Custom;
  d.omega_max = 2.0;
  d.density_bins = {0.0, 1.0, 0.0, 3.0};  // mass 1/4 on [0.5,1), 3/4 on [1.5,2]
  d.seed = 5;
  EXPECT_DOUBLE_EQ(d.rho_sup(), 3.0 / (4.0 * 0.5));
  const auto s = sample_disorder(d, 40000);
  int low = 0;
  for (double w : s.omegas) {
    EXPECT_TRUE((w >= 0.5 && w <= 1.0) || (w >= 1.5 && w <= 2.0)) << w;
    low += w < 1.25;
  }
  EXPECT_NEAR(low / 40000.0, 0.25, 0.01);
}

TEST(Disorder, InvalidSpecs) {
  DisorderSpec d;
  d.omega_max = -1.0;
  EXPECT_THROW(sample_disorder(d, 3), ValidationError);
  d.omega_max = 1.0;
  EXPECT_THROW(sample_disorder(d, 0), ValidationError);
  d.distribution = Distribution::Custom;
  EXPECT_THROW(sample_disorder(d, 3), ValidationError);
  d.density_bins = {0.0, 0.0};
  EXPECT_THROW(sample_disorder(d, 3), ValidationError);
  d.density_bins = {1.0, -1.0};
  EXPECT_THROW(sample_disorder(d, 3), ValidationError);
}

TEST(Disorder, RhoSup) {
  DisorderSpec d;
  d.omega_max = 4.0;
  EXPECT_DOUBLE_EQ(d.rho_sup(), 0.25);
}

TEST(Disorder, ZeroPotentialGivesMinusAdjacency) {
  auto lat = std::make_shared<const LatticeOperator>(build_lattice({ModelKind::Diag, 0.37, 2, 5, 7}));
  DisorderSpec d;
  d.omega_max = 0.0;
  const Hamiltonian h(lat, sample_disorder(d, 5));
  EXPECT_EQ((Eigen::SparseMatrix<double>(h.matrix()) + Eigen::SparseMatrix<double>(lat->adjacency())).norm(), 0.0);
}

TEST(Disorder, ColumnConstancy) {
  for (auto kind : {ModelKind::Sym, ModelKind::Diag}) {
    auto lat = std::make_shared<const LatticeOperator>(build_lattice({kind, 0.5, 3, 8, 12}));
    DisorderSpec d;
    d.seed = 11;
    const auto s = sample_disorder(d, 8);
    const Hamiltonian h(lat, s);
    for (int i = 0; i < lat->size(); ++i)
      EXPECT_EQ(h.matrix().coeff(i, i), s.omegas[static_cast<std::size_t>(lat->vertex_at(i).n1)]);
  }
}

TEST(Disorder, LengthMismatchRejected) {
  auto lat = std::make_shared<const LatticeOperator>(build_lattice({ModelKind::Sym, 0.5, 1, 8, 4}));
  DisorderSpec d;
  EXPECT_THROW(Hamiltonian(lat, sample_disorder(d, 7)), ValidationError);
  EXPECT_NO_THROW(Hamiltonian(lat, sample_disorder(d, 9)));
}

TEST(Disorder, SymSpectrumEnclosedDense) {
  auto lat = std::make_shared<const LatticeOperator>(build_lattice({ModelKind::Sym, 0.5, 1, 40, 40}));
  DisorderSpec d;
  d.seed = 99;
  const Hamiltonian h(lat, sample_disorder(d, 40));
  const auto ev = dense_eigenvalues(h.dense());
  EXPECT_GE(ev.minCoeff(), -2.0 - 1.0 - 1e-9);
  EXPECT_LE(ev.maxCoeff(), 2.0 + 1.0 + 1.0 + 1e-9);
  EXPECT_LE(std::max(-ev.minCoeff(), ev.maxCoeff()), h.norm_bound() + 1e-9);
  const Eigen::MatrixXd m = h.dense();
  EXPECT_EQ((m - m.transpose()).norm(), 0.0);
}

TEST(Disorder, CsvFormat) {
  DisorderSample s{{0.25, 1.0}, {}};
  std::ostringstream os;
  write_disorder_csv(os, s);
  EXPECT_EQ(os.str(), "n1,omega\n0,0.25\n1,1\n");
}
