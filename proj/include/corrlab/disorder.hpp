#pragma once

// Column-constant random potential V(n1, n2) = omega(n1) and the Hamiltonian
// H = -A + V built on top of a LatticeOperator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "corrlab/core.hpp"
#include "corrlab/lattice.hpp"

namespace corrlab {

enum class Distribution { Uniform, Custom };

struct DisorderSpec {
  Distribution distribution = Distribution::Uniform;
  double omega_max = 1.0;
  // Custom only: piecewise-constant density heights on equal bins of [0, omega_max].
  // Need not be normalized.
  std::vector<double> density_bins;
  std::uint64_t seed = 0;
  std::uint64_t realization_index = 0;

  void validate() const {
    require(std::isfinite(omega_max) && omega_max >= 0.0, "omega_max must be finite and >= 0");
    if (distribution == Distribution::Custom) {
      require(!density_bins.empty(), "custom density needs at least one bin");
      double total = 0.0;
      for (double b : density_bins) {
        require(std::isfinite(b) && b >= 0.0, "custom density bins must be finite and >= 0");
        total += b;
      }
      require(total > 0.0, "custom density must have positive mass");
      require(omega_max > 0.0, "custom density needs omega_max > 0");
    }
  }

  /// sup-norm of the single-site density; +inf for the point mass omega_max = 0.
  [[nodiscard]] double rho_sup() const {
    if (omega_max == 0.0) return std::numeric_limits<double>::infinity();
    if (distribution == Distribution::Uniform) return 1.0 / omega_max;
    const double total = std::accumulate(density_bins.begin(), density_bins.end(), 0.0);
    const double width = omega_max / static_cast<double>(density_bins.size());
    return *std::max_element(density_bins.begin(), density_bins.end()) / (total * width);
  }

  [[nodiscard]] DisorderSpec with_realization(std::uint64_t k) const {
    DisorderSpec s = *this;
    s.realization_index = k;
    return s;
  }
};

/// Engine for realization k of a seeded experiment. Streams are a pure
/// function of (seed, k), so realizations can be drawn in any order.
inline std::mt19937_64 realization_engine(std::uint64_t seed, std::uint64_t k) {
  return std::mt19937_64(mix64(seed ^ mix64(k + 0x632be59bd9b4e019ULL)));
}

/// Uniform double in [0, 1) from the top 53 bits; portable across standard libraries.
inline double unit_uniform(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

struct DisorderSample {
  std::vector<double> omegas;  // one value per column n1
  DisorderSpec spec;
};

inline DisorderSample sample_disorder(const DisorderSpec& spec, int cols) {
  spec.validate();
  require(cols >= 1, "cols must be >= 1");
  DisorderSample out{std::vector<double>(static_cast<std::size_t>(cols), 0.0), spec};
  auto eng = realization_engine(spec.seed, spec.realization_index);
  if (spec.distribution == Distribution::Uniform) {
    for (auto& w : out.omegas) w = spec.omega_max * unit_uniform(eng);
    return out;
  }
  // inverse CDF of the piecewise-constant density
  const auto& bins = spec.density_bins;
  std::vector<double> cdf(bins.size() + 1, 0.0);
  for (std::size_t b = 0; b < bins.size(); ++b) cdf[b + 1] = cdf[b] + bins[b];
  for (auto& c : cdf) c /= cdf.back();
  const double width = spec.omega_max / static_cast<double>(bins.size());
  for (auto& w : out.omegas) {
    const double u = unit_uniform(eng);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t b = static_cast<std::size_t>(std::distance(cdf.begin(), it)) - 1;
    b = std::min(b, bins.size() - 1);
    while (bins[b] == 0.0 && b + 1 < bins.size()) ++b;
    const double frac = (u - cdf[b]) / (cdf[b + 1] - cdf[b]);
    w = std::clamp((static_cast<double>(b) + frac) * width, 0.0, spec.omega_max);
  }
  return out;
}

/// CSV "n1,omega" for reproducibility audits.
inline void write_disorder_csv(std::ostream& os, const DisorderSample& s) {
  char buf[64];
  os << "n1,omega\n";
  for (std::size_t i = 0; i < s.omegas.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, s.omegas[i]);
    os << buf;
  }
}

/// H = -A + V with V(n1, n2) = omega(n1). The potential is only reachable
/// through the per-column sample, so column constancy cannot be broken.
class Hamiltonian {
 public:
  Hamiltonian(std::shared_ptr<const LatticeOperator> lattice, DisorderSample sample)
      : lattice_(std::move(lattice)), sample_(std::move(sample)) {
    require(lattice_ != nullptr, "Hamiltonian needs a lattice");
    require(static_cast<int>(sample_.omegas.size()) >= lattice_->spec().cols,
            "disorder sample has " + std::to_string(sample_.omegas.size()) + " columns, lattice needs " +
                std::to_string(lattice_->spec().cols));
    const int n = lattice_->size();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) + 2 * lattice_->edges().size());
    for (int i = 0; i < n; ++i) trips.emplace_back(i, i, potential(lattice_->vertex_at(i)));
    for (const auto& e : lattice_->edges()) {
      trips.emplace_back(e.i, e.j, -e.w);
      trips.emplace_back(e.j, e.i, -e.w);
    }
    matrix_.resize(n, n);
    matrix_.setFromTriplets(trips.begin(), trips.end());
    matrix_.makeCompressed();
  }

  [[nodiscard]] const LatticeOperator& lattice() const { return *lattice_; }
  [[nodiscard]] std::shared_ptr<const LatticeOperator> lattice_ptr() const { return lattice_; }
  [[nodiscard]] const DisorderSample& sample() const { return sample_; }
  [[nodiscard]] const SparseReal& matrix() const { return matrix_; }
  [[nodiscard]] int size() const { return lattice_->size(); }
  [[nodiscard]] double potential(Vertex v) const { return sample_.omegas[static_cast<std::size_t>(v.n1)]; }

  [[nodiscard]] Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix_); }

  /// Operator-norm bound 2 + 2 gamma + omega_max (sample maximum used for omega_max).
  [[nodiscard]] double norm_bound() const {
    const double wmax = *std::max_element(sample_.omegas.begin(),
                                          sample_.omegas.begin() + lattice_->spec().cols);
    return 2.0 + 2.0 * lattice_->spec().gamma + std::max(wmax, sample_.spec.omega_max);
  }

 private:
  std::shared_ptr<const LatticeOperator> lattice_;
  DisorderSample sample_;
  SparseReal matrix_;
};

inline Hamiltonian assemble(const LatticeOperator& lattice, const DisorderSample& sample) {
  return Hamiltonian(std::make_shared<const LatticeOperator>(lattice), sample);
}

inline Hamiltonian assemble(std::shared_ptr<const LatticeOperator> lattice, const DisorderSample& sample) {
  return Hamiltonian(std::move(lattice), sample);
}

}  // namespace corrlab
