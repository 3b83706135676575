#pragma once

// Finite-volume weighted adjacency operators for the two comb-like graphs:
//
//   Sym  - every horizontal row {n2 = const} is a half-line path, and the rows
//          are stacked along column 0 with vertical hopping gamma.
//   Diag - the rows are stacked along a staircase walk that climbs `ell`
//          sites vertically in column n1 and then steps diagonally (weight
//          gamma) into column n1 + 1.
//
// Truncation drops every edge that leaves the box (Dirichlet restriction).

#include <algorithm>
#include <cstdio>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SparseCore>

#include "corrlab/core.hpp"

namespace corrlab {

enum class ModelKind { Sym, Diag };

inline std::string to_string(ModelKind k) { return k == ModelKind::Sym ? "Sym" : "Diag"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "Sym" || s == "sym") return ModelKind::Sym;
  if (s == "Diag" || s == "diag") return ModelKind::Diag;
  throw ValidationError("unknown model kind '" + s + "' (expected Sym or Diag)");
}

struct GraphSpec {
  ModelKind kind = ModelKind::Sym;
  double gamma = 0.5;  // vertical (Sym) or diagonal (Diag) hopping
  int ell = 1;         // Diag vertical segment length; ignored for Sym
  int cols = 2;        // n1 in [0, cols)
  int rows = 2;        // n2 in [0, rows)

  void validate() const {
    require(gamma > 0.0, "gamma must be positive");
    require(ell >= 1, "ell must be >= 1");
    require(cols >= 2, "cols must be >= 2");
    require(rows >= 2, "rows must be >= 2");
    if (kind == ModelKind::Diag) require(rows >= ell, "Diag requires rows >= ell");
  }

  /// Is (n1, n2) a vertex of the truncated graph?
  [[nodiscard]] bool in_vertex_set(Vertex v) const {
    if (v.n1 < 0 || v.n2 < 0 || v.n1 >= cols || v.n2 >= rows) return false;
    return kind == ModelKind::Sym || v.n1 >= v.n2 / ell;
  }
};

struct Edge {
  int i = 0;  // i < j
  int j = 0;
  double w = 0.0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

using SparseReal = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class LatticeOperator {
 public:
  [[nodiscard]] const GraphSpec& spec() const { return spec_; }
  [[nodiscard]] int size() const { return static_cast<int>(vertices_.size()); }
  [[nodiscard]] const std::vector<Vertex>& vertices() const { return vertices_; }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }
  [[nodiscard]] const SparseReal& adjacency() const { return adj_; }

  [[nodiscard]] std::optional<int> find(Vertex v) const {
    if (v.n1 < 0 || v.n2 < 0 || v.n1 >= spec_.cols || v.n2 >= spec_.rows) return std::nullopt;
    const int idx = table_[static_cast<std::size_t>(v.n2) * spec_.cols + v.n1];
    if (idx < 0) return std::nullopt;
    return idx;
  }

  [[nodiscard]] bool contains(Vertex v) const { return find(v).has_value(); }

  [[nodiscard]] int index_of(Vertex v) const {
    auto idx = find(v);
    if (!idx) throw ValidationError("vertex " + to_string(v) + " is not in the " + to_string(spec_.kind) + " vertex set");
    return *idx;
  }

  [[nodiscard]] Vertex vertex_at(int index) const {
    require(index >= 0 && index < size(), "vertex index " + std::to_string(index) + " out of range");
    return vertices_[static_cast<std::size_t>(index)];
  }

  /// Edge weight between two vertices, 0 if not adjacent.
  [[nodiscard]] double weight(Vertex a, Vertex b) const {
    auto ia = find(a), ib = find(b);
    if (!ia || !ib) return 0.0;
    return adj_.coeff(*ia, *ib);
  }

  /// The walk carrying the gamma edges: column 0 for Sym, the staircase for Diag.
  [[nodiscard]] std::vector<Vertex> spine() const {
    std::vector<Vertex> walk;
    if (spec_.kind == ModelKind::Sym) {
      for (int n2 = 0; n2 < spec_.rows; ++n2) walk.push_back({0, n2});
      return walk;
    }
    for (int n2 = 0; n2 < spec_.rows; ++n2) {
      Vertex v{n2 / spec_.ell, n2};
      if (v.n1 >= spec_.cols) break;
      walk.push_back(v);
    }
    return walk;
  }

  friend LatticeOperator build_lattice(const GraphSpec& spec);

 private:
  GraphSpec spec_;
  std::vector<Vertex> vertices_;
  std::vector<int> table_;
  std::vector<Edge> edges_;
  SparseReal adj_;
};

namespace detail {

struct CoordEdge {
  Vertex a, b;
  double w;
};

inline std::vector<CoordEdge> sym_edges(const GraphSpec& s) {
  std::vector<CoordEdge> out;
  for (int n2 = 0; n2 < s.rows; ++n2) {
    for (int n1 = 0; n1 + 1 < s.cols; ++n1) out.push_back({{n1, n2}, {n1 + 1, n2}, 1.0});
    if (n2 + 1 < s.rows) out.push_back({{0, n2}, {0, n2 + 1}, s.gamma});
  }
  return out;
}

inline std::vector<CoordEdge> diag_edges(const GraphSpec& s) {
  std::vector<CoordEdge> out;
  const int l = s.ell;
  for (int n2 = 0; n2 < s.rows; ++n2) {
    for (int n1 = n2 / l; n1 + 1 < s.cols; ++n1) out.push_back({{n1, n2}, {n1 + 1, n2}, 1.0});
  }
  for (int n1 = 0; n1 < s.cols; ++n1) {
    // vertical segment n1*l <= n2 < (n1+1)*l - 1, column 0 included
    for (int n2 = n1 * l; n2 < (n1 + 1) * l - 1 && n2 + 1 < s.rows; ++n2)
      out.push_back({{n1, n2}, {n1, n2 + 1}, 1.0});
    const int top = (n1 + 1) * l;
    if (n1 + 1 < s.cols && top < s.rows) out.push_back({{n1, top - 1}, {n1 + 1, top}, s.gamma});
  }
  return out;
}

}  // namespace detail

inline LatticeOperator build_lattice(const GraphSpec& spec) {
  spec.validate();
  LatticeOperator op;
  op.spec_ = spec;
  op.table_.assign(static_cast<std::size_t>(spec.cols) * spec.rows, -1);
  // row-major by n2, then n1: origin gets index 0
  for (int n2 = 0; n2 < spec.rows; ++n2) {
    for (int n1 = 0; n1 < spec.cols; ++n1) {
      Vertex v{n1, n2};
      if (!spec.in_vertex_set(v)) continue;
      op.table_[static_cast<std::size_t>(n2) * spec.cols + n1] = static_cast<int>(op.vertices_.size());
      op.vertices_.push_back(v);
    }
  }

  auto coord = spec.kind == ModelKind::Sym ? detail::sym_edges(spec) : detail::diag_edges(spec);
  op.edges_.reserve(coord.size());
  for (const auto& e : coord) {
    int i = *op.find(e.a), j = *op.find(e.b);
    if (i > j) std::swap(i, j);
    op.edges_.push_back({i, j, e.w});
  }
  std::sort(op.edges_.begin(), op.edges_.end(),
            [](const Edge& x, const Edge& y) { return x.i != y.i ? x.i < y.i : x.j < y.j; });

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(2 * op.edges_.size());
  for (const auto& e : op.edges_) {
    trips.emplace_back(e.i, e.j, e.w);
    trips.emplace_back(e.j, e.i, e.w);
  }
  op.adj_.resize(op.size(), op.size());
  op.adj_.setFromTriplets(trips.begin(), trips.end());
  op.adj_.makeCompressed();
  return op;
}

inline LatticeOperator build_sym(GraphSpec spec) {
  require(spec.kind == ModelKind::Sym, "build_sym called with a Diag spec");
  return build_lattice(spec);
}

inline LatticeOperator build_diag(GraphSpec spec) {
  require(spec.kind == ModelKind::Diag, "build_diag called with a Sym spec");
  return build_lattice(spec);
}

/// Edge-list text format: one "i j w" line per undirected edge, i < j,
/// sorted by (i, j); w printed with 17 significant digits.
inline void write_edge_list(std::ostream& os, const LatticeOperator& op) {
  char buf[64];
  for (const auto& e : op.edges()) {
    std::snprintf(buf, sizeof buf, "%d %d %.17g\n", e.i, e.j, e.w);
    os << buf;
  }
}

inline std::string edge_list(const LatticeOperator& op) {
  std::ostringstream os;
  write_edge_list(os, op);
  return os.str();
}

}  // namespace corrlab
