#pragma once

// Discrete Laplacian and forward-difference gradient on the interior lattice,
// both as direct stencils and as assembled N x N matrices:
//
//   (Delta^n u)(x)   = n^2 sum_i [u(x + e_i/n) + u(x - e_i/n) - 2 u(x)]
//   (grad^n_i v)(x)  = n [v(x + e_i/n) - v(x)]
//
// with zero Dirichlet values outside the grid. The matrix A realises Delta^n,
// B realises sum_i grad^n_i acting on the squared field.

#include <algorithm>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lattice_burgers/error.hpp"
#include "lattice_burgers/grid.hpp"

namespace lattice_burgers {

class LatticeField {
 public:
  explicit LatticeField(GridSpec grid) : grid_(grid), values_(grid.N(), 0.0) {}
  LatticeField(GridSpec grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.N())
      throw Error(ErrorKind::shape, "field has " + std::to_string(values_.size()) + " values, grid has " +
                                        std::to_string(grid_.N()) + " nodes");
  }

  const GridSpec& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return values_.size(); }

  /// Value at linear node index i in {1, ..., N}.
  double operator()(std::size_t i) const { return values_.at(i - 1); }
  double& operator()(std::size_t i) { return values_.at(i - 1); }
  double operator()(const MultiIndex& k) const { return values_[to_linear(k, grid_) - 1]; }

  /// Values in linear-index order.
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  friend bool operator==(const LatticeField&, const LatticeField&) = default;

 private:
  GridSpec grid_;
  std::vector<double> values_;
};

namespace detail {

// Visits every interior node as (storage offset, 0-based per-axis coordinates).
template <typename Visitor>
void for_each_node(const GridSpec& g, Visitor&& visit) {
  std::vector<int> c(static_cast<std::size_t>(g.d()), 0);
  for (std::size_t offset = 0; offset < g.N(); ++offset) {
    visit(offset, std::span<const int>(c));
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (++c[j] < g.side()) break;
      c[j] = 0;
    }
  }
}

inline void require_grid(const LatticeField& u, const GridSpec& g) {
  if (!(u.grid() == g)) throw Error(ErrorKind::shape, "field and operator are defined on different grids");
}

}  // namespace detail

inline LatticeField apply_laplacian(const LatticeField& u) {
  const GridSpec& g = u.grid();
  const double n2 = static_cast<double>(g.n()) * g.n();
  const auto in = u.values();
  LatticeField out(g);
  auto res = out.values();
  detail::for_each_node(g, [&](std::size_t offset, std::span<const int> c) {
    double acc = 0.0;
    for (int axis = 1; axis <= g.d(); ++axis) {
      const std::size_t s = g.stride(axis);
      const int cj = c[static_cast<std::size_t>(axis - 1)];
      const double up = cj + 1 < g.side() ? in[offset + s] : 0.0;
      const double down = cj > 0 ? in[offset - s] : 0.0;
      acc += up + down - 2.0 * in[offset];
    }
    res[offset] = n2 * acc;
  });
  return out;
}

/// sum_i n [u(x + e_i/n)^2 - u(x)^2] at every node.
inline LatticeField apply_gradient_sq(const LatticeField& u) {
  const GridSpec& g = u.grid();
  const double n = g.n();
  const auto in = u.values();
  LatticeField out(g);
  auto res = out.values();
  detail::for_each_node(g, [&](std::size_t offset, std::span<const int> c) {
    double acc = 0.0;
    const double here = in[offset] * in[offset];
    for (int axis = 1; axis <= g.d(); ++axis) {
      const int cj = c[static_cast<std::size_t>(axis - 1)];
      const double up = cj + 1 < g.side() ? in[offset + g.stride(axis)] : 0.0;
      acc += up * up - here;
    }
    res[offset] = n * acc;
  });
  return out;
}

/// Adjoint of the summed forward difference: sum_i n [phi(x - e_i/n) - phi(x)].
/// Satisfies <B v, phi> = <v, adjoint(phi)> for the lattice inner product.
inline LatticeField apply_gradient_adjoint(const LatticeField& phi) {
  const GridSpec& g = phi.grid();
  const double n = g.n();
  const auto in = phi.values();
  LatticeField out(g);
  auto res = out.values();
  detail::for_each_node(g, [&](std::size_t offset, std::span<const int> c) {
    double acc = 0.0;
    for (int axis = 1; axis <= g.d(); ++axis) {
      const int cj = c[static_cast<std::size_t>(axis - 1)];
      const double down = cj > 0 ? in[offset - g.stride(axis)] : 0.0;
      acc += down - in[offset];
    }
    res[offset] = n * acc;
  });
  return out;
}

struct Triplet {
  std::size_t row;  // 0-based
  std::size_t col;  // 0-based
  double value;
};

/// Compressed-row sparse matrix. Duplicate triplets are summed and exact
/// zeros dropped at construction.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols, std::vector<Triplet> triplets) : rows_(rows), cols_(cols) {
    for (const auto& t : triplets) {
      if (t.row >= rows || t.col >= cols) throw Error(ErrorKind::shape, "triplet outside matrix bounds");
    }
    std::sort(triplets.begin(), triplets.end(),
              [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    row_start_.assign(rows + 1, 0);
    for (std::size_t k = 0; k < triplets.size();) {
      const std::size_t r = triplets[k].row;
      const std::size_t c = triplets[k].col;
      double v = 0.0;
      for (; k < triplets.size() && triplets[k].row == r && triplets[k].col == c; ++k) v += triplets[k].value;
      if (v != 0.0) {
        cols_idx_.push_back(c);
        values_.push_back(v);
        ++row_start_[r + 1];
      }
    }
    for (std::size_t r = 0; r < rows; ++r) row_start_[r + 1] += row_start_[r];
  }

  static SparseMatrix identity(std::size_t size, double scale = 1.0) {
    std::vector<Triplet> t;
    t.reserve(size);
    for (std::size_t i = 0; i < size; ++i) t.push_back({i, i, scale});
    return SparseMatrix(size, size, std::move(t));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nonzeros() const noexcept { return values_.size(); }

  /// 0-based entry lookup.
  double coeff(std::size_t r, std::size_t c) const {
    for (std::size_t k = row_start_.at(r); k < row_start_[r + 1]; ++k)
      if (cols_idx_[k] == c) return values_[k];
    return 0.0;
  }

  template <typename Visitor>
  void for_each_in_row(std::size_t r, Visitor&& visit) const {
    for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) visit(cols_idx_[k], values_[k]);
  }

  std::vector<Triplet> triplets() const {
    std::vector<Triplet> t;
    t.reserve(values_.size());
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) t.push_back({r, cols_idx_[k], values_[k]});
    return t;
  }

  void multiply(std::span<const double> x, std::span<double> y) const {
    for (std::size_t r = 0; r < rows_; ++r) {
      double acc = 0.0;
      for (std::size_t k = row_start_[r]; k < row_start_[r + 1]; ++k) acc += values_[k] * x[cols_idx_[k]];
      y[r] = acc;
    }
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    for (const auto& t : triplets()) m(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col)) = t.value;
    return m;
  }

  friend SparseMatrix operator+(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_) throw Error(ErrorKind::shape, "matrix sum of mismatched shapes");
    auto t = a.triplets();
    auto tb = b.triplets();
    t.insert(t.end(), tb.begin(), tb.end());
    return SparseMatrix(a.rows_, a.cols_, std::move(t));
  }

  /// Kronecker product; `outer` indexes blocks, `inner` the entries inside.
  friend SparseMatrix kron(const SparseMatrix& outer, const SparseMatrix& inner) {
    std::vector<Triplet> t;
    t.reserve(outer.nonzeros() * inner.nonzeros());
    for (const auto& o : outer.triplets())
      for (const auto& i : inner.triplets())
        t.push_back({o.row * inner.rows_ + i.row, o.col * inner.cols_ + i.col, o.value * i.value});
    return SparseMatrix(outer.rows_ * inner.rows_, outer.cols_ * inner.cols_, std::move(t));
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_start_{0};
  std::vector<std::size_t> cols_idx_;
  std::vector<double> values_;
};

enum class OperatorKind { laplacian, gradient };

class OperatorMatrix {
 public:
  OperatorMatrix(GridSpec grid, OperatorKind kind, SparseMatrix entries)
      : grid_(grid), kind_(kind), entries_(std::move(entries)) {
    if (entries_.rows() != grid_.N() || entries_.cols() != grid_.N())
      throw Error(ErrorKind::shape, "operator matrix size does not match the grid");
  }

  const GridSpec& grid() const noexcept { return grid_; }
  OperatorKind kind() const noexcept { return kind_; }
  const SparseMatrix& entries() const noexcept { return entries_; }

  /// Entry at 1-based (i, j).
  double operator()(std::size_t i, std::size_t j) const { return entries_.coeff(i - 1, j - 1); }

  void apply(std::span<const double> x, std::span<double> y) const { entries_.multiply(x, y); }

  LatticeField apply(const LatticeField& u) const {
    detail::require_grid(u, grid_);
    LatticeField out(grid_);
    entries_.multiply(u.values(), out.values());
    return out;
  }

  Eigen::MatrixXd dense() const { return entries_.dense(); }

 private:
  GridSpec grid_;
  OperatorKind kind_;
  SparseMatrix entries_;
};

/// One-dimensional tridiagonal A_n^(1): -2n^2 on the diagonal, n^2 beside it.
inline SparseMatrix laplacian_1d(int n) {
  const auto m = static_cast<std::size_t>(n - 1);
  const double n2 = static_cast<double>(n) * n;
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < m; ++i) {
    t.push_back({i, i, -2.0 * n2});
    if (i + 1 < m) {
      t.push_back({i, i + 1, n2});
      t.push_back({i + 1, i, n2});
    }
  }
  return SparseMatrix(m, m, std::move(t));
}

/// One-dimensional B_n^(1): -n on the diagonal, n on the superdiagonal.
inline SparseMatrix gradient_1d(int n) {
  const auto m = static_cast<std::size_t>(n - 1);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < m; ++i) {
    t.push_back({i, i, -static_cast<double>(n)});
    if (i + 1 < m) t.push_back({i, i + 1, static_cast<double>(n)});
  }
  return SparseMatrix(m, m, std::move(t));
}

/// A_n^(d) as the d-fold Kronecker sum of A_n^(1). Axis 1 varies fastest, so
/// A^(d) = I_{n-1} (x) A^(d-1) + A^(1) (x) I_M with M = (n-1)^(d-1).
inline OperatorMatrix build_A(const GridSpec& g) {
  const SparseMatrix a1 = laplacian_1d(g.n());
  const auto side = static_cast<std::size_t>(g.side());
  SparseMatrix a = a1;
  std::size_t block = side;
  for (int dim = 2; dim <= g.d(); ++dim) {
    a = kron(SparseMatrix::identity(side), a) + kron(a1, SparseMatrix::identity(block));
    block *= side;
  }
  return OperatorMatrix(g, OperatorKind::laplacian, std::move(a));
}

/// B_n^(d) by the block recurrence: B^(d-1) on the diagonal blocks, n I_M on
/// the block superdiagonal, minus n I_N.
inline OperatorMatrix build_B(const GridSpec& g) {
  const auto side = static_cast<std::size_t>(g.side());
  const double n = g.n();
  SparseMatrix b = gradient_1d(g.n());
  std::size_t block = side;
  for (int dim = 2; dim <= g.d(); ++dim) {
    std::vector<Triplet> shift;
    for (std::size_t i = 0; i + 1 < side; ++i) shift.push_back({i, i + 1, 1.0});
    const SparseMatrix super(side, side, std::move(shift));
    b = kron(SparseMatrix::identity(side), b) + kron(super, SparseMatrix::identity(block, n)) +
        SparseMatrix::identity(block * side, -n);
    block *= side;
  }
  return OperatorMatrix(g, OperatorKind::gradient, std::move(b));
}

/// Pre-allocated evaluation of A u + 1/2 B (u o u).
class DriftEvaluator {
 public:
  DriftEvaluator(const OperatorMatrix& A, const OperatorMatrix& B, bool include_burgers = true)
      : A_(&A), B_(&B), burgers_(include_burgers), square_(A.grid().N()), scratch_(A.grid().N()) {
    if (!(A.grid() == B.grid())) throw Error(ErrorKind::shape, "A and B are built on different grids");
  }

  const GridSpec& grid() const noexcept { return A_->grid(); }

  void operator()(std::span<const double> u, std::span<double> out) {
    A_->apply(u, out);
    if (!burgers_) return;
    for (std::size_t i = 0; i < u.size(); ++i) square_[i] = u[i] * u[i];
    B_->apply(square_, scratch_);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] += 0.5 * scratch_[i];
  }

 private:
  const OperatorMatrix* A_;
  const OperatorMatrix* B_;
  bool burgers_;
  std::vector<double> square_;
  std::vector<double> scratch_;
};

inline LatticeField drift(const LatticeField& u, const OperatorMatrix& A, const OperatorMatrix& B) {
  detail::require_grid(u, A.grid());
  detail::require_grid(u, B.grid());
  DriftEvaluator eval(A, B);
  LatticeField out(u.grid());
  eval(u.values(), out.values());
  return out;
}

/// Coordinate format, one "row col value" line per stored entry, 1-based.
inline void write_coordinate(std::ostream& os, const OperatorMatrix& m) {
  const auto old = os.precision(17);
  for (const auto& t : m.entries().triplets()) os << t.row + 1 << ' ' << t.col + 1 << ' ' << t.value << '\n';
  os.precision(old);
}

}  // namespace lattice_burgers
