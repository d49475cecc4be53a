#pragma once

// Interior lattice of the unit cube [0,1]^d with spacing 1/n.
//
// Nodes are x_k = (k_1/n, ..., k_d/n) with every k_j in {1, ..., n-1}. The
// linear numbering runs axis 1 fastest:
//
//   i = k_1 + (k_2 - 1)(n-1) + ... + (k_d - 1)(n-1)^(d-1),   i in {1, ..., N}
//
// Both multi-indices and linear indices are 1-based in this API. Storage in
// LatticeField and friends is the same order shifted to 0-based offsets.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lattice_burgers/error.hpp"

namespace lattice_burgers {

/// Upper bound on interior node count; larger grids raise a capacity error.
inline constexpr std::size_t kMaxNodes = std::size_t{1} << 24;

class GridSpec {
 public:
  GridSpec(int dim, int resolution) : d_(dim), n_(resolution) {
    if (dim < 1) throw Error(ErrorKind::parameter, "dimension d must be >= 1, got " + std::to_string(dim));
    if (resolution < 2) throw Error(ErrorKind::parameter, "resolution n must be >= 2, got " + std::to_string(resolution));
    std::size_t count = 1;
    const auto side = static_cast<std::size_t>(resolution - 1);
    for (int j = 0; j < dim; ++j) {
      if (side != 0 && count > kMaxNodes / side)
        throw Error(ErrorKind::capacity, "(n-1)^d exceeds the node budget of " + std::to_string(kMaxNodes));
      count *= side;
    }
    N_ = count;
  }

  int d() const noexcept { return d_; }
  int n() const noexcept { return n_; }
  /// Number of interior nodes, (n-1)^d.
  std::size_t N() const noexcept { return N_; }
  /// Nodes per axis, n-1.
  int side() const noexcept { return n_ - 1; }
  double spacing() const noexcept { return 1.0 / n_; }
  /// n^d, the inverse cell volume.
  double inv_cell_volume() const noexcept { return std::pow(static_cast<double>(n_), d_); }

  /// 0-based storage stride of axis `axis` (1-based), i.e. (n-1)^(axis-1).
  std::size_t stride(int axis) const noexcept {
    std::size_t s = 1;
    for (int j = 1; j < axis; ++j) s *= static_cast<std::size_t>(side());
    return s;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  int d_;
  int n_;
  std::size_t N_ = 0;
};

/// Grid multi-index (k_1, ..., k_d); components are 1-based node labels.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<int> components) : k_(std::move(components)) {}
  MultiIndex(std::initializer_list<int> components) : k_(components) {}

  std::size_t size() const noexcept { return k_.size(); }
  /// Component along `axis`, 1-based.
  int at(int axis) const { return k_.at(static_cast<std::size_t>(axis - 1)); }
  int& at(int axis) { return k_.at(static_cast<std::size_t>(axis - 1)); }
  std::span<const int> components() const noexcept { return k_; }

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

 private:
  std::vector<int> k_;
};

inline void validate(const MultiIndex& k, const GridSpec& g) {
  if (k.size() != static_cast<std::size_t>(g.d()))
    throw Error(ErrorKind::invalid_index, "multi-index has " + std::to_string(k.size()) +
                                              " components, grid dimension is " + std::to_string(g.d()));
  for (int axis = 1; axis <= g.d(); ++axis) {
    if (k.at(axis) < 1 || k.at(axis) > g.side())
      throw Error(ErrorKind::invalid_index, "component " + std::to_string(axis) + " = " +
                                                std::to_string(k.at(axis)) + " outside [1, " +
                                                std::to_string(g.side()) + "]");
  }
}

/// Linear index in {1, ..., N}.
inline std::size_t to_linear(const MultiIndex& k, const GridSpec& g) {
  validate(k, g);
  std::size_t i = 0;
  std::size_t stride = 1;
  for (int axis = 1; axis <= g.d(); ++axis) {
    i += static_cast<std::size_t>(k.at(axis) - 1) * stride;
    stride *= static_cast<std::size_t>(g.side());
  }
  return i + 1;
}

inline MultiIndex to_multi(std::size_t i, const GridSpec& g) {
  if (i < 1 || i > g.N())
    throw Error(ErrorKind::invalid_index,
                "linear index " + std::to_string(i) + " outside [1, " + std::to_string(g.N()) + "]");
  std::vector<int> k(static_cast<std::size_t>(g.d()));
  std::size_t rest = i - 1;
  const auto side = static_cast<std::size_t>(g.side());
  for (auto& c : k) {
    c = static_cast<int>(rest % side) + 1;
    rest /= side;
  }
  return MultiIndex(std::move(k));
}

/// Coordinates of node k, (k_1/n, ..., k_d/n).
inline std::vector<double> node_point(const MultiIndex& k, const GridSpec& g) {
  std::vector<double> x(k.size());
  for (std::size_t j = 0; j < k.size(); ++j) x[j] = static_cast<double>(k.components()[j]) / g.n();
  return x;
}

/// Coordinates of the node with 0-based storage offset `offset`.
inline void node_point(std::size_t offset, const GridSpec& g, std::span<double> x) {
  const auto side = static_cast<std::size_t>(g.side());
  for (int j = 0; j < g.d(); ++j) {
    x[static_cast<std::size_t>(j)] = static_cast<double>(offset % side + 1) / g.n();
    offset /= side;
  }
}

/// Half-open cell I_k = prod_j [k_j/n, (k_j+1)/n).
struct Cell {
  std::vector<double> lower;
  std::vector<double> upper;
};

inline Cell cell(const MultiIndex& k, const GridSpec& g) {
  validate(k, g);
  Cell c;
  for (int axis = 1; axis <= g.d(); ++axis) {
    c.lower.push_back(static_cast<double>(k.at(axis)) / g.n());
    c.upper.push_back(static_cast<double>(k.at(axis) + 1) / g.n());
  }
  return c;
}

/// Node whose cell contains x. Points in the boundary-adjacent strip
/// [0, 1/n) and the face x_j = 1 are clamped onto the nearest interior label.
inline MultiIndex cell_of(std::span<const double> x, const GridSpec& g) {
  if (x.size() != static_cast<std::size_t>(g.d()))
    throw Error(ErrorKind::domain, "point has " + std::to_string(x.size()) + " coordinates, grid dimension is " +
                                       std::to_string(g.d()));
  std::vector<int> k(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!(x[j] >= 0.0 && x[j] <= 1.0))
      throw Error(ErrorKind::domain, "coordinate " + std::to_string(j + 1) + " = " + std::to_string(x[j]) +
                                         " outside [0, 1]");
    const int raw = static_cast<int>(std::floor(g.n() * x[j]));
    k[j] = std::clamp(raw, 1, g.side());
  }
  return MultiIndex(std::move(k));
}

/// Neighbour k +- e_axis; std::nullopt when the shift reaches the boundary,
/// where the Dirichlet value 0 applies.
inline std::optional<MultiIndex> neighbor(const MultiIndex& k, int axis, int direction, const GridSpec& g) {
  validate(k, g);
  if (axis < 1 || axis > g.d())
    throw Error(ErrorKind::invalid_index, "axis " + std::to_string(axis) + " outside [1, " + std::to_string(g.d()) + "]");
  if (direction != 1 && direction != -1)
    throw Error(ErrorKind::parameter, "direction must be +1 or -1");
  MultiIndex shifted = k;
  shifted.at(axis) += direction;
  if (shifted.at(axis) < 1 || shifted.at(axis) > g.side()) return std::nullopt;
  return shifted;
}

}  // namespace lattice_burgers
