#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "lattice_burgers/grid.hpp"

using namespace lattice_burgers;

TEST(GridSpec, NodeCount) {
  EXPECT_EQ(GridSpec(1, 2).N(), 1u);
  EXPECT_EQ(GridSpec(2, 3).N(), 4u);
  EXPECT_EQ(GridSpec(3, 5).N(), 64u);
  EXPECT_EQ(GridSpec(2, 3).side(), 2);
  EXPECT_DOUBLE_EQ(GridSpec(3, 4).inv_cell_volume(), 64.0);
}

TEST(GridSpec, RejectsBadParameters) {
  EXPECT_THROW(GridSpec(0, 4), Error);
  EXPECT_THROW(GridSpec(1, 1), Error);
  try {
    GridSpec(8, 16);  // 15^8 > 2^24
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::capacity);
  }
}

TEST(ToLinear, HandValues) {
  const GridSpec g(2, 3);
  EXPECT_EQ(to_linear({1, 1}, g), 1u);
  EXPECT_EQ(to_linear({2, 1}, g), 2u);
  EXPECT_EQ(to_linear({1, 2}, g), 3u);
  EXPECT_EQ(to_linear({2, 2}, g), 4u);
  for (int n = 2; n <= 9; ++n)
    for (int j = 1; j < n; ++j) EXPECT_EQ(to_linear({j}, GridSpec(1, n)), static_cast<std::size_t>(j));
}

TEST(ToLinear, OutOfRange) {
  const GridSpec g(2, 3);
  for (const MultiIndex& k : {MultiIndex{0, 1}, MultiIndex{3, 1}, MultiIndex{1, 3}, MultiIndex{1}, MultiIndex{1, 1, 1}}) {
    try {
      to_linear(k, g);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::invalid_index);
    }
  }
}

TEST(ToMulti, HandValues) {
  EXPECT_EQ(to_multi(3, GridSpec(2, 3)), (MultiIndex{1, 2}));
  EXPECT_EQ(to_multi(1, GridSpec(2, 3)), (MultiIndex{1, 1}));
  EXPECT_EQ(to_multi(8, GridSpec(3, 3)), (MultiIndex{2, 2, 2}));
  EXPECT_THROW(to_multi(0, GridSpec(2, 3)), Error);
  EXPECT_THROW(to_multi(5, GridSpec(2, 3)), Error);
}

TEST(ToLinear, ExhaustiveBijection) {
  for (int d = 1; d <= 3; ++d) {
    for (int n = 2; n <= 6; ++n) {
      const GridSpec g(d, n);
      std::set<std::size_t> seen;
      // Enumerate multi-indices independently of to_multi: odometer over components.
      std::vector<int> k(static_cast<std::size_t>(d), 1);
      for (;;) {
        const MultiIndex m(k);
        const std::size_t i = to_linear(m, g);
        EXPECT_GE(i, 1u);
        EXPECT_LE(i, g.N());
        EXPECT_TRUE(seen.insert(i).second);
        EXPECT_EQ(to_multi(i, g), m);
        std::size_t axis = 0;
        while (axis < k.size() && k[axis] == n - 1) k[axis++] = 1;
        if (axis == k.size()) break;
        ++k[axis];
      }
      EXPECT_EQ(seen.size(), g.N());
    }
  }
}

TEST(NodePoint, OffsetsMatchMultiIndex) {
  const GridSpec g(3, 4);
  std::vector<double> x(3);
  for (std::size_t off = 0; off < g.N(); ++off) {
    node_point(off, g, x);
    EXPECT_EQ(x, node_point(to_multi(off + 1, g), g));
  }
}

TEST(Cell, Geometry) {
  const GridSpec g(2, 4);
  const Cell c = cell({1, 3}, g);
  EXPECT_DOUBLE_EQ(c.lower[0], 0.25);
  EXPECT_DOUBLE_EQ(c.lower[1], 0.75);
  for (int j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(c.upper[j] - c.lower[j], 0.25);
}

TEST(CellOf, HandValues) {
  EXPECT_EQ(cell_of(std::vector<double>{0.30}, GridSpec(1, 4)), MultiIndex{1});
  EXPECT_EQ(cell_of(std::vector<double>{0.25}, GridSpec(1, 4)), MultiIndex{1});
  EXPECT_EQ(cell_of(std::vector<double>{0.99, 0.40}, GridSpec(2, 3)), (MultiIndex{2, 1}));
}

TEST(CellOf, ClampsBoundaryStrips) {
  const GridSpec g(1, 4);
  EXPECT_EQ(cell_of(std::vector<double>{0.0}, g), MultiIndex{1});
  EXPECT_EQ(cell_of(std::vector<double>{0.1}, g), MultiIndex{1});
  EXPECT_EQ(cell_of(std::vector<double>{1.0}, g), MultiIndex{3});
}

TEST(CellOf, DomainErrors) {
  const GridSpec g(2, 3);
  for (const auto& x : {std::vector<double>{-0.1, 0.5}, std::vector<double>{0.5, 1.5}, std::vector<double>{0.5}}) {
    try {
      cell_of(x, g);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::domain);
    }
  }
}

TEST(CellOf, InverseOfCellOnInteriorPoints) {
  for (int d = 1; d <= 3; ++d) {
    const GridSpec g(d, 5);
    for (std::size_t i = 1; i <= g.N(); ++i) {
      const MultiIndex k = to_multi(i, g);
      const Cell c = cell(k, g);
      for (double frac : {0.0, 0.3, 0.999}) {
        std::vector<double> x(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) x[j] = c.lower[j] + frac * (c.upper[j] - c.lower[j]);
        EXPECT_EQ(cell_of(x, g), k);
      }
    }
  }
}

TEST(Neighbor, Shifts) {
  EXPECT_EQ(neighbor({1}, 1, +1, GridSpec(1, 3)), MultiIndex{2});
  EXPECT_FALSE(neighbor({2}, 1, +1, GridSpec(1, 3)).has_value());
  EXPECT_FALSE(neighbor({1}, 1, -1, GridSpec(1, 3)).has_value());
  EXPECT_FALSE(neighbor({1, 3}, 2, +1, GridSpec(2, 4)).has_value());
  EXPECT_EQ(neighbor({1, 3}, 1, +1, GridSpec(2, 4)), (MultiIndex{2, 3}));
  EXPECT_THROW(neighbor({1, 1}, 3, +1, GridSpec(2, 4)), Error);
  EXPECT_THROW(neighbor({1, 1}, 1, 2, GridSpec(2, 4)), Error);
}
