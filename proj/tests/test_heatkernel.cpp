#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "lattice_burgers/heatkernel.hpp"
#include "lattice_burgers/operators.hpp"

using namespace lattice_burgers;

namespace {

Eigen::MatrixXd dense_kernel(double t, const GridSpec& g) {
  return g.inv_cell_volume() * (t * build_A(g).dense()).exp();
}

}  // namespace

TEST(HeatKernel1D, Spectrum) {
  for (int n = 2; n <= 12; ++n) {
    const HeatKernel1D hk(n);
    EXPECT_LE(hk.reconstruction_error(), 1e-10);
    EXPECT_LT(hk.eigenvalues().maxCoeff(), 0.0);
    for (int j = 1; j < n; ++j) {
      // Ascending order: j-th from the top is -4 n^2 sin^2(j pi / 2n).
      const double expect = -4.0 * n * n * std::pow(std::sin(j * std::numbers::pi / (2.0 * n)), 2);
      EXPECT_NEAR(hk.eigenvalues()(n - 1 - j), expect, 1e-10 * n * n);
    }
  }
  EXPECT_THROW(HeatKernel1D(1), Error);
}

TEST(Kernel1D, TimeZeroAndOracle) {
  const HeatKernel1D hk(6);
  EXPECT_LE((kernel_1d(0.0, hk).p - 6.0 * Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::MatrixXd ref = dense_kernel(0.01, GridSpec(1, 6));
  EXPECT_LE((kernel_1d(0.01, hk).p - ref).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_THROW(kernel_1d(-1.0, hk), Error);
}

TEST(Kernel1D, LongTimeDecay) {
  for (int n : {3, 6, 10}) {
    const HeatKernel1D hk(n);
    const double t = 10.0 / std::abs(hk.least_negative_eigenvalue());
    EXPECT_LE(kernel_1d(t, hk).p.maxCoeff(), 1e-3 * n);
  }
}

TEST(Kernel1D, SubProbabilityRows) {
  const HeatKernel1D hk(8);
  Eigen::VectorXd prev = Eigen::VectorXd::Ones(7);
  for (int k = 0; k <= 50; ++k) {
    const KernelMatrix km = kernel_1d(0.02 * k, hk);
    EXPECT_LE(km.clipped, 1e-12);
    EXPECT_GE(km.p.minCoeff(), 0.0);
    const Eigen::VectorXd rows = km.p.rowwise().sum() / 8.0;
    EXPECT_LE(rows.maxCoeff(), 1.0 + 1e-12);
    EXPECT_LE((rows - prev).maxCoeff(), 1e-12);
    prev = rows;
  }
}

TEST(KernelD, ProductStructure) {
  const HeatKernel1D hk(4);
  const GridSpec g(2, 4);
  EXPECT_NEAR(kernel_d(0.0, {2, 3}, {2, 3}, hk), 16.0, 1e-12);
  const Eigen::MatrixXd ref = dense_kernel(0.05, g);
  const KernelMatrix k1 = kernel_1d(0.05, hk);
  for (std::size_t i = 1; i <= g.N(); ++i)
    for (std::size_t j = 1; j <= g.N(); ++j) {
      const double v = kernel_d(k1, to_multi(i, g), to_multi(j, g));
      EXPECT_NEAR(v, ref(i - 1, j - 1), 1e-9);
      EXPECT_EQ(v, kernel_d(k1, to_multi(j, g), to_multi(i, g)));
    }
  EXPECT_THROW(kernel_d(k1, {1, 1}, {1}), Error);
  EXPECT_THROW(kernel_d(k1, {1, 4}, {1, 1}), Error);
}

TEST(KernelD, MatrixMatchesDenseExponential) {
  for (int d = 1; d <= 3; ++d)
    for (int n = 2; n <= 5; ++n) {
      const HeatKernel1D hk(n);
      for (double t : {0.0, 0.01, 0.1}) {
        const Eigen::MatrixXd p = kernel_d_matrix(t, hk, d);
        EXPECT_LE((p - dense_kernel(t, GridSpec(d, n))).cwiseAbs().maxCoeff(), 1e-9);
        EXPECT_LE((p - p.transpose()).cwiseAbs().maxCoeff(), 1e-12 * p.cwiseAbs().maxCoeff());
      }
    }
}

TEST(Semigroup, ChapmanKolmogorov) {
  EXPECT_LE(semigroup_check(0.01, 0.0, HeatKernel1D(5), 1), 1e-12);
  EXPECT_LE(semigroup_check(0.01, 0.01, HeatKernel1D(5), 1), 1e-10);
  EXPECT_LE(semigroup_check(0.02, 0.03, HeatKernel1D(4), 2), 1e-10);
  EXPECT_THROW(semigroup_check(-0.1, 0.0, HeatKernel1D(4), 1), Error);
}

TEST(AlphaWeight, MixtureMatchesClosedFormInOneDimension) {
  const double h = 0.125;
  for (double alpha : {0.2, 0.5, 0.9}) {
    for (int o : {0, 1, 2, 5}) {
      const std::vector<int> off{o};
      const double closed = alpha_cell_weight(off, h, alpha);
      const double mix = alpha_cell_weight_mixture(off, h, alpha);
      EXPECT_NEAR(mix / closed, 1.0, 1e-6) << "alpha=" << alpha << " offset=" << o;
    }
  }
}

TEST(AlphaWeight, TwoDimensionalMonteCarlo) {
  const double h = 0.25;
  const double alpha = 0.5;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, h);
  for (const auto& off : {std::vector<int>{0, 0}, std::vector<int>{1, 0}, std::vector<int>{1, 1}, std::vector<int>{3, 2}}) {
    const std::size_t M = 1000000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const double dx = u(rng) - u(rng) - off[0] * h;
      const double dy = u(rng) - u(rng) - off[1] * h;
      const double v = std::pow(dx * dx + dy * dy, -0.5 * alpha);
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / M;
    const double se = std::sqrt((sum2 / M - mean * mean) / M);
    const double vol2 = std::pow(h, 4);
    EXPECT_NEAR(alpha_cell_weight(off, h, alpha), vol2 * mean, 4.0 * vol2 * se);
  }
  EXPECT_THROW(alpha_cell_weight(std::vector<int>{0}, h, 1.0), Error);
  EXPECT_THROW(alpha_cell_weight(std::vector<int>{0, 0}, h, 2.0), Error);
}

TEST(AlphaWeight, GridMatrixSymmetric) {
  const Eigen::MatrixXd W = alpha_weights(GridSpec(2, 4), 0.7);
  EXPECT_EQ(W, W.transpose());
  EXPECT_GT(W.minCoeff(), 0.0);
}

TEST(EstimateReport, OneDimensional) {
  const HeatKernel1D hk(8);
  std::vector<double> ts;
  for (int k = 1; k <= 50; ++k) ts.push_back(0.04 * k);
  const std::vector<double> hs{1e-4, 3e-4, 1e-3, 3e-3, 1e-2};
  const std::vector<double> t_short{0.1, 0.5};
  const EstimateReport full = estimate_report(hk, 1, ts, std::vector<double>{1e-3, 1e-2}, 0.5);
  for (const auto& r : full.rows)
    if (r.estimate == 'i') {
      EXPECT_GE(r.value, 0.0);
      EXPECT_LE(r.value, 1.0 + 1e-12);
    }
  ASSERT_TRUE(std::isfinite(full.decay_slope));
  EXPECT_LE(std::abs(full.decay_slope / full.least_negative_eigenvalue - 1.0), 0.05);

  const EstimateReport rep = estimate_report(hk, 1, t_short, hs, 0.5);
  for (const auto& c : rep.shift_checks) {
    EXPECT_GE(c.fitted_exponent, 0.4);
    EXPECT_TRUE(c.holds);
  }
  for (const auto& c : rep.alpha_checks) EXPECT_TRUE(std::isfinite(c.constant));
  EXPECT_EQ(rep.pair_checks.size(), t_short.size());
}

TEST(EstimateReport, RejectsBadInput) {
  const HeatKernel1D hk(4);
  const std::vector<double> t{0.1};
  EXPECT_THROW(estimate_report(hk, 1, std::vector<double>{}, t, 0.5), Error);
  EXPECT_THROW(estimate_report(hk, 1, t, t, 1.0), Error);
  EXPECT_THROW(estimate_report(hk, 2, t, t, 2.0), Error);
}

TEST(LeastSquares, ExactLine) {
  const std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
  const LinearFit f = least_squares(x, y);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
}
