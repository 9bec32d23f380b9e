#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "random_models.hpp"
#include "stbell/feasibility.hpp"
#include "stbell/lhv.hpp"

using namespace stbell;

namespace {

void expect_consistent(const FeasibilityResult& r, const CorrelationTarget& t) {
  if (r.feasible()) {
    EXPECT_FALSE(r.certificate.has_value());
    ASSERT_FALSE(r.weights.empty());
    double total = 0.0;
    Eigen::MatrixXd rec = Eigen::MatrixXd::Zero(Eigen::Index(t.rows()), Eigen::Index(t.cols()));
    for (const auto& w : r.weights) {
      EXPECT_GE(w.weight, 0.0);
      total += w.weight;
      for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j)
          rec(Eigen::Index(i), Eigen::Index(j)) += w.weight * w.strategy.s[i] * w.strategy.t[j];
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
    EXPECT_LE((rec - t.matrix()).cwiseAbs().maxCoeff(), 1e-9);
  } else {
    ASSERT_TRUE(r.certificate.has_value());
    EXPECT_TRUE(r.weights.empty());
    EXPECT_TRUE(verify_certificate(*r.certificate, t));
  }
}

Eigen::MatrixXd random_matrix(RandomSource& rng, int m, int n, double scale = 1.0) {
  Eigen::MatrixXd p(m, n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) p(i, j) = scale * rng.uniform(-1, 1);
  return p;
}

}  // namespace

TEST(CorrelationTarget, Validation) {
  EXPECT_THROW(CorrelationTarget::from_matrix(Eigen::MatrixXd(0, 0)), DomainError);
  EXPECT_THROW(CorrelationTarget::from_matrix(Eigen::MatrixXd::Constant(2, 2, 1.5)), DomainError);
  EXPECT_THROW(CorrelationTarget::from_matrix(Eigen::MatrixXd::Zero(13, 12)), DomainError);
  EXPECT_NO_THROW(CorrelationTarget::from_matrix(Eigen::MatrixXd::Zero(12, 12)));
  EXPECT_THROW(CorrelationTarget({PlanarAngle(0)}, {PlanarAngle(0)}, Eigen::MatrixXd::Zero(2, 1)), DomainError);
}

TEST(LocalPolytope, CanonicalCosineIsInfeasibleWithChshCertificate) {
  const auto t = CorrelationTarget::canonical_chsh();
  const auto r = local_polytope_membership(t);
  ASSERT_FALSE(r.feasible());
  expect_consistent(r, t);
  const auto& c = r.certificate->coefficients;
  // CHSH up to relabeling: all |C_ij| equal, an odd number of negative signs, bound 2.
  EXPECT_NEAR(c.cwiseAbs().minCoeff(), 1.0, 1e-9);
  EXPECT_NEAR(c.cwiseAbs().maxCoeff(), 1.0, 1e-9);
  EXPECT_EQ((c.array() < 0).count() % 2, 1);
  EXPECT_NEAR(r.certificate->bound, 2.0, 1e-9);
  EXPECT_NEAR(certificate_margin(*r.certificate, t), 2 * std::sqrt(2.0) - 2, 1e-9);
}

TEST(LocalPolytope, ThresholdBracket) {
  const auto half = CorrelationTarget::canonical_chsh(0.5);
  const auto r_half = local_polytope_membership(half);
  EXPECT_TRUE(r_half.feasible());
  expect_consistent(r_half, half);

  for (double g : {0.71, 0.75}) {
    const auto t = CorrelationTarget::canonical_chsh(g);
    const auto r = local_polytope_membership(t);
    EXPECT_FALSE(r.feasible()) << g;
    expect_consistent(r, t);
  }
  // Frozen oracle values for the bisection below.
  EXPECT_TRUE(local_polytope_membership(CorrelationTarget::canonical_chsh(0.7070)).feasible());
  EXPECT_FALSE(local_polytope_membership(CorrelationTarget::canonical_chsh(0.7072)).feasible());
}

TEST(MaxFeasibleScale, Examples) {
  const double g = max_feasible_scale(CorrelationTarget::canonical_chsh(), 1e-5);
  EXPECT_NEAR(g, 1 / std::sqrt(2.0), 1e-4);
  EXPECT_GE(g, 0.7070);
  EXPECT_LT(g, 0.7072);
  EXPECT_TRUE(local_polytope_membership(CorrelationTarget::canonical_chsh(g)).feasible());

  EXPECT_EQ(max_feasible_scale(CorrelationTarget::from_matrix(Eigen::MatrixXd::Zero(2, 3)), 1e-4), 1.0);
  EXPECT_EQ(max_feasible_scale(CorrelationTarget::from_matrix(Eigen::MatrixXd::Ones(1, 1)), 1e-4), 1.0);
  EXPECT_THROW(max_feasible_scale(CorrelationTarget::canonical_chsh(), 0.0), DomainError);
}

TEST(VerifyCertificate, Examples) {
  const auto t = CorrelationTarget::canonical_chsh();
  const auto r = local_polytope_membership(t);
  ASSERT_TRUE(r.certificate);
  EXPECT_TRUE(verify_certificate(*r.certificate, t));
  EXPECT_FALSE(verify_certificate(*r.certificate, CorrelationTarget::canonical_chsh(0.5)));
  const BellCertificate zero{Eigen::MatrixXd::Zero(2, 2), 0.0};
  EXPECT_FALSE(verify_certificate(zero, t));
  const BellCertificate wrong_shape{Eigen::MatrixXd::Ones(3, 2), 0.0};
  EXPECT_THROW(verify_certificate(wrong_shape, t), DomainError);
}

TEST(LocalPolytope, SingleStrategyTargetsAreOnePointMixtures) {
  RandomSource rng(3);
  for (int k = 0; k < 50; ++k) {
    const int m = 1 + int(rng.index(4)), n = 1 + int(rng.index(4));
    std::vector<int> s(m), t(n);
    for (auto& v : s) v = rng.bernoulli(0.5) ? 1 : -1;
    for (auto& v : t) v = rng.bernoulli(0.5) ? 1 : -1;
    Eigen::MatrixXd p(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) p(i, j) = s[i] * t[j];
    const auto target = CorrelationTarget::from_matrix(p);
    const auto r = local_polytope_membership(target);
    ASSERT_TRUE(r.feasible());
    ASSERT_EQ(r.weights.size(), 1u);
    EXPECT_NEAR(r.weights[0].weight, 1.0, 1e-12);
    expect_consistent(r, target);
  }
}

TEST(LocalPolytope, PrimalDualConsistencyOnRandomTargets) {
  RandomSource rng(11);
  int infeasible = 0, feasible = 0;
  for (int k = 0; k < 200; ++k) {
    const int m = 2 + int(rng.index(3)), n = 2 + int(rng.index(3));
    const auto t = CorrelationTarget::from_matrix(random_matrix(rng, m, n));
    const auto r = local_polytope_membership(t);
    expect_consistent(r, t);
    (r.feasible() ? feasible : infeasible)++;
  }
  EXPECT_GT(feasible, 10);
  EXPECT_GT(infeasible, 10);
}

TEST(LocalPolytope, PermutationAndSignFlipInvariance) {
  RandomSource rng(19);
  for (int k = 0; k < 100; ++k) {
    const Eigen::MatrixXd p = random_matrix(rng, 3, 3, 0.9);
    const bool base = local_polytope_membership(CorrelationTarget::from_matrix(p)).feasible();

    Eigen::PermutationMatrix<3> rows, cols;
    std::array<int, 3> ri{0, 1, 2}, ci{0, 1, 2};
    std::shuffle(ri.begin(), ri.end(), std::mt19937(rng.next_u64()));
    std::shuffle(ci.begin(), ci.end(), std::mt19937(rng.next_u64()));
    for (int i = 0; i < 3; ++i) {
      rows.indices()[i] = ri[i];
      cols.indices()[i] = ci[i];
    }
    const Eigen::MatrixXd permuted = rows * p * cols;
    EXPECT_EQ(local_polytope_membership(CorrelationTarget::from_matrix(permuted)).feasible(), base);

    Eigen::MatrixXd flipped = p;
    flipped.row(Eigen::Index(rng.index(3))) *= -1.0;
    EXPECT_EQ(local_polytope_membership(CorrelationTarget::from_matrix(flipped)).feasible(), base);
    Eigen::MatrixXd col_flipped = p;
    col_flipped.col(Eigen::Index(rng.index(3))) *= -1.0;
    EXPECT_EQ(local_polytope_membership(CorrelationTarget::from_matrix(col_flipped)).feasible(), base);
  }
}

TEST(LocalPolytope, LhvModelGridsAreFeasible) {
  RandomSource rng(5);
  for (int k = 0; k < 10; ++k) {
    const auto model = k % 2 ? cosine_model(rng.uniform(0, 0.5)) : testing_support::random_bounded_model(rng);
    const int m = 2 + int(rng.index(3)), n = 2 + int(rng.index(3));
    std::vector<PlanarAngle> alphas, betas;
    for (int i = 0; i < m; ++i) alphas.emplace_back(rng.uniform_angle());
    for (int j = 0; j < n; ++j) betas.emplace_back(rng.uniform_angle());
    Eigen::MatrixXd p(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) p(i, j) = model_expectation_exact(model, alphas[i], betas[j]);
    const CorrelationTarget t(alphas, betas, p);
    const auto r = local_polytope_membership(t);
    EXPECT_TRUE(r.feasible()) << model.name();
    expect_consistent(r, t);
  }
}

TEST(LocalPolytope, LargerCosineGrids) {
  // Equal n x n grids with n a multiple of 4 contain a CHSH quadruple, so the
  // threshold lies in [1/2, 1/sqrt 2].
  for (int n : {4, 8}) {
    std::vector<PlanarAngle> alphas, betas;
    for (int i = 0; i < n; ++i) {
      alphas.emplace_back(std::numbers::pi * i / n);
      betas.emplace_back(std::numbers::pi * i / n);
    }
    const auto t = CorrelationTarget::cosine(alphas, betas);
    const double g = max_feasible_scale(t, 1e-4);
    EXPECT_GE(g, 0.5 - 1e-4) << n;
    EXPECT_LE(g, 1 / std::sqrt(2.0) + 1e-4) << n;
    const auto r = local_polytope_membership(t.scaled(std::min(1.0, g + 1e-3)));
    expect_consistent(r, t.scaled(std::min(1.0, g + 1e-3)));
  }
}
