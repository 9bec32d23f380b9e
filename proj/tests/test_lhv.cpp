#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "random_models.hpp"
#include "stbell/lhv.hpp"

using namespace stbell;
using std::numbers::pi;

TEST(CosineModel, Domain) {
  EXPECT_NO_THROW(cosine_model(0.5));
  EXPECT_NO_THROW(cosine_model(0.0));
  EXPECT_THROW(cosine_model(0.55), DomainError);
  EXPECT_THROW(cosine_model(-0.01), DomainError);
}

TEST(CosineModel, ResponsesBoundedBySqrt2g) {
  RandomSource rng(4);
  for (double g : {0.0, 0.1, 0.37, 0.5}) {
    const auto m = cosine_model(g);
    double worst = 0.0;
    for (int k = 0; k < 100'000; ++k) {
      const PlanarAngle a(rng.uniform_angle());
      const double lambda = HiddenVariableModel::sample_lambda(rng);
      worst = std::max({worst, std::abs(m.xi(a, lambda)), std::abs(m.eta(a, lambda))});
    }
    EXPECT_LE(worst, std::sqrt(2 * g) + 1e-12);
    if (g == 0.0) {
      EXPECT_EQ(worst, 0.0);
    }
  }
  const auto half = cosine_model(0.5);
  EXPECT_NEAR(half.xi(PlanarAngle(0.7), 0.7), 1.0, 1e-15);
}

TEST(HiddenVariableModel, RejectsUnboundedResponses) {
  auto big = [](PlanarAngle a, double l) { return 1.5 * std::cos(a.radians() - l); };
  auto ok = [](PlanarAngle a, double l) { return std::cos(a.radians() - l); };
  EXPECT_THROW(HiddenVariableModel(big, ok), DomainError);
  EXPECT_THROW(HiddenVariableModel(ok, big), DomainError);
  EXPECT_NO_THROW(HiddenVariableModel(ok, ok));
  EXPECT_THROW(HiddenVariableModel(ResponseFunction{}, ok), DomainError);
}

TEST(ModelExpectationExact, Examples) {
  EXPECT_NEAR(model_expectation_exact(cosine_model(0.5), PlanarAngle(1.1), PlanarAngle(1.1)), 0.5, 1e-12);
  EXPECT_NEAR(model_expectation_exact(cosine_model(0.4), PlanarAngle(0.3), PlanarAngle(0.3 + pi / 2)), 0.0, 1e-12);
  EXPECT_NEAR(model_expectation_exact(cosine_model(0.3), PlanarAngle(pi / 3 + 0.2), PlanarAngle(0.2)), 0.15, 1e-12);
}

TEST(ModelExpectationExact, CosineIdentity) {
  RandomSource rng(101);
  for (int k = 0; k < 100; ++k) {
    const double g = rng.uniform(0.0, 0.5);
    const PlanarAngle a(rng.uniform_angle()), b(rng.uniform_angle());
    EXPECT_NEAR(model_expectation_exact(cosine_model(g), a, b), g * std::cos(a.radians() - b.radians()), 1e-10);
  }
}

TEST(ModelExpectationExact, CrossCheckedByLargeMonteCarlo) {
  RandomSource rng(555);
  const auto m = cosine_model(0.3);
  const auto est = model_expectation_mc(m, PlanarAngle(pi / 3), PlanarAngle(0.0), 10'000'000, rng);
  EXPECT_LT(std::abs(est.mean - 0.15), 4 * est.std_error);
}

TEST(ModelExpectationMc, AgreesWithAnalytic) {
  RandomSource rng(77);
  const auto m = cosine_model(0.4);
  for (int k = 0; k < 20; ++k) {
    const PlanarAngle a(rng.uniform_angle()), b(rng.uniform_angle());
    const auto est = model_expectation_mc(m, a, b, 1'000'000, rng);
    EXPECT_EQ(est.n_samples, 1'000'000u);
    EXPECT_GT(est.std_error, 0.0);
    EXPECT_LT(std::abs(est.mean - 0.4 * std::cos(a.radians() - b.radians())), 4 * est.std_error) << "pair " << k;
  }
}

TEST(ModelExpectationMc, ZeroModelAndDeterminism) {
  RandomSource rng(1);
  const auto zero = model_expectation_mc(cosine_model(0.0), PlanarAngle(0.2), PlanarAngle(1.0), 100, rng);
  EXPECT_EQ(zero.mean, 0.0);
  EXPECT_EQ(zero.std_error, 0.0);

  const auto m = cosine_model(0.25);
  RandomSource r1(31), r2(31);
  const auto e1 = model_expectation_mc(m, PlanarAngle(0.4), PlanarAngle(2.0), 300'000, r1);
  const auto e2 = model_expectation_mc(m, PlanarAngle(0.4), PlanarAngle(2.0), 300'000, r2);
  EXPECT_EQ(e1.mean, e2.mean);
  EXPECT_EQ(e1.std_error, e2.std_error);

  RandomSource r3(31);
  const auto e3 = model_expectation_mc(m, PlanarAngle(0.4), PlanarAngle(2.0), 300'000, r3, 4);
  EXPECT_EQ(e1.mean, e3.mean);
  EXPECT_THROW(model_expectation_mc(m, PlanarAngle(0), PlanarAngle(0), 99, r1), DomainError);
}

TEST(SampleModelSigns, DeterministicAndFairCoins) {
  RandomSource rng(8);
  auto plus_one = [](PlanarAngle, double) { return 1.0; };
  auto zero = [](PlanarAngle, double) { return 0.0; };
  const HiddenVariableModel m(plus_one, zero);
  int plus_b = 0;
  const int n = 200'000;
  for (int k = 0; k < n; ++k) {
    const auto s = sample_model_signs(m, PlanarAngle(0), PlanarAngle(0), 0.5, rng);
    EXPECT_EQ(s.a(), 1);
    plus_b += s.b() == 1;
  }
  const double se = std::sqrt(0.25 / n);
  EXPECT_LT(std::abs(double(plus_b) / n - 0.5), 4 * se);
}

TEST(SampleModelSigns, FidelityConvergesAtMonteCarloRate) {
  const auto m = cosine_model(0.4);
  const PlanarAngle a(0.3), b(1.1);
  const double expected = 0.4 * std::cos(0.3 - 1.1);
  RandomSource rng(12);
  for (int n : {10'000, 100'000, 1'000'000}) {
    double sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double lambda = HiddenVariableModel::sample_lambda(rng);
      sum += sample_model_signs(m, a, b, lambda, rng).product();
    }
    const double mean = sum / n;
    const double se = std::sqrt((1 - expected * expected) / n);
    EXPECT_LT(std::abs(mean - expected), 4 * se) << "n=" << n;
  }
}

TEST(ModelChsh, Examples) {
  const auto s = ChshSettings::canonical();
  EXPECT_NEAR(model_chsh(cosine_model(0.5), s, ExpectationMode::exact).value, std::sqrt(2.0), 1e-12);
  RandomSource rng(5);
  for (int k = 0; k < 20; ++k) {
    const ChshSettings r{PlanarAngle(rng.uniform_angle()), PlanarAngle(rng.uniform_angle()),
                         PlanarAngle(rng.uniform_angle()), PlanarAngle(rng.uniform_angle())};
    EXPECT_EQ(model_chsh(cosine_model(0.0), r, ExpectationMode::exact).value, 0.0);
  }
  const auto mc = model_chsh(cosine_model(0.5), s, ExpectationMode::monte_carlo, &rng, 200'000);
  EXPECT_LT(std::abs(mc.value - std::sqrt(2.0)), 4 * mc.std_error);
  EXPECT_THROW(model_chsh(cosine_model(0.5), s, ExpectationMode::monte_carlo), DomainError);
}

TEST(ModelChsh, BrokenModelIsFlagged) {
  // Out of bounds only on the trapezoid grid, which random draws never hit,
  // so construction succeeds but the exact CHSH exceeds 2.
  const double h = kTwoPi / static_cast<double>(kExactNodes);
  auto sly = [h](PlanarAngle a, double l) {
    const double k = l / h;
    if (std::abs(k - std::round(k)) > 1e-12) return 0.0;
    return std::cos(a.radians() - l) >= 0 ? 1.3 : -1.3;
  };
  const HiddenVariableModel broken(sly, sly, "grid-sly");
  EXPECT_THROW(model_chsh(broken, ChshSettings::canonical(), ExpectationMode::exact), NumericalError);

  auto sign = [](PlanarAngle a, double l) { return std::cos(a.radians() - l) >= 0 ? 1.0 : -1.0; };
  const HiddenVariableModel honest(sign, sign, "sign");
  const double s = model_chsh(honest, ChshSettings::canonical(), ExpectationMode::exact).value;
  EXPECT_LE(s, 2.0 + 1e-9);
  EXPECT_GT(s, 1.99);
}

TEST(ModelChsh, ChshBoundOnRandomModels) {
  RandomSource rng(2718);
  int violations = 0;
  for (int mdl = 0; mdl < 5; ++mdl) {
    const auto model = testing_support::random_bounded_model(rng);
    for (int k = 0; k < 200; ++k) {
      const ChshSettings s{PlanarAngle(rng.uniform_angle()), PlanarAngle(rng.uniform_angle()),
                           PlanarAngle(rng.uniform_angle()), PlanarAngle(rng.uniform_angle())};
      if (model_chsh(model, s, ExpectationMode::exact).value > 2.0 + 1e-9) ++violations;
    }
  }
  EXPECT_EQ(violations, 0);
}
