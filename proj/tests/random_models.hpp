#pragma once

// Generators of random bounded local hidden-variable models for property tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "stbell/lhv.hpp"

namespace testing_support {

struct FourierTerm {
  double amplitude, angle_freq, lambda_freq, phase;
};

inline std::vector<FourierTerm> random_terms(stbell::RandomSource& rng) {
  std::vector<FourierTerm> terms(1 + rng.index(4));
  for (auto& t : terms) {
    t = {rng.uniform(-2, 2), double(rng.index(4)), double(1 + rng.index(3)), rng.uniform_angle()};
  }
  return terms;
}

inline double eval(const std::vector<FourierTerm>& terms, double angle, double lambda) {
  double v = 0.0;
  for (const auto& t : terms) v += t.amplitude * std::cos(t.angle_freq * angle + t.lambda_freq * lambda + t.phase);
  return v;
}

/// A response bounded by 1: tanh, hard sign, or clamp of a random
/// trigonometric polynomial in (angle, lambda).
inline stbell::ResponseFunction random_response(stbell::RandomSource& rng) {
  const auto terms = random_terms(rng);
  switch (rng.index(3)) {
    case 0:
      return [terms](stbell::PlanarAngle a, double l) { return std::tanh(eval(terms, a.radians(), l)); };
    case 1:
      return [terms](stbell::PlanarAngle a, double l) { return eval(terms, a.radians(), l) >= 0 ? 1.0 : -1.0; };
    default:
      return [terms](stbell::PlanarAngle a, double l) { return std::clamp(eval(terms, a.radians(), l), -1.0, 1.0); };
  }
}

inline stbell::HiddenVariableModel random_bounded_model(stbell::RandomSource& rng) {
  return stbell::HiddenVariableModel(random_response(rng), random_response(rng), "random");
}

}  // namespace testing_support
