#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "lect/energy.hpp"
#include "lect/rng.hpp"
#include "support/oracles.hpp"

using namespace lect;

TEST_CASE("energy examples") {
  const std::vector<double> uniform = {0, 0, 0, 0};
  CHECK(std::abs(energy(uniform) + std::log(4.0)) < 1e-12);
  const std::vector<double> single = {3.25};
  CHECK(energy(single) == -3.25);
  const std::vector<double> peaked = {10, 0, 0};
  CHECK(std::abs(energy(peaked) - oracle::energy(peaked)) < 1e-9);
  CHECK(energy(peaked) == doctest::Approx(-10.0000908).epsilon(1e-8));
  CHECK_THROWS_AS(energy(std::vector<double>{}), Error);
}

TEST_CASE("energy never overflows") {
  const std::vector<double> huge = {1e300, 1e300};
  CHECK(energy(huge) == doctest::Approx(-1e300));
  const std::vector<double> tiny = {-1e300, 0.0};
  CHECK(energy(tiny) == 0.0);
}

TEST_CASE("energy properties: oracle agreement, shift identity, monotonicity") {
  Rng rng(6);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> z(1 + rng.uniform_index(8));
    for (double& v : z) v = rng.uniform(-20, 20);
    const double e = energy(z);
    CHECK(std::abs(e - oracle::energy(z)) < 1e-9);

    const double c = rng.uniform(-50, 50);
    std::vector<double> shifted = z;
    for (double& v : shifted) v += c;
    CHECK(std::abs(energy(shifted) - (e - c)) < 1e-9);

    std::vector<double> bumped = z;
    bumped[rng.uniform_index(z.size())] += rng.uniform(0, 5);
    CHECK(energy(bumped) <= e);
  }
}

TEST_CASE("energy gradient through the logits matches finite differences") {
  Rng rng(10);
  Matrix z(4, 3);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform(-3, 3);
  Vector g(4);
  g << 0.5, -1.0, 2.0, 0.0;
  const Matrix analytic = energy_grad_to_logits(z, g);
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index c = 0; c < 3; ++c) {
      Matrix up = z, down = z;
      up(i, c) += 1e-6;
      down(i, c) -= 1e-6;
      const double num = g.dot(energies(up) - energies(down)) / 2e-6;
      CHECK(analytic(i, c) == doctest::Approx(num).epsilon(1e-6));
    }
  }
}

TEST_CASE("tau calibration") {
  CHECK(calibrate_tau(std::vector<double>{1, 2, 3, 4, 5}, 0.95) == 5);
  CHECK(calibrate_tau(std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 0.9) == 9);
  CHECK(calibrate_tau(std::vector<double>{2.5, 2.5, 2.5}) == 2.5);
  CHECK_THROWS_AS(calibrate_tau(std::vector<double>{}), Error);
}

TEST_CASE("tau is the smallest observed value reaching the target") {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> e(1 + rng.uniform_index(30));
    for (double& v : e) v = std::round(rng.uniform(-5, 5) * 2) / 2;  // ties on purpose
    const double tpr = rng.uniform(0.01, 1.0);
    const double tau = calibrate_tau(e, tpr);
    CHECK(std::find(e.begin(), e.end(), tau) != e.end());
    auto frac = [&](double t) {
      return static_cast<double>(std::count_if(e.begin(), e.end(), [&](double v) { return v <= t; })) /
             static_cast<double>(e.size());
    };
    CHECK(frac(tau) >= tpr);
    for (double v : e) {
      if (v < tau) CHECK(frac(v) < tpr);
    }
  }
}

TEST_CASE("detection boundary and limits") {
  const std::vector<double> e = {-3.0, -1.0, 0.5};
  CHECK(detect(e, {-1.0}) == std::vector<Decision>{Decision::Ind, Decision::Ind, Decision::Ood});
  CHECK(detect(e, {std::numeric_limits<double>::infinity()}) == std::vector<Decision>(3, Decision::Ind));
  CHECK(detect(e, {-std::numeric_limits<double>::infinity()}) == std::vector<Decision>(3, Decision::Ood));
}

TEST_CASE("detection is invariant under shifts and increasing transforms") {
  Rng rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> e(1 + rng.uniform_index(20));
    for (double& v : e) v = rng.uniform(-4, 4);
    const double tau = rng.bernoulli(0.5) ? e[rng.uniform_index(e.size())] : rng.uniform(-4, 4);
    const auto base = detect(e, {tau});
    const double c = rng.uniform(-10, 10);
    std::vector<double> shifted = e, cubed = e;
    for (double& v : shifted) v += c;
    for (double& v : cubed) v = v * v * v + 2 * v;
    CHECK(detect(shifted, {tau + c}) == base);
    CHECK(detect(cubed, {tau * tau * tau + 2 * tau}) == base);
  }
}
