#include <cmath>
#include <numbers>

#include "doctest.h"
#include "occ/errors.hpp"
#include "occ/models.hpp"
#include "occ/periodic.hpp"

using namespace occ;
using cd = std::complex<double>;

namespace {

double nearest(const std::vector<cd>& values, double target) {
  double best = 1e300;
  for (auto z : values) best = std::min(best, std::abs(z - target));
  return best;
}

}  // namespace

TEST_CASE("toy orbit is a trapezoidal collocation solution after Newton") {
  auto sys = make_system("toy");
  const int m = 101;
  CpsOrbit guess = toy_orbit(sys, m);
  guess.T *= 1.03;
  for (int j = 0; j < m; ++j) guess.u(2, j) += 0.01 * std::sin(4.0 * std::numbers::pi * guess.t[j]);
  guess.u.col(m - 1) = guess.u.col(0);
  const CpsOrbit o = cps_newton(sys, guess);
  CHECK(cps_residual(sys, o) < 1e-9);
  // Discrete period of the trapezoidal rule on a circle of m-1 intervals.
  const double n = m - 1;
  CHECK(o.T == doctest::Approx(2.0 * n * std::tan(std::numbers::pi / n)).epsilon(1e-9));
  for (int j = 0; j < m; ++j) {
    CHECK(std::hypot(o.u(0, j), o.u(1, j)) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(o.u(2, j) == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("constant guesses are rejected as degenerate") {
  auto sys = make_system("toy");
  CpsOrbit o = make_orbit(30, 6.0, sys.params(), [](double) {
    VectorXd v(4);
    v << 0.0, 0.0, 0.0, 0.0;
    return v;
  });
  CHECK_THROWS_AS(cps_newton(sys, o), DegenerateOrbit);
}

TEST_CASE("gauss4 multipliers of the toy orbit") {
  auto sys = make_system("toy");
  const auto ref = toy_analytics(sys.params());
  const CpsOrbit o = toy_orbit(sys, 400);
  const auto f = floquet(sys, o, FloquetScheme::gauss4);
  REQUIRE(f.multipliers.size() == 4);
  CHECK(f.trivial_error < 1e-8);
  CHECK(nearest(f.multipliers, ref.multipliers[1]) < 1e-9);
  CHECK(nearest(f.multipliers, ref.multipliers[2]) < 1e-4 * ref.multipliers[2]);
  CHECK(nearest(f.multipliers, ref.multipliers[3]) < 1e-4 * std::abs(ref.multipliers[3]));
  CHECK(f.orthogonality_error < 1e-10);
  for (std::size_t i = 0; i + 1 < f.multipliers.size(); ++i)
    CHECK(std::abs(f.multipliers[i]) >= std::abs(f.multipliers[i + 1]));
}

TEST_CASE("slow angular speed moves the second multiplier") {
  auto sys = make_system("toy").with_param("omega", 0.04);
  const auto f = floquet(sys, toy_orbit(sys, 400), FloquetScheme::gauss4);
  CHECK(nearest(f.multipliers, 0.5325) < 5e-4);
}

TEST_CASE("toy complement rows annihilate the analytic stable direction") {
  auto sys = make_system("toy");
  const CpsTarget t = cps_target(sys, toy_orbit(sys, 400), 0, FloquetScheme::gauss4);
  CHECK(t.defect == 0);
  CHECK(t.P.rows() == 3);
  const double rho = 1.0, omega = 1.0, s = std::sqrt(2.0 * std::numbers::pi);
  VectorXd ws(4);
  ws << -rho / (2.0 * rho + s * omega), 0.0, 1.0, -s;
  ws.normalize();
  CHECK((t.P * ws).norm() < 1e-4);
  CHECK((t.P * t.P.transpose() - MatrixXd::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("anchor shift rotates the stable subspace with the orbit") {
  auto sys = make_system("toy");
  const CpsOrbit o = toy_orbit(sys, 201);
  const CpsTarget a = cps_target(sys, o, 50, FloquetScheme::gauss4);
  const CpsTarget b = cps_target(sys, rotate_orbit(o, 50), 0, FloquetScheme::gauss4);
  CHECK((a.u0 - b.u0).norm() < 1e-14);
  CHECK((a.P * b.stable_basis).norm() < 1e-8);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(a.multipliers[i] - b.multipliers[i]) < 1e-9 * std::abs(b.multipliers[i]));
}

TEST_CASE("discounted segments integrate linear data exactly") {
  const double rho = 0.7;
  // Constant: (e^{-rho a} - e^{-rho b}) / rho.
  CHECK(discounted_segment(rho, 0.5, 2.0, 3.0, 3.0) ==
        doctest::Approx(3.0 * (std::exp(-0.35) - std::exp(-1.4)) / rho).epsilon(1e-14));
  // g(t) = t on [0, 1]: 1/rho^2 - e^{-rho}(1/rho + 1/rho^2).
  const double exact = 1.0 / (rho * rho) - std::exp(-rho) * (1.0 / rho + 1.0 / (rho * rho));
  CHECK(discounted_segment(rho, 0.0, 1.0, 0.0, 1.0) == doctest::Approx(exact).epsilon(1e-13));
  CHECK(discounted_segment(rho, 1.0, 1.0, 5.0, 5.0) == 0.0);
}

TEST_CASE("periodic value of a constant orbit is the steady value") {
  auto sys = make_system("pollution-ode");
  const VectorXd us = pollution_flat_css(sys);
  CpsOrbit o = make_orbit(41, 7.3, sys.params(), [&](double) { return us; });
  const double v = sys.current_value(us) / sys.rho();
  CHECK(cps_value(sys, o, 0.0) == doctest::Approx(v).epsilon(1e-13));
  CHECK(cps_value(sys, o, 2.9) == doctest::Approx(v).epsilon(1e-13));
  CHECK_THROWS_AS(cps_value(sys, o, 7.3), InvalidArgument);
  o.params.set("rho", 0.0);
  CHECK_THROWS_AS(cps_value(sys, o, 0.0), InvalidArgument);
}
