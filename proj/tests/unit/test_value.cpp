#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "occ/errors.hpp"
#include "occ/models.hpp"
#include "occ/value.hpp"

using namespace occ;

namespace {

CanonicalPath sampled_path(const CanonicalSystem& sys, int m, double T, const std::function<VectorXd(double)>& fn) {
  CanonicalPath p;
  p.T = T;
  p.t.resize(m);
  p.u.resize(sys.n_u(), m);
  for (int j = 0; j < m; ++j) {
    p.t[j] = static_cast<double>(j) / (m - 1);
    p.u.col(j) = fn(p.t[j]);
  }
  return p;
}

}  // namespace

TEST_CASE("steady values") {
  auto sys = make_system("pollution-ode").with_param("rho", 0.5);
  const VectorXd us = pollution_flat_css(sys);
  CHECK(css_value(sys, us) == doctest::Approx(0.159444).epsilon(1e-5));
  CHECK(css_value(sys, us) == doctest::Approx(sys.current_value(us) / 0.5).epsilon(1e-15));
  CHECK_THROWS_AS(css_value(sys.with_param("rho", 0.0), us), InvalidArgument);
  CHECK_THROWS_AS(css_value(sys.with_param("rho", -0.1), us), InvalidArgument);
  auto toy = make_system("toy");
  CHECK(css_value(toy, VectorXd::Zero(4)) == 0.0);
}

TEST_CASE("constant current value integrates in closed form") {
  auto sys = make_system("pollution-ode").with_param("rho", 0.1);
  const VectorXd us = pollution_flat_css(sys);
  const double c = sys.current_value(us);
  const CanonicalPath p = sampled_path(sys, 200, 1.0, [&](double) { return us; });
  CHECK(std::abs(path_value(sys, p) - c * (1.0 - std::exp(-0.1)) / 0.1) < 1e-8);
}

TEST_CASE("path quadrature converges at second order") {
  auto sys = make_system("pollution-ode").with_param("rho", 0.5);
  const VectorXd us = pollution_flat_css(sys);
  auto shape = [&](double t) {
    VectorXd u = us;
    u.head(2) += 0.2 * std::exp(-3.0 * t) * VectorXd::Ones(2);
    u.tail(2) -= 0.1 * std::exp(-3.0 * t) * VectorXd::Ones(2);
    return u;
  };
  std::vector<double> J;
  for (int m : {21, 41, 81, 161}) J.push_back(path_value(sys, sampled_path(sys, m, 4.0, shape)));
  const double r1 = (J[0] - J[1]) / (J[1] - J[2]);
  const double r2 = (J[1] - J[2]) / (J[2] - J[3]);
  CHECK(r1 == doctest::Approx(4.0).epsilon(0.05));
  CHECK(r2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("value decreases with the discount rate for nonnegative current values") {
  auto sys = make_system("pollution-ode");
  const VectorXd us = pollution_flat_css(sys.with_param("rho", 0.5));
  REQUIRE(sys.current_value(us) > 0.0);
  const CanonicalPath p = sampled_path(sys, 60, 5.0, [&](double t) {
    VectorXd u = us;
    u.head(2) *= 1.0 + 0.1 * std::sin(3.0 * t);
    return u;
  });
  double last = std::numeric_limits<double>::infinity();
  for (double rho : {0.3, 0.4, 0.5, 0.6}) {
    const auto s = sys.with_param("rho", rho);
    for (int j = 0; j < p.m(); ++j) REQUIRE(s.current_value(p.u.col(j)) >= 0.0);
    const double v = path_value(s, p);
    CHECK(v < last);
    last = v;
  }
}

TEST_CASE("non-finite current value names the mesh point") {
  auto sys = make_system("sloc");
  VectorXd u = sloc_flat_seed(sys, FlatBranch::clean);
  CanonicalPath p = sampled_path(sys, 5, 1.0, [&](double) { return u; });
  // lambda > 0 gives kappa < 0 at mesh point 3.
  p.u.col(3).tail(sys.nodes()).setConstant(1.0);
  try {
    path_value(sys, p);
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("mesh point 3") != std::string::npos);
  }
}

TEST_CASE("deviation norms") {
  CanonicalPath p;
  p.t = {0.0, 1.0};
  p.u = MatrixXd::Zero(4, 2);
  const VectorXd target = VectorXd::Zero(4);
  auto [di, d2] = deviation(p, target);
  CHECK(di == 0.0);
  CHECK(d2 == 0.0);
  p.u(0, 1) = 1e-3;
  std::tie(di, d2) = deviation(p, target);
  CHECK(di == 1e-3);
  CHECK(d2 == doctest::Approx(1e-3 / 2.0).epsilon(1e-15));

  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  for (int k = 0; k < 100; ++k) {
    for (int i = 0; i < 4; ++i) p.u(i, 1) = g(rng);
    std::tie(di, d2) = deviation(p, target);
    CHECK(d2 >= 0.0);
    CHECK(d2 <= di);
  }
}

TEST_CASE("free-T path lands on the closure radius") {
  auto sys = make_system("pollution-ode").with_param("rho", 0.55);
  const VectorXd us = pollution_flat_css(sys);
  const CpTarget tg = CpTarget::from(css_target(sys, us));
  CpSettings s;
  const VectorXd v0 = VectorXd::Constant(2, 0.4);
  CpHistory h;
  CanonicalPath p = isc(sys, tg, v0, {0.05, 0.1, 0.15, 0.2}, 0, s, h).path;
  REQUIRE(p.alpha == 0.2);
  BvpMode mode;
  mode.free_T = true;
  mode.eps2 = 0.5 * end_deviation(p, tg).second;
  p = solve_cp_bvp(sys, tg, v0, p, mode, s);
  const auto d = diagnose(sys, p, tg, &us);
  CHECK(d.dev_2 == doctest::Approx(mode.eps2).epsilon(1e-6));
  CHECK(d.dev_2 <= d.dev_inf);
  CHECK(d.J0 == doctest::Approx(css_value(sys, us)));
  CHECK(d.J1 == doctest::Approx(css_value(sys, us)));
  CHECK(d.time.size() == static_cast<std::size_t>(p.m()));
  CHECK(d.time.back() == doctest::Approx(p.T));
  CHECK(d.discounted.front() == doctest::Approx(d.jca.front()));
}
