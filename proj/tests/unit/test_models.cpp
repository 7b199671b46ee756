#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "occ/errors.hpp"
#include "occ/models.hpp"

using namespace occ;

namespace {

VectorXd random_field(const CanonicalSystem& sys, std::mt19937& rng) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  VectorXd u(sys.n_u());
  for (int i = 0; i < u.size(); ++i) u[i] = ud(rng);
  if (sys.model().name() == "sloc") {
    // Keep the costate away from zero: lambda in (-3, -0.5).
    const int n = sys.nodes();
    for (int i = 0; i < n; ++i) u[n + i] = -1.75 + 1.25 * u[n + i];
    for (int i = 0; i < n; ++i) u[i] = 1.0 + u[i];
  }
  return u;
}

MatrixXd fd_jacobian(const CanonicalSystem& sys, const VectorXd& u) {
  MatrixXd j(u.size(), u.size());
  for (int k = 0; k < u.size(); ++k) {
    const double h = 1e-6 * std::max(1.0, std::abs(u[k]));
    VectorXd up = u, um = u;
    up[k] += h;
    um[k] -= h;
    j.col(k) = (sys.residual(up) - sys.residual(um)) / (2 * h);
  }
  return j;
}

}  // namespace

TEST_CASE("Jacobians match central differences for every model") {
  std::mt19937 rng(11);
  for (const auto& name : model_names()) {
    CAPTURE(name);
    auto sys = make_system(name, 0.0, name == "sloc" ? 8 : 6);
    for (int trial = 0; trial < 20; ++trial) {
      const VectorXd u = random_field(sys, rng);
      const MatrixXd ja = sys.jacobian_dense(u);
      const MatrixXd jf = fd_jacobian(sys, u);
      CHECK((ja - jf).norm() / std::max(1.0, jf.norm()) < 1e-5);
    }
  }
}

TEST_CASE("pollution closed-form CSS is a zero of G") {
  auto sys = make_system("pollution");
  REQUIRE(sys.nodes() == 21);
  REQUIRE(sys.n_u() == 84);
  const VectorXd u = pollution_flat_css(sys);
  CHECK(sys.residual(u).lpNorm<Eigen::Infinity>() < 1e-12);
  CHECK(u[0] == doctest::Approx(0.216389).epsilon(1e-6));
  CHECK(u[21] == doctest::Approx(0.683333).epsilon(1e-6));
  CHECK(u[42] == -1.0);
  CHECK(u[63] == doctest::Approx(-1.5));
  CHECK(sys.current_value(u) == doctest::Approx(0.0797222).epsilon(1e-6));

  auto s56 = sys.with_param("rho", 0.56);
  const VectorXd u56 = pollution_flat_css(s56);
  CHECK(u56[0] == doctest::Approx(0.2034).epsilon(2e-3));
  CHECK(u56[21] == doctest::Approx(0.7159).epsilon(2e-3));

  auto s0 = sys.with_param("beta", 0.0).with_param("rho", 0.3);
  CHECK(pollution_flat_css(s0)[21] == doctest::Approx(0.65));
}

TEST_CASE("toy residual at the orbit anchor") {
  auto sys = make_system("toy");
  VectorXd u(4);
  u << 1, 0, 1, 0;
  const VectorXd g = sys.residual(u);
  CHECK(std::abs(g[0]) < 1e-15);
  CHECK(g[1] == doctest::Approx(-1.0));
  CHECK(std::abs(g[2]) < 1e-15);
  CHECK(std::abs(g[3]) < 1e-15);
  CHECK(sys.control(u).size() == 0);
  CHECK(sys.current_value(u) == 0.0);
}

TEST_CASE("toy right-hand side agrees with polar form") {
  auto sys = make_system("toy");
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ud(-2, 2);
  const double rho = 1.0, th = 1.0;
  for (int trial = 0; trial < 50; ++trial) {
    VectorXd u(4);
    for (int i = 0; i < 4; ++i) u[i] = ud(rng);
    const VectorXd f = -sys.residual(u);
    const double r = std::hypot(u[0], u[1]);
    const double rdot = (u[0] * f[0] + u[1] * f[1]) / r;
    const double phidot = (u[0] * f[1] - u[1] * f[0]) / (r * r);
    CHECK(std::abs(rdot - rho * (-r + u[2] * r * r * r)) < 1e-10 * std::max(1.0, std::abs(rdot)));
    CHECK(std::abs(phidot - th) < 1e-10);
  }
}

TEST_CASE("shallow lake rhs terms") {
  ShallowLakeModel m;
  auto p = m.default_params();
  double u[2] = {1.0, -1.0}, f[2];
  m.rhs(u, p, f);
  CHECK(f[0] == doctest::Approx(0.85));
  // f2 is rho*lambda - dH/dv with H = ln(-1/lambda) - gamma v^2 + lambda (-1/lambda - b v + v^2/(1+v^2)).
  auto hamiltonian = [&](double v, double lam) {
    return std::log(-1.0 / lam) - 0.5 * v * v + lam * (-1.0 / lam - 0.65 * v + v * v / (1 + v * v));
  };
  const double h = 1e-6;
  const double dhdv = (hamiltonian(1 + h, -1) - hamiltonian(1 - h, -1)) / (2 * h);
  CHECK(f[1] == doctest::Approx(0.03 * -1.0 - dhdv).epsilon(1e-8));

  double neg[2] = {0.3, -2.0};
  CHECK(m.control(neg, p) == doctest::Approx(0.5));
  double zero[2] = {0.3, 0.0};
  CHECK_THROWS_AS(m.control(zero, p), DomainError);
  double pos[2] = {0.3, 1.0};
  CHECK_THROWS_AS(m.local_value(pos, p), DomainError);
  double flat[2] = {0.0, -1.0};
  CHECK(m.local_value(flat, p) == 0.0);
}

TEST_CASE("pollution control and spectrum symmetry in ODE mode") {
  PollutionModel m(false);
  auto p = m.default_params();
  double u[4] = {0, 0, -1, 0};
  CHECK(m.control(u, p) == 0.0);

  auto sys = make_system("pollution-ode").with_param("rho", 0.55);
  const VectorXd us = pollution_flat_css(sys);
  Eigen::EigenSolver<MatrixXd> es(sys.jacobian_dense(us));
  // Flow eigenvalues -mu pair up as nu and rho - nu.
  std::vector<std::complex<double>> ev;
  for (int i = 0; i < 4; ++i) ev.push_back(-es.eigenvalues()[i]);
  for (auto nu : ev) {
    double best = 1e9;
    for (auto other : ev) best = std::min(best, std::abs(0.55 - nu - other));
    CHECK(best < 1e-10);
  }
}

TEST_CASE("shallow lake flat roots") {
  auto sys = make_system("sloc", 0.0, 10);
  const VectorXd fsc = sloc_flat_seed(sys, FlatBranch::clean);
  const VectorXd fsm = sloc_flat_seed(sys, FlatBranch::muddy);
  CHECK(sys.residual(fsc).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(sys.residual(fsm).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(fsc[0] == doctest::Approx(0.453).epsilon(2e-3));
  CHECK(fsm[0] == doctest::Approx(1.437).epsilon(2e-3));
  // Past the fold only the muddy root survives.
  CHECK_THROWS_AS(sloc_flat_seed(sys.with_param("b", 0.78), FlatBranch::clean), NoConvergence);
  CHECK(sloc_flat_seed(sys.with_param("b", 0.78), FlatBranch::muddy)[0] == doctest::Approx(1.1746).epsilon(1e-3));
}

TEST_CASE("toy analytics") {
  auto a = toy_analytics(ToyModel().default_params());
  CHECK(a.multipliers[1] == doctest::Approx(1.45e-7).epsilon(0.01));
  CHECK(a.period == doctest::Approx(2 * std::numbers::pi));
  auto p = ToyModel().default_params();
  p.set("omega", 0.04);
  CHECK(toy_analytics(p).multipliers[1] == doctest::Approx(0.5325).epsilon(1e-3));
  CHECK(a.energy(0, 0) == doctest::Approx(a.heteroclinic_energy()));
  CHECK(a.energy(1, 0) == doctest::Approx(a.heteroclinic_energy()));
}

TEST_CASE("field layout and size checks") {
  auto sys = make_system("pollution", 0.0, 4);
  VectorXd u = VectorXd::LinSpaced(sys.n_u(), 0, 1);
  VectorXd back(sys.n_u());
  for (int c = 0; c < 4; ++c) back.segment(c * sys.nodes(), sys.nodes()) = sys.component(u, c);
  CHECK(back == u);
  CHECK_THROWS_AS(sys.residual(VectorXd::Zero(3)), InvalidArgument);
  CHECK_THROWS_AS(make_model("nope"), InvalidArgument);
  // Constant fields feel no diffusion.
  const double vals[4] = {0.2, 0.3, -0.9, -1.4};
  const VectorXd c = sys.broadcast(vals);
  PollutionModel m(true);
  double f[4];
  m.rhs(vals, sys.params(), f);
  const VectorXd g = sys.residual(c);
  for (int comp = 0; comp < 4; ++comp) {
    VectorXd expect = -(sys.fem().M * VectorXd::Constant(sys.nodes(), f[comp]));
    CHECK((g.segment(comp * sys.nodes(), sys.nodes()) - expect).lpNorm<Eigen::Infinity>() < 1e-15);
  }
}
