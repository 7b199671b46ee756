#include <cmath>
#include <random>

#include "doctest.h"
#include "occ/errors.hpp"
#include "occ/models.hpp"
#include "occ/steady.hpp"

using namespace occ;

namespace {

// f(u) = -A u with a fixed diagonal A, so G = A u.
class DiagonalModel final : public CanonicalModel {
 public:
  explicit DiagonalModel(std::vector<double> a) : a_(std::move(a)) {}
  std::string name() const override { return "diag"; }
  int num_states() const override { return static_cast<int>(a_.size()) / 2; }
  bool spatial() const override { return false; }
  ModelParams default_params() const override { return {{"rho", "s"}, {1.0, 1.0}, 0}; }
  std::vector<double> diffusion(const ModelParams&) const override {
    return std::vector<double>(a_.size() / 2, 0.0);
  }
  void rhs(std::span<const double> u, const ModelParams& p, std::span<double> f) const override {
    for (std::size_t i = 0; i < a_.size(); ++i) f[i] = -p.values[1] * a_[i] * u[i];
  }
  void rhs_jacobian(std::span<const double>, const ModelParams& p, std::span<double> j) const override {
    std::fill(j.begin(), j.end(), 0.0);
    for (std::size_t i = 0; i < a_.size(); ++i) j[i * a_.size() + i] = -p.values[1] * a_[i];
  }
  double control(std::span<const double>, const ModelParams&) const override { return 0.0; }
  double local_value(std::span<const double>, const ModelParams&) const override { return 0.0; }

 private:
  std::vector<double> a_;
};

CanonicalSystem diag_system(std::vector<double> a) {
  auto m = std::make_shared<DiagonalModel>(std::move(a));
  return {m, ode_operators(), m->default_params()};
}

}  // namespace

TEST_CASE("newton_css on closed-form and toy fixed points") {
  auto sys = make_system("pollution");
  const VectorXd us = pollution_flat_css(sys);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> ud(-1e-3, 1e-3);
  VectorXd guess = us;
  for (int i = 0; i < guess.size(); ++i) guess[i] += ud(rng);
  int iters = 0;
  const VectorXd u = newton_css(sys, guess, 1e-10, 20, &iters);
  CHECK((u - us).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(iters <= 6);

  auto toy = make_system("toy");
  VectorXd g(4);
  g << 0.1, 0, 1.01, 0.01;
  const VectorXd ut = newton_css(toy, g);
  CHECK(ut.norm() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(ut[2] - 1.0) < 1e-9);

  VectorXd bad = us;
  bad[0] = std::nan("");
  CHECK_THROWS_AS(newton_css(sys, bad), InvalidArgument);
}

TEST_CASE("pollution flat branch follows the closed form") {
  auto sys = make_system("pollution", 0.0, 6);
  auto start = make_branch_point(sys, pollution_flat_css(sys));
  CssContinuation opt;
  opt.ds = 0.02;
  opt.ds_max = 0.02;
  opt.n_steps = 8;
  opt.stability = false;
  auto br = continue_css(sys, start, "rho", opt);
  REQUIRE(br.points.size() == 9);
  CHECK(!br.failed);
  for (const auto& bp : br.points) {
    const VectorXd exact = pollution_flat_css(sys.with_params(bp.params));
    CHECK((bp.u - exact).lpNorm<Eigen::Infinity>() < 1e-8);
  }
  CHECK(br.points.back().param("rho") > 0.6);
  opt.ds = 0.0;
  CHECK_THROWS_AS(continue_css(sys, start, "rho", opt), InvalidArgument);
}

TEST_CASE("continuation up then down returns to start") {
  auto sys = make_system("sloc", 0.0, 8);
  auto start = make_branch_point(sys, sloc_flat_seed(sys, FlatBranch::clean));
  CssContinuation opt;
  opt.ds = 0.01;
  opt.ds_max = 0.01;
  opt.n_steps = 5;
  opt.stability = false;
  auto up = continue_css(sys, start, "b", opt);
  opt.ds = -0.01;
  auto down = continue_css(sys, up.points.back(), "b", opt);
  CHECK((down.points.back().u - start.u).lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(std::abs(down.points.back().param("b") - 0.65) < 1e-6);
}

TEST_CASE("css_target on a diagonal system") {
  auto sys = diag_system({1, 2, -1, -2});
  VectorXd u = VectorXd::Zero(4);
  auto t = css_target(sys, u);
  CHECK(t.defect == 0);
  REQUIRE(t.Psi.rows() == 2);
  // Rows span e3, e4.
  CHECK(t.Psi.leftCols(2).norm() < 1e-14);
  CHECK(std::abs(std::abs(t.Psi.rightCols(2).determinant()) - 1.0) < 1e-12);
  CHECK(t.T_suggest == doctest::Approx(1.0));

  auto bad = diag_system({1, -2, -1, -2});
  CHECK_THROWS_AS(css_target(bad, u), SppViolation);
  CHECK(css_target(bad, u, false).defect == 1);
}

TEST_CASE("pollution defect, Psi annihilation and Hopf localization") {
  auto sys = make_system("pollution");
  auto t = css_target(sys, pollution_flat_css(sys));
  CHECK(t.defect == 0);
  CHECK(t.Psi.rows() == 42);
  // Psi kills the stable eigenvectors.
  const Spectrum s = css_spectrum(sys, t.u_hat, true);
  double worst = 0;
  for (int i = 0; i < static_cast<int>(s.values.size()); ++i) {
    if (s.values[i].real() <= 0) continue;
    const VectorXcd w = s.vectors.col(i);
    worst = std::max(worst, (t.Psi.cast<std::complex<double>>() * w).norm() / w.norm());
  }
  CHECK(worst < 1e-8);
  Eigen::FullPivLU<MatrixXd> lu(t.Psi);
  CHECK(lu.rank() == 42);

  CHECK(css_target(sys.with_param("rho", 0.55), pollution_flat_css(sys.with_param("rho", 0.55)), false).defect == 2);
  CHECK(css_target(sys.with_param("rho", 0.62), pollution_flat_css(sys.with_param("rho", 0.62)), false).defect == 4);
}

TEST_CASE("branch of a stable linear system has no bifurcations") {
  auto sys = diag_system({1, 2, -1, -2});
  auto start = make_branch_point(sys, VectorXd::Zero(4));
  CssContinuation opt;
  opt.ds = 0.1;
  opt.n_steps = 4;
  auto br = continue_css(sys, start, "s", opt);
  CHECK(detect_bifurcations(sys, br).empty());
}
