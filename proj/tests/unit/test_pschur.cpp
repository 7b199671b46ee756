#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "occ/pschur.hpp"

using namespace occ;
using cd = std::complex<double>;

namespace {

std::vector<MatrixXd> random_factors(int n, int k, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<MatrixXd> f(k);
  for (auto& a : f) {
    a = MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) += 0.3 * nd(rng);
  }
  return f;
}

std::vector<cd> naive_eigs(const std::vector<MatrixXd>& f, int start) {
  const int k = static_cast<int>(f.size());
  MatrixXd p = MatrixXd::Identity(f[0].rows(), f[0].cols());
  for (int i = 0; i < k; ++i) p = f[(start + i) % k] * p;
  Eigen::EigenSolver<MatrixXd> es(p);
  std::vector<cd> ev(es.eigenvalues().data(), es.eigenvalues().data() + p.rows());
  return ev;
}

// Largest relative distance from each of `a` to its nearest match in `b`.
double match_error(const std::vector<cd>& a, const std::vector<cd>& b) {
  double worst = 0;
  for (auto z : a) {
    double best = 1e300;
    for (auto w : b) best = std::min(best, std::abs(z - w) / std::abs(w));
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST_CASE("periodic Schur matches the explicit product on random sequences") {
  for (unsigned seed = 1; seed <= 5; ++seed) {
    auto f = random_factors(6, 10, seed);
    PeriodicSchur ps(f);
    const auto ref = naive_eigs(f, 0);
    CHECK(match_error(ps.eigenvalues(), ref) < 1e-10);
    CHECK(ps.orthogonality_error() < 1e-12);

    // Schur property at every space: T_j = Q_{j+1}^H A_j Q_j upper triangular.
    for (int j = 0; j < 10; ++j) {
      MatrixXcd t = ps.basis((j + 1) % 10).adjoint() * f[j].cast<cd>() * ps.basis(j);
      MatrixXcd low = t.triangularView<Eigen::StrictlyLower>();
      CHECK(low.norm() < 1e-12 * t.norm());
    }
  }
}

TEST_CASE("single factor reduces to the ordinary Schur form") {
  auto f = random_factors(7, 1, 42);
  PeriodicSchur ps(f);
  CHECK(match_error(ps.eigenvalues(), naive_eigs(f, 0)) < 1e-12);
}

TEST_CASE("descending reorder keeps eigenvalues and invariant subspaces") {
  auto f = random_factors(6, 10, 9);
  PeriodicSchur ps(f);
  const auto before = ps.eigenvalues();
  ps.sort_descending();
  const auto after = ps.eigenvalues();
  CHECK(match_error(after, before) < 1e-10);
  for (int i = 0; i + 1 < 6; ++i) CHECK(std::abs(after[i]) >= std::abs(after[i + 1]) * (1 - 1e-12));
  CHECK(ps.orthogonality_error() < 1e-12);
  CHECK(ps.triangularity_error() < 1e-12);

  // The leading column of Q_0 is an eigenvector of the product for the dominant eigenvalue.
  MatrixXd p = MatrixXd::Identity(6, 6);
  for (const auto& a : f) p = a * p;
  const Eigen::VectorXcd q = ps.basis(0).col(0);
  const Eigen::VectorXcd r = p.cast<cd>() * q - after[0] * q;
  CHECK(r.norm() < 1e-9 * std::abs(after[0]));
}

TEST_CASE("cyclic rotation leaves the multipliers unchanged") {
  auto f = random_factors(5, 12, 17);
  PeriodicSchur a(f);
  std::rotate(f.begin(), f.begin() + 5, f.end());
  PeriodicSchur b(f);
  auto la = a.log_eigenvalues(), lb = b.log_eigenvalues();
  auto by_mod = [](cd x, cd y) { return x.real() < y.real(); };
  std::sort(la.begin(), la.end(), by_mod);
  std::sort(lb.begin(), lb.end(), by_mod);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(std::exp(la[i].real() - lb[i].real()) - 1.0) < 1e-10);
}

TEST_CASE("extreme spreads stay finite in log form") {
  // diag(e^{+2}, e^{-2}) per factor over 200 factors: multipliers e^{+-400}.
  std::vector<MatrixXd> f(200, MatrixXd::Zero(2, 2));
  for (auto& a : f) {
    a(0, 0) = std::exp(-2.0);
    a(1, 1) = std::exp(2.0);
    a(0, 1) = 0.3;
  }
  PeriodicSchur ps(f);
  ps.sort_descending();
  const auto l = ps.log_eigenvalues();
  CHECK(l[0].real() == doctest::Approx(400.0).epsilon(1e-12));
  CHECK(l[1].real() == doctest::Approx(-400.0).epsilon(1e-12));
}
