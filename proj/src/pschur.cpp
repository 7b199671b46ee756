#include "occ/pschur.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "occ/errors.hpp"

namespace occ {

namespace {

using cd = std::complex<double>;
constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Givens {
  double c;
  cd s;
};

// G = [c s; -conj(s) c] with G (x, y)^T = (r, 0)^T.
Givens givens(cd x, cd y) {
  const double ax = std::abs(x), ay = std::abs(y);
  if (ay == 0.0) return {1.0, 0.0};
  if (ax == 0.0) return {0.0, std::conj(y) / ay};
  const double nrm = std::hypot(ax, ay);
  const cd alpha = x / ax;
  return {ax / nrm, alpha * std::conj(y) / nrm};
}

void rotate_rows(MatrixXcd& a, int k, const Givens& g) {
  for (Eigen::Index col = 0; col < a.cols(); ++col) {
    const cd x = a(k, col), y = a(k + 1, col);
    a(k, col) = g.c * x + g.s * y;
    a(k + 1, col) = -std::conj(g.s) * x + g.c * y;
  }
}

// A <- A G^H on columns k, k+1.
void rotate_cols(MatrixXcd& a, int k, const Givens& g) {
  for (Eigen::Index row = 0; row < a.rows(); ++row) {
    const cd x = a(row, k), y = a(row, k + 1);
    a(row, k) = g.c * x + std::conj(g.s) * y;
    a(row, k + 1) = -g.s * x + g.c * y;
  }
}

cd safe_log(cd z) {
  if (z == cd(0.0)) return {-std::numeric_limits<double>::infinity(), 0.0};
  return std::log(z);
}

}  // namespace

PeriodicSchur::PeriodicSchur(const std::vector<MatrixXd>& factors, int max_sweeps_per_eigenvalue) {
  if (factors.empty()) throw InvalidArgument("PeriodicSchur: empty factor sequence");
  n_ = static_cast<int>(factors.front().rows());
  for (std::size_t j = 0; j < factors.size(); ++j)
    if (factors[j].rows() != n_ || factors[j].cols() != n_ || !factors[j].allFinite())
      throw InvalidArgument("PeriodicSchur: factor " + std::to_string(j) + " is not a finite square matrix");
  const int k = static_cast<int>(factors.size());
  t_.resize(k);
  q_.assign(k, MatrixXcd::Identity(n_, n_));

  // QR chain: A_j Q_j = Q_{j+1} R_j for j < K-1.
  for (int j = 0; j + 1 < k; ++j) {
    const MatrixXcd x = factors[j].cast<cd>() * q_[j];
    Eigen::HouseholderQR<MatrixXcd> qr(x);
    q_[j + 1] = qr.householderQ();
    t_[j] = qr.matrixQR().triangularView<Eigen::Upper>();
  }
  t_[k - 1] = factors[k - 1].cast<cd>() * q_[k - 1];

  // Hessenberg reduction of the last factor by Givens cascades.
  MatrixXcd& h = t_[k - 1];
  for (int col = 0; col + 2 < n_; ++col) {
    for (int i = n_ - 1; i >= col + 2; --i) {
      if (h(i, col) == cd(0.0)) continue;
      const Givens g = givens(h(i - 1, col), h(i, col));
      rotate_space(0, i - 1, g.c, g.s);
      h(i, col) = 0.0;
      restore_triangular(0, i - 1);
    }
  }

  if (!qr_iterate(max_sweeps_per_eigenvalue * std::max(1, n_)))
    throw NoConvergence("PeriodicSchur: periodic QR did not converge", 0.0);
}

void PeriodicSchur::rotate_space(int j, int k, cd c, cd s) {
  const Givens g{c.real(), s};
  const int kk = period();
  rotate_rows(t_[(j - 1 + kk) % kk], k, g);
  rotate_cols(t_[j], k, g);
  rotate_cols(q_[j], k, g);
}

void PeriodicSchur::restore_triangular(int from_factor, int k) {
  for (int j = from_factor; j + 1 < period(); ++j) {
    MatrixXcd& t = t_[j];
    if (t(k + 1, k) == cd(0.0)) continue;
    const Givens g = givens(t(k, k), t(k + 1, k));
    rotate_space(j + 1, k, g.c, g.s);
    t(k + 1, k) = 0.0;
  }
}

bool PeriodicSchur::qr_iterate(int max_sweeps) {
  const int kk = period();
  MatrixXcd& h = t_[kk - 1];
  int hi = n_ - 1;
  int since_deflation = 0;
  int total = 0;
  while (hi > 0) {
    int lo = hi;
    while (lo > 0) {
      const double scale = std::abs(h(lo, lo)) + std::abs(h(lo - 1, lo - 1));
      const double tol = kEps * (scale > 0 ? scale : h.norm());
      if (std::abs(h(lo, lo - 1)) <= tol) {
        h(lo, lo - 1) = 0.0;
        break;
      }
      --lo;
    }
    if (lo == hi) {
      --hi;
      since_deflation = 0;
      continue;
    }
    if (++total > max_sweeps) return false;
    ++since_deflation;

    // Trailing 2x2 block of the product on rows/cols hi-1, hi, kept with a log scale.
    const int r0 = std::max(lo, hi - 2);
    const int nr = hi - r0 + 1;
    MatrixXcd x = MatrixXcd::Zero(nr, 2);
    x(nr - 2, 0) = 1.0;
    x(nr - 1, 1) = 1.0;
    double log_scale = 0.0;
    for (int j = 0; j < kk; ++j) {
      x = t_[j].block(r0, r0, nr, nr) * x;
      const double m = x.cwiseAbs().maxCoeff();
      if (m == 0.0) break;
      x /= m;
      log_scale += std::log(m);
    }
    const cd b11 = x(nr - 2, 0), b12 = x(nr - 2, 1), b21 = x(nr - 1, 0), b22 = x(nr - 1, 1);
    const cd tr = b11 + b22, det = b11 * b22 - b12 * b21;
    const cd disc = std::sqrt(tr * tr / 4.0 - det);
    const cd e1 = tr / 2.0 + disc, e2 = tr / 2.0 - disc;
    cd shift = std::abs(e1 - b22) < std::abs(e2 - b22) ? e1 : e2;
    if (since_deflation % 11 == 10) shift = b22 + cd(0.75, 0.5) * (std::abs(b21) + std::abs(b12) + std::abs(b22));

    // First column of the shifted product, scaled consistently.
    cd log_c0 = 0.0;
    for (int j = 0; j + 1 < kk; ++j) log_c0 += safe_log(t_[j](lo, lo));
    const double m = std::max(log_c0.real(), log_scale);
    const cd c0 = std::exp(log_c0 - m);
    const cd sig = shift * std::exp(log_scale - m);
    const cd f0 = h(lo, lo) * c0 - sig;
    const cd f1 = h(lo + 1, lo) * c0;

    Givens g = givens(f0, f1);
    rotate_space(0, lo, g.c, g.s);
    restore_triangular(0, lo);
    for (int k = lo; k + 1 < hi; ++k) {
      if (h(k + 2, k) == cd(0.0)) continue;
      g = givens(h(k + 1, k), h(k + 2, k));
      rotate_space(0, k + 1, g.c, g.s);
      h(k + 2, k) = 0.0;
      restore_triangular(0, k + 1);
    }
  }
  return true;
}

std::vector<std::complex<double>> PeriodicSchur::log_eigenvalues() const {
  std::vector<cd> out(n_, 0.0);
  for (const auto& t : t_)
    for (int i = 0; i < n_; ++i) out[i] += safe_log(t(i, i));
  for (auto& z : out) z = {z.real(), std::arg(std::exp(cd(0.0, z.imag())))};
  return out;
}

std::vector<std::complex<double>> PeriodicSchur::eigenvalues() const {
  auto l = log_eigenvalues();
  for (auto& z : l) z = std::exp(z);
  return l;
}

void PeriodicSchur::swap(int k) {
  const int kk = period();
  // Log of the product of the 2x2 diagonal blocks' entries.
  cd la = 0.0, lc = 0.0;
  for (const auto& t : t_) {
    la += safe_log(t(k, k));
    lc += safe_log(t(k + 1, k + 1));
  }
  // Upper-right entry of the block product: sum_j (prod_{i>j} a_i) b_j (prod_{i<j} c_i).
  std::vector<cd> pre_c(kk + 1, 0.0), post_a(kk + 1, 0.0);
  for (int j = 0; j < kk; ++j) pre_c[j + 1] = pre_c[j] + safe_log(t_[j](k + 1, k + 1));
  for (int j = kk - 1; j >= 0; --j) post_a[j] = post_a[j + 1] + safe_log(t_[j](k, k));
  const double m = std::max(la.real(), lc.real());
  cd bsum = 0.0;
  for (int j = 0; j < kk; ++j) {
    const cd b = t_[j](k, k + 1);
    if (b == cd(0.0)) continue;
    bsum += std::exp(post_a[j + 1] + std::log(b) + pre_c[j] - m);
  }
  const cd denom = std::exp(lc - m) - std::exp(la - m);
  if (std::abs(denom) == 0.0) return;  // equal eigenvalues: nothing to exchange

  // Eigenvector of the block product for the (k+1, k+1) eigenvalue at space 0.
  Eigen::Vector2cd x0;
  const cd xi = bsum / denom;
  if (std::abs(xi) > 1.0)
    x0 << 1.0, 1.0 / xi;
  else
    x0 << xi, 1.0;
  x0.normalize();

  std::vector<Eigen::Vector2cd> xs(kk);
  xs[0] = x0;
  if (lc.real() >= la.real()) {
    for (int j = 0; j + 1 < kk; ++j) {
      const MatrixXcd& t = t_[j];
      Eigen::Vector2cd y(t(k, k) * xs[j](0) + t(k, k + 1) * xs[j](1), t(k + 1, k + 1) * xs[j](1));
      xs[j + 1] = y.normalized();
    }
  } else {
    Eigen::Vector2cd next = x0;
    for (int j = kk - 1; j >= 1; --j) {
      const MatrixXcd& t = t_[j];
      const cd y2 = next(1) / t(k + 1, k + 1);
      const cd y1 = (next(0) - t(k, k + 1) * y2) / t(k, k);
      xs[j] = Eigen::Vector2cd(y1, y2).normalized();
      next = xs[j];
    }
  }
  for (int j = 0; j < kk; ++j) {
    const Givens g = givens(xs[j](0), xs[j](1));
    rotate_space(j, k, g.c, g.s);
  }
  for (auto& t : t_) {
    discarded_ = std::max(discarded_, std::abs(t(k + 1, k)) / t.norm());
    t(k + 1, k) = 0.0;
  }
}

void PeriodicSchur::reorder(std::vector<int> rank) {
  if (static_cast<int>(rank.size()) != n_) throw InvalidArgument("PeriodicSchur::reorder: rank size mismatch");
  bool changed = true;
  while (changed) {
    changed = false;
    for (int k = 0; k + 1 < n_; ++k) {
      if (rank[k] > rank[k + 1]) {
        swap(k);
        std::swap(rank[k], rank[k + 1]);
        changed = true;
      }
    }
  }
}

void PeriodicSchur::sort_descending() {
  const auto l = log_eigenvalues();
  std::vector<int> order(n_);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return l[a].real() > l[b].real(); });
  std::vector<int> rank(n_);
  for (int i = 0; i < n_; ++i) rank[order[i]] = i;
  reorder(rank);
}

double PeriodicSchur::orthogonality_error() const {
  double e = 0.0;
  for (const auto& q : q_) e = std::max(e, (q.adjoint() * q - MatrixXcd::Identity(n_, n_)).norm());
  return e;
}

}  // namespace occ
