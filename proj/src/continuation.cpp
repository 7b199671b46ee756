#include "occ/continuation.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <string>

#include "occ/errors.hpp"

namespace occ {

VectorXd sparse_solve(const SpMat& a, const VectorXd& b, const char* who) {
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success) throw Error(std::string(who) + ": singular linear system");
  VectorXd x = lu.solve(b);
  if (lu.info() != Eigen::Success || !x.allFinite()) throw Error(std::string(who) + ": linear solve failed");
  return x;
}

SpMat border(const SpMat& a, const MatrixXd& cols, const MatrixXd& rows, const MatrixXd& corner) {
  const Eigen::Index n = a.rows(), m = a.cols();
  const Eigen::Index kc = cols.cols(), kr = rows.rows();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(a.nonZeros() + cols.size() + rows.size() + corner.size());
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index j = 0; j < kc; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (cols(i, j) != 0.0) t.emplace_back(i, m + j, cols(i, j));
  for (Eigen::Index i = 0; i < kr; ++i) {
    for (Eigen::Index j = 0; j < m; ++j)
      if (rows(i, j) != 0.0) t.emplace_back(n + i, j, rows(i, j));
    for (Eigen::Index j = 0; j < kc; ++j)
      if (corner(i, j) != 0.0) t.emplace_back(n + i, m + j, corner(i, j));
  }
  SpMat out(n + kr, m + kc);
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

MatrixXd orthonormal_rows(const MatrixXd& rows) {
  if (rows.rows() == 0) return rows;
  Eigen::HouseholderQR<MatrixXd> qr(rows.transpose());
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(rows.cols(), rows.rows());
  return q.transpose();
}

namespace {

struct Frame {
  VectorXd x;
  double p;
};

double wdot(const VectorXd& ax, double ap, const VectorXd& bx, double bp, double w) {
  return w * ax.dot(bx) + ap * bp;
}

// Tangent from [J; t_old^T W] t = e_last, normalized in the weighted norm.
VectorXd tangent(const SpMat& jac, const VectorXd& old, double w) {
  const Eigen::Index n = jac.rows();
  MatrixXd row(1, n + 1);
  row.leftCols(n) = w * old.head(n).transpose();
  row(0, n) = old(n);
  // Square system: J is n x (n+1), the row closes it.
  std::vector<Eigen::Triplet<double>> t;
  for (int k = 0; k < jac.outerSize(); ++k)
    for (SpMat::InnerIterator it(jac, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  for (Eigen::Index j = 0; j <= n; ++j)
    if (row(0, j) != 0.0) t.emplace_back(n, j, row(0, j));
  SpMat a(n + 1, n + 1);
  a.setFromTriplets(t.begin(), t.end());
  VectorXd rhs = VectorXd::Zero(n + 1);
  rhs(n) = 1.0;
  VectorXd tau = sparse_solve(a, rhs, "continuation tangent");
  const double nrm = std::sqrt(wdot(tau.head(n), tau(n), tau.head(n), tau(n), w));
  tau /= nrm;
  if (wdot(tau.head(n), tau(n), old.head(n), old(n), w) < 0) tau = -tau;
  return tau;
}

}  // namespace

PacResult pseudo_arclength(PacProblem& problem, const VectorXd& x0, double p0, const PacOptions& opt,
                           const VectorXd& initial_tangent,
                           const std::function<void(const PacPoint&)>& on_point) {
  if (opt.ds == 0.0) throw InvalidArgument("continuation: ds must be nonzero");
  if (opt.n_steps < 0) throw InvalidArgument("continuation: n_steps must be nonnegative");
  const Eigen::Index n = x0.size();
  const double w = problem.x_weight(x0);

  PacResult res;
  PacPoint start{x0, p0, 0.0, 0.0, 0};

  VectorXd tau(n + 1);
  if (initial_tangent.size() == n + 1) {
    tau = initial_tangent;
    const double nrm = std::sqrt(wdot(tau.head(n), tau(n), tau.head(n), tau(n), w));
    tau /= nrm;
  } else {
    VectorXd seed = VectorXd::Zero(n + 1);
    seed(n) = 1.0;
    tau = tangent(problem.jacobian(x0, p0), seed, w);
  }
  if (opt.ds < 0) tau = -tau;
  start.tau_p = tau(n);
  res.points.push_back(start);
  if (on_point) on_point(start);

  double ds = std::min(std::abs(opt.ds), opt.ds_max);
  int easy = 0;
  Frame cur{x0, p0};
  double s = 0.0;

  for (int step = 0; step < opt.n_steps; ++step) {
    bool ok = false;
    Frame next{};
    int iters = 0;
    double last_res = 0.0;
    while (!ok) {
      next.x = cur.x + ds * tau.head(n);
      next.p = cur.p + ds * tau(n);
      const VectorXd px = next.x;
      const double pp = next.p;
      for (iters = 1; iters <= opt.max_newton; ++iters) {
        SpMat jac;
        VectorXd f;
        try {
          f = problem.residual(next.x, next.p);
          if (!f.allFinite()) break;
          jac = problem.jacobian(next.x, next.p);
        } catch (const Error&) {
          break;
        }
        VectorXd rhs(n + 1);
        rhs.head(n) = -f;
        rhs(n) = -(w * tau.head(n).dot(next.x - px) + tau(n) * (next.p - pp));
        std::vector<Eigen::Triplet<double>> t;
        for (int k = 0; k < jac.outerSize(); ++k)
          for (SpMat::InnerIterator it(jac, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
        for (Eigen::Index j = 0; j < n; ++j)
          if (tau(j) != 0.0) t.emplace_back(n, j, w * tau(j));
        t.emplace_back(n, n, tau(n));
        SpMat a(n + 1, n + 1);
        a.setFromTriplets(t.begin(), t.end());
        VectorXd d;
        try {
          d = sparse_solve(a, rhs, "continuation corrector");
        } catch (const Error&) {
          break;
        }
        next.x += d.head(n);
        next.p += d(n);
        last_res = f.lpNorm<Eigen::Infinity>();
        const double step_norm = d.lpNorm<Eigen::Infinity>();
        if (step_norm < 1e-3 * opt.tol + 1e-14 * (1.0 + next.x.lpNorm<Eigen::Infinity>()) ||
            (step_norm < 1e-6 && last_res < opt.tol)) {
          VectorXd fr = problem.residual(next.x, next.p);
          last_res = fr.lpNorm<Eigen::Infinity>();
          if (last_res < opt.tol) {
            ok = true;
            break;
          }
        }
      }
      if (ok && (next.p < opt.p_min || next.p > opt.p_max)) {
        res.message = "parameter left the admissible range";
        return res;
      }
      if (!ok) {
        ds *= 0.5;
        easy = 0;
        if (ds < opt.ds_min) {
          res.failed = true;
          res.message = "corrector failed below ds_min (last residual " + std::to_string(last_res) + ")";
          return res;
        }
      }
    }
    VectorXd old_tau = tau;
    tau = tangent(problem.jacobian(next.x, next.p), tau, w);
    s += ds;
    PacPoint pt{next.x, next.p, s, tau(n), iters};
    if (std::signbit(old_tau(n)) != std::signbit(tau(n)) && old_tau(n) != 0.0)
      res.folds.push_back(static_cast<int>(res.points.size()));
    res.points.push_back(pt);
    problem.accept(next.x, next.p);
    if (on_point) on_point(pt);
    cur = next;
    if (iters <= opt.easy_newton) {
      if (++easy >= 3) {
        ds = std::min(2.0 * ds, opt.ds_max);
        easy = 0;
      }
    } else {
      easy = 0;
    }
  }
  return res;
}

}  // namespace occ
