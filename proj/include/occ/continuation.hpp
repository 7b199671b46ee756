#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "occ/fem1d.hpp"

namespace occ {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Sparse LU solve; throws Error naming `who` if the matrix is singular.
VectorXd sparse_solve(const SpMat& a, const VectorXd& b, const char* who);

/// Append dense rows and columns to a square sparse matrix: [A B; C D].
SpMat border(const SpMat& a, const MatrixXd& cols, const MatrixXd& rows, const MatrixXd& corner);

/// Rows of the result form an orthonormal basis of the row space of `rows`.
MatrixXd orthonormal_rows(const MatrixXd& rows);

/// F(x, p) = 0 with scalar parameter p, for pseudo-arclength continuation.
class PacProblem {
 public:
  virtual ~PacProblem() = default;
  virtual VectorXd residual(const VectorXd& x, double p) const = 0;
  /// n x (n+1) Jacobian; the last column is dF/dp.
  virtual SpMat jacobian(const VectorXd& x, double p) const = 0;
  /// Weight of the x part in the arclength norm, per entry.
  virtual double x_weight(const VectorXd& x) const { return 1.0 / static_cast<double>(x.size()); }
  /// Called after each accepted point (e.g. to re-anchor a phase condition).
  virtual void accept(const VectorXd&, double) {}
};

struct PacOptions {
  double ds = 0.01;  // signed: the sign picks the initial parameter direction
  double ds_min = 1e-6;
  double ds_max = 0.1;
  int n_steps = 10;
  double tol = 1e-10;
  int max_newton = 10;
  int easy_newton = 3;  // doubles ds after this many consecutive fast corrections
  double p_min = -std::numeric_limits<double>::infinity();
  double p_max = std::numeric_limits<double>::infinity();
};

struct PacPoint {
  VectorXd x;
  double p = 0.0;
  double s = 0.0;     // accumulated arclength
  double tau_p = 0.0; // parameter component of the normalized tangent
  int newton_iterations = 0;
};

struct PacResult {
  std::vector<PacPoint> points;
  std::vector<int> folds;  // indices i where tau_p changes sign between i-1 and i
  bool failed = false;
  std::string message;
};

/// Pseudo-arclength continuation from a converged start point.
/// `initial_tangent`, when nonempty, replaces the computed one (length n+1).
PacResult pseudo_arclength(PacProblem& problem, const VectorXd& x0, double p0, const PacOptions& opt,
                           const VectorXd& initial_tangent = VectorXd(),
                           const std::function<void(const PacPoint&)>& on_point = {});

}  // namespace occ
