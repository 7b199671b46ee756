#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace occ {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;

/// Periodic Schur form of a cyclic factor sequence A_0, ..., A_{K-1}, where
/// A_j maps space j to space j+1 and space K is space 0.
///
/// T[j] = Q[(j+1) % K]^H A_j Q[j] with every T[j] upper triangular. The
/// product A_{K-1} ... A_0 is never formed; its eigenvalues are products of
/// the diagonals, kept as logarithms.
class PeriodicSchur {
 public:
  explicit PeriodicSchur(const std::vector<MatrixXd>& factors, int max_sweeps_per_eigenvalue = 60);

  int size() const { return n_; }
  int period() const { return static_cast<int>(t_.size()); }

  /// Complex logarithms of the eigenvalues in the current diagonal order.
  std::vector<std::complex<double>> log_eigenvalues() const;
  std::vector<std::complex<double>> eigenvalues() const;

  /// Schur basis of space j; its leading columns span invariant subspaces of
  /// the product taken from space j around the cycle.
  const MatrixXcd& basis(int j) const { return q_[j]; }
  const MatrixXcd& factor(int j) const { return t_[j]; }

  /// Reorder the diagonal so that `rank` (indexed by current position) is
  /// ascending; equal ranks keep their relative order.
  void reorder(std::vector<int> rank);

  /// Reorder by descending modulus.
  void sort_descending();

  /// max_j ||Q_j^H Q_j - I||.
  double orthogonality_error() const;
  /// Largest strictly-lower entry discarded so far, relative to its factor norm.
  double triangularity_error() const { return discarded_; }

 private:
  void rotate_space(int j, int k, std::complex<double> c, std::complex<double> s);
  void restore_triangular(int from_factor, int k);
  bool qr_iterate(int max_sweeps);
  void swap(int k);

  int n_ = 0;
  double discarded_ = 0.0;
  std::vector<MatrixXcd> t_;
  std::vector<MatrixXcd> q_;
};

}  // namespace occ
