#pragma once

#include <Eigen/Sparse>
#include <vector>

namespace occ {

using SpMat = Eigen::SparseMatrix<double>;

/// Nodes of a 1D mesh on (-lx, lx).
struct Mesh1D {
  std::vector<double> nodes;
  std::vector<double> element_lengths;

  int size() const { return static_cast<int>(nodes.size()); }
  double half_length() const { return 0.5 * (nodes.back() - nodes.front()); }
};

/// P1 mass and Neumann stiffness matrices. M^{-1} K approximates -Laplace.
struct FemOperators {
  SpMat M;
  SpMat K;
  std::vector<double> nodes;
  double domain_size = 1.0;

  int size() const { return static_cast<int>(M.rows()); }
  bool spatial() const { return !nodes.empty() && nodes.size() > 1; }
};

Mesh1D build_mesh(double lx, int nx);
FemOperators assemble_operators(const Mesh1D& mesh);

/// Degenerate operators for ODE models: one node, M = 1, K = 0.
FemOperators ode_operators();

}  // namespace occ
