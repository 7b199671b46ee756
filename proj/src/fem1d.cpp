#include "occ/fem1d.hpp"

#include <string>

#include "occ/errors.hpp"

namespace occ {

Mesh1D build_mesh(double lx, int nx) {
  if (!(lx > 0.0)) throw InvalidArgument("build_mesh: half-length must be positive");
  if (nx < 1) throw InvalidArgument("build_mesh: need at least one element, got " + std::to_string(nx));
  Mesh1D mesh;
  mesh.nodes.resize(nx + 1);
  const double h = 2.0 * lx / nx;
  for (int i = 0; i <= nx; ++i) mesh.nodes[i] = -lx + h * i;
  mesh.nodes.back() = lx;
  mesh.element_lengths.resize(nx);
  for (int i = 0; i < nx; ++i) mesh.element_lengths[i] = mesh.nodes[i + 1] - mesh.nodes[i];
  return mesh;
}

FemOperators assemble_operators(const Mesh1D& mesh) {
  const int n = mesh.size();
  if (n < 2) throw InvalidArgument("assemble_operators: mesh needs at least two nodes");
  std::vector<Eigen::Triplet<double>> mt, kt;
  mt.reserve(4 * (n - 1));
  kt.reserve(4 * (n - 1));
  double total = 0.0;
  for (int e = 0; e + 1 < n; ++e) {
    const double h = mesh.element_lengths[e];
    if (!(h > 0.0)) throw InvalidArgument("assemble_operators: nonpositive element length");
    total += h;
    const int a = e, b = e + 1;
    mt.emplace_back(a, a, h / 3.0);
    mt.emplace_back(b, b, h / 3.0);
    mt.emplace_back(a, b, h / 6.0);
    mt.emplace_back(b, a, h / 6.0);
    kt.emplace_back(a, a, 1.0 / h);
    kt.emplace_back(b, b, 1.0 / h);
    kt.emplace_back(a, b, -1.0 / h);
    kt.emplace_back(b, a, -1.0 / h);
  }
  FemOperators ops;
  ops.M.resize(n, n);
  ops.K.resize(n, n);
  ops.M.setFromTriplets(mt.begin(), mt.end());
  ops.K.setFromTriplets(kt.begin(), kt.end());
  ops.M.makeCompressed();
  ops.K.makeCompressed();
  ops.nodes = mesh.nodes;
  ops.domain_size = total;
  return ops;
}

FemOperators ode_operators() {
  FemOperators ops;
  ops.M.resize(1, 1);
  ops.K.resize(1, 1);
  ops.M.insert(0, 0) = 1.0;
  ops.M.makeCompressed();
  ops.K.makeCompressed();
  ops.nodes = {0.0};
  ops.domain_size = 1.0;
  return ops;
}

}  // namespace occ
