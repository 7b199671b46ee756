#pragma once

#include <limits>
#include <vector>

#include "occ/cpath.hpp"

namespace occ {

/// J(u_hat) = J_ca(u_hat) / rho.
double css_value(const CanonicalSystem& sys, const VectorXd& u_hat);

/// Trapezoidal quadrature of T e^{-rho T t} J_ca(u(t)) over the path mesh; no tail term.
double path_value(const CanonicalSystem& sys, const CanonicalPath& path);

/// Sup and weighted-L2 norm of u(1) - target.
std::pair<double, double> deviation(const CanonicalPath& path, const VectorXd& target);

struct PathDiagnostics {
  double J = 0.0;
  double dev_inf = 0.0;
  double dev_2 = 0.0;
  std::vector<double> time;        // unscaled, t * T
  std::vector<double> jca;         // J_ca(u(t))
  std::vector<double> discounted;  // e^{-rho t T} J_ca(u(t))
  std::vector<double> dev;         // ||u(t) - target||_inf
  double J0 = std::numeric_limits<double>::quiet_NaN();  // start CSS, when known
  double J1 = std::numeric_limits<double>::quiet_NaN();  // target
};

/// Diagnostics against a CSS target u_hat (J1 = css_value) or a CPS anchor (J1 = cps_value at phase 0).
PathDiagnostics diagnose(const CanonicalSystem& sys, const CanonicalPath& path, const CpTarget& target,
                         const VectorXd* start_css = nullptr);

}  // namespace occ
