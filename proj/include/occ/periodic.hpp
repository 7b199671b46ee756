#pragma once

#include <complex>
#include <string>
#include <vector>

#include "occ/continuation.hpp"
#include "occ/model.hpp"
#include "occ/steady.hpp"

namespace occ {

/// A periodic orbit on the rescaled interval [0, 1]; column m-1 repeats column 0.
struct CpsOrbit {
  std::vector<double> t;
  MatrixXd u;  // n_u x m
  double T = 0.0;
  ModelParams params;

  int m() const { return static_cast<int>(t.size()); }
  VectorXd at(int j) const { return u.col(j); }
  /// Orbit state at rescaled time s (taken modulo 1), linear in between mesh points.
  VectorXd sample(double s) const;
  /// Largest sup-norm distance of a snapshot from the orbit mean.
  double amplitude() const;
};

/// Uniform mesh orbit from a callable u(s), s in [0, 1].
template <class F>
CpsOrbit make_orbit(int m, double period, const ModelParams& params, F&& fn) {
  CpsOrbit o;
  o.T = period;
  o.params = params;
  o.t.resize(m);
  for (int j = 0; j < m; ++j) o.t[j] = static_cast<double>(j) / (m - 1);
  const VectorXd first = fn(0.0);
  o.u.resize(first.size(), m);
  o.u.col(0) = first;
  for (int j = 1; j + 1 < m; ++j) o.u.col(j) = fn(o.t[j]);
  o.u.col(m - 1) = first;
  return o;
}

/// Analytic toy orbit (cos, sin, 1, 0) on m mesh points.
CpsOrbit toy_orbit(const CanonicalSystem& sys, int m);

CpsOrbit cps_from_hopf(const CanonicalSystem& sys, const BifurcationEvent& ev, double amplitude, int m = 50);

/// Residual ||M u' + T G(u)|| of the trapezoidal collocation, sup norm.
double cps_residual(const CanonicalSystem& sys, const CpsOrbit& orbit);

/// Trapezoidal collocation with unknown period, closed by the integral phase
/// condition against `reference` (the guess itself when null).
CpsOrbit cps_newton(const CanonicalSystem& sys, const CpsOrbit& guess, double tol = 1e-9, int max_iter = 25,
                    const CpsOrbit* reference = nullptr);

struct CpsBranch {
  std::string param_name;
  std::vector<CpsOrbit> orbits;
  std::vector<int> folds;
  bool failed = false;
  std::string message;
};

struct CpsContinuation {
  double ds = 0.01;
  int n_steps = 10;
  double ds_min = 1e-5;
  double ds_max = 0.1;
  double tol = 1e-8;
  int max_newton = 12;
  double p_min = -1e300;
  double p_max = 1e300;
};

/// Arclength continuation of a converged orbit in (orbit, T, parameter).
CpsBranch cps_continue(const CanonicalSystem& sys, const CpsOrbit& orbit, const std::string& param_name,
                       const CpsContinuation& opt);

/// Hopf branch: starts at the CSS with the Hopf eigenmode as initial tangent.
/// `ds` is the first step in the weighted norm; orbit amplitudes grow roughly like ds.
CpsBranch cps_continue_from_hopf(const CanonicalSystem& sys, const BifurcationEvent& ev, int m,
                                 const CpsContinuation& opt);

/// Orbit at parameter value `value` on a branch, corrected at fixed parameter.
/// Uses the first crossing at or after `from_index`.
CpsOrbit cps_at_param(const CanonicalSystem& sys, const CpsBranch& branch, double value, int from_index = 0);

enum class FloquetScheme { trapezoid, gauss4 };

struct FloquetResult {
  std::vector<std::complex<double>> multipliers;      // descending modulus
  std::vector<std::complex<double>> log_multipliers;  // same order
  int trivial_index = 0;
  double trivial_error = 0.0;  // |gamma_trivial - 1|
  double orthogonality_error = 0.0;
};

/// Transition factors of the variational equation between consecutive mesh points.
std::vector<MatrixXd> floquet_factors(const CanonicalSystem& sys, const CpsOrbit& orbit,
                                      FloquetScheme scheme = FloquetScheme::trapezoid);

FloquetResult floquet(const CanonicalSystem& sys, const CpsOrbit& orbit,
                      FloquetScheme scheme = FloquetScheme::trapezoid);

struct CpsTarget {
  CpsOrbit orbit;
  int anchor_index = 0;
  VectorXd u0;  // anchor state
  std::vector<std::complex<double>> multipliers;
  int trivial_index = 0;
  double trivial_error = 0.0;
  MatrixXd P;            // rows span the complement of the stable subspace at the anchor
  MatrixXd stable_basis; // orthonormal columns of the stable subspace at the anchor
  int defect = 0;
};

/// Saddle data at anchor `anchor_index`; throws SppViolation when require_spp and defect != 0.
CpsTarget cps_target(const CanonicalSystem& sys, const CpsOrbit& orbit, int anchor_index,
                     FloquetScheme scheme = FloquetScheme::trapezoid, bool require_spp = true);

/// Orbit with the mesh rotated so that index `shift` becomes the start.
CpsOrbit rotate_orbit(const CpsOrbit& orbit, int shift);

/// Discounted value over one period started at `phase` (unrescaled time).
double cps_value(const CanonicalSystem& sys, const CpsOrbit& orbit, double phase);

/// Exact integral of exp(-rho t) times the linear interpolant of g on [a, b].
double discounted_segment(double rho, double a, double b, double ga, double gb);

}  // namespace occ
