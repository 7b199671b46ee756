#pragma once

#include <complex>
#include <string>
#include <vector>

#include "occ/continuation.hpp"
#include "occ/model.hpp"

namespace occ {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

/// Eigenvalues below this magnitude in real part are treated as marginal.
inline constexpr double kMarginal = 1e-10;

/// Eigenpairs of the generalized problem dG w = mu M w.
struct Spectrum {
  std::vector<std::complex<double>> values;  // sorted by ascending real part
  MatrixXcd vectors;                         // columns match values; empty if not requested
};

Spectrum css_spectrum(const CanonicalSystem& sys, const VectorXd& u, bool with_vectors = false);

/// Number of eigenvalues with negative real part (unstable for u_t = -G).
int count_negative(const Spectrum& s);

VectorXd newton_css(const CanonicalSystem& sys, const VectorXd& guess, double tol = 1e-10,
                    int max_iter = 20, int* iterations = nullptr);

struct BranchPoint {
  VectorXd u;
  ModelParams params;
  double arclength = 0.0;
  double j_ca = 0.0;
  int n_neg = 0;
  std::string stability_tag;  // "stable", "saddle" or "unstable"

  double param(std::string_view name) const { return params.get(name); }
};

/// Evaluate J_ca and the spectrum count at a converged CSS.
BranchPoint make_branch_point(const CanonicalSystem& sys, const VectorXd& u, double arclength = 0.0);

struct Branch {
  std::string model;
  std::string param_name;
  std::vector<BranchPoint> points;
  std::vector<int> folds;
  bool failed = false;
  std::string message;
};

struct CssContinuation {
  double ds = 0.01;
  int n_steps = 20;
  double ds_min = 1e-6;
  double ds_max = 0.05;
  double tol = 1e-10;
  int max_newton = 10;
  double p_min = -1e300;
  double p_max = 1e300;
  bool stability = true;
};

Branch continue_css(const CanonicalSystem& sys, const BranchPoint& start, const std::string& param_name,
                    const CssContinuation& opt);

enum class BifurcationKind { steady, hopf };

struct BifurcationEvent {
  std::string param_name;
  double param = 0.0;
  BifurcationKind kind = BifurcationKind::steady;
  int spatial_mode = 0;
  VectorXd u;
  ModelParams params;
  std::complex<double> mu;  // crossing eigenvalue (Im >= 0 for Hopf)
  VectorXcd phi;            // its eigenvector
  int kernel_dim = 1;       // number of eigenvalues within the crossing cluster
  int n_neg_before = 0;
  int n_neg_after = 0;
};

/// Bisection on segments where n_neg jumps; `ptol` is the parameter tolerance.
std::vector<BifurcationEvent> detect_bifurcations(const CanonicalSystem& sys, const Branch& branch,
                                                  double ptol = 1e-3);

/// Dominant cosine mode of node values on the FEM mesh.
int dominant_mode(const CanonicalSystem& sys, const VectorXd& node_values, int max_mode = 20);

/// Predictor u_bif + amplitude * phi on the bifurcating branch.
VectorXd branch_switch(const CanonicalSystem& sys, const BifurcationEvent& ev, double amplitude);

/// Corrector for a branch_switch predictor: Newton on G(u; p) = 0 together with
/// <phi, u - u_bif> = amplitude, the parameter left free.
BranchPoint switch_corrector(const CanonicalSystem& sys, const BifurcationEvent& ev, double amplitude,
                             double tol = 1e-10, int max_iter = 30);

struct CssTarget {
  VectorXd u_hat;
  ModelParams params;
  int defect = 0;
  MatrixXd Psi;
  std::vector<std::complex<double>> spectrum;
  double T_suggest = 0.0;
  bool near_degenerate = false;
  int stable_dim = 0;
};

/// Saddle data at a converged CSS; throws SppViolation when require_spp and defect != 0.
CssTarget css_target(const CanonicalSystem& sys, const VectorXd& u_hat, bool require_spp = true);

}  // namespace occ
