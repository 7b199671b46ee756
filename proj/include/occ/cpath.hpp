#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "occ/model.hpp"
#include "occ/periodic.hpp"
#include "occ/steady.hpp"

namespace occ {

struct CpSettings {
  int nti = 50;          // initial time mesh for CSS targets
  double T = 0.0;        // 0: derive from the target
  int nTp = 2;           // CPS: initial T in periods
  bool freeT = true;     // allow the free-T closure for CSS targets
  double eps_inf = std::numeric_limits<double>::infinity();
  double eps2 = 0.0;     // 0: set to eps_inf-violation / 10 on activation
  int msw = 1;           // 0 trivial predictor, 1 secant
  double sig = 0.1, sigmin = 1e-2, sigmax = 10.0;
  double xi = 0.5;
  bool retsw = false;
  double tol = 1e-8;
  int max_newton = 12;
  double min_dalpha = 1e-3;  // natural steps below this stall
  double t_cap_periods = 20.0;

  /// Throws InvalidArgument on inconsistent settings.
  void validate() const;
};

enum class TargetKind { css, cps };

/// Projection data of a saddle target, CSS or CPS.
struct CpTarget {
  TargetKind kind = TargetKind::css;
  VectorXd u_hat;  // CSS point or CPS anchor
  MatrixXd rows;   // Psi or P
  ModelParams params;
  int defect = 0;
  double decay_time = 0.0;  // CSS: 1 / smallest positive Re mu
  CpsOrbit orbit;           // CPS, rotated so that the anchor is column 0

  static CpTarget from(const CssTarget& t);
  static CpTarget from(const CpsTarget& t);
  double period() const { return orbit.T; }
};

struct CanonicalPath {
  std::vector<double> t;
  MatrixXd u;  // n_u x m
  double T = 0.0;
  double alpha = 0.0;
  TargetKind target_kind = TargetKind::css;

  int m() const { return static_cast<int>(t.size()); }
  VectorXd end() const { return u.col(u.cols() - 1); }
};

struct CpHistory {
  std::vector<double> alphas;
  std::vector<double> values;
  std::vector<double> Ts;
  std::vector<VectorXd> initial_states;
  std::vector<CanonicalPath> paths;  // filled when retsw
  // Last two converged points, for secant predictors and arclength restarts.
  std::vector<CanonicalPath> recent;
  bool free_T_active = false;
  double eps2_active = 0.0;

  bool empty() const { return alphas.empty(); }
  void record(const CanonicalPath& p, double value, const VectorXd& v0, bool keep_path);
};

/// Initial truncation time: user T, CSS decay time, or nTp periods.
double init_T(const CpTarget& target, const CpSettings& s);

/// Initial states v0(alpha) = alpha v0* + (1 - alpha) v_hat.
VectorXd blend_states(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star, double alpha);

/// alpha = 0 guess: constant CSS path, or nTp copies of the CPS ending at the anchor.
CanonicalPath initial_path(const CanonicalSystem& sys, const CpTarget& target, const CpSettings& s);

/// Extra equations and unknowns of one BVP solve.
struct BvpMode {
  bool free_T = false;    // CSS: closure ||u(1) - u_hat||_2 = eps2; CPS: always free
  double eps2 = 0.0;
  bool free_alpha = false;  // arclength row
  VectorXd arc_s;           // weights on u(0), length n_u
  double arc_s_alpha = 0.0;
  VectorXd arc_u0;          // u(0) of the previous point
  double arc_alpha0 = 0.0;
  double arc_sigma = 0.0;
};

struct BvpReport {
  int iterations = 0;
  std::vector<double> residuals;
};

/// Newton solve of the truncated BVP. `guess` supplies mesh, u, T and alpha.
CanonicalPath solve_cp_bvp(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                           const CanonicalPath& guess, const BvpMode& mode, const CpSettings& s,
                           BvpReport* report = nullptr);

/// Stacked residual and Jacobian, for tests of the Newton system.
VectorXd cp_residual(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                     const CanonicalPath& p, const BvpMode& mode);
SpMat cp_jacobian(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                  const CanonicalPath& p, const BvpMode& mode);

/// Sup and weighted-L2 deviation of u(1) from the target point.
std::pair<double, double> end_deviation(const CanonicalPath& p, const CpTarget& target);

/// CSS: frees T with the eps2 closure when ||u(1) - u_hat||_inf > eps_inf.
CanonicalPath free_T_policy(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                            const CanonicalPath& path, const CpSettings& s, CpHistory& h);

/// CPS: appends one period at a time while ||u(1) - u_hat_0||_inf > eps_inf.
CanonicalPath extend_T_cps(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                           const CanonicalPath& path, const CpSettings& s, int* appended = nullptr);

/// T adaptation after a converged step: free_T_policy for CSS targets (the fixed-T
/// path is kept if the free-T solve diverges), extend_T_cps for CPS targets.
CanonicalPath adapt_T(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                      const CanonicalPath& path, const CpSettings& s, CpHistory& h);

/// Path with the CPS appended after t = 1: one full period, or the leading
/// `fraction` of it (rounded to orbit mesh points).
CanonicalPath append_period(const CanonicalPath& path, const CpTarget& target, double fraction = 1.0);

/// One pseudo-arclength step in (path, alpha) from the last two points of `h.recent`.
/// Returns nullopt when sigma drops below sigmin; `sigma` is updated in place.
std::optional<CanonicalPath> arc_step(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                                      CpHistory& h, double& sigma, const CpSettings& s);

struct IscResult {
  CanonicalPath path;
  bool reached = false;  // alpha = 1 converged
  bool stalled = false;
  std::string message;
};

/// Homotopy in the initial states over `alvin`, then up to n_arc arclength steps.
/// An empty `alvin` restarts in arclength from the history.
IscResult isc(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
              const std::vector<double>& alvin, int n_arc, const CpSettings& s, CpHistory& h);

}  // namespace occ
