#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "occ/cpath.hpp"

namespace occ {

struct SkibaSettings {
  CpSettings cp;
  std::vector<double> alvin{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};  // cold B legs
  int n_arc = 20;
  double value_tol = 1e-4;
  double alpha_width = 1e-3;
  int max_probes = 60;
};

struct SkibaRow {
  double alpha = 0.0;
  double J_A = 0.0;
  double J_B = 0.0;
  bool valid = false;
  std::string note;  // failure reason for invalid rows

  double diff() const { return J_A - J_B; }
};

/// The two legs of a Skiba comparison. Leg A is the homotopy v0(alpha) =
/// alpha v0_star + (1 - alpha) v_hat_A; leg B starts from the same states.
struct SkibaProblem {
  CanonicalSystem sys;
  CpTarget A, B;
  VectorXd v0_star;
};

struct SkibaScan {
  std::vector<SkibaRow> rows;
  // Converged paths per row, for warm starts; empty for invalid rows.
  std::vector<std::optional<CanonicalPath>> paths_A, paths_B;
};

struct SkibaResult {
  double alpha_star = 0.0;
  double J_A = 0.0, J_B = 0.0;
  std::optional<CanonicalPath> path_A, path_B;
  std::pair<double, double> bracket{0.0, 0.0};
  int probes = 0;
};

/// Initial states of leg A at alpha.
VectorXd skiba_states(const SkibaProblem& pr, double alpha);

/// Path to target B from `states`: warm Newton from `warm` when given, else
/// (or on failure) a fresh homotopy from the states of B.
CanonicalPath skiba_leg_B(const SkibaProblem& pr, const VectorXd& states, const CanonicalPath* warm,
                          const SkibaSettings& s);

/// Leg B for every alpha of a retained leg-A history. Failed legs mark the row invalid.
SkibaScan skiba_scan(const SkibaProblem& pr, const CpHistory& history_A, const SkibaSettings& s);

/// Bracketed root of J_A - J_B on the scan, refined with `probe(alpha) -> (J_A, J_B)`.
/// Throws NoSkiba when no sign change between consecutive valid rows exists.
SkibaResult skiba_bisect(const std::vector<SkibaRow>& rows, const std::function<std::pair<double, double>(double)>& probe,
                         double value_tol = 1e-4, double alpha_width = 1e-3, int max_probes = 60);

/// As above, probing both legs with warm starts from the nearest scanned alpha.
SkibaResult skiba_bisect(const SkibaProblem& pr, const SkibaScan& scan, const SkibaSettings& s);

}  // namespace occ
