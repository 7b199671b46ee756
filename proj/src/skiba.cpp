#include "occ/skiba.hpp"

#include <cmath>
#include <limits>
#include <map>

#include "occ/errors.hpp"
#include "occ/value.hpp"

namespace occ {

VectorXd skiba_states(const SkibaProblem& pr, double alpha) {
  return blend_states(pr.sys.with_params(pr.A.params), pr.A, pr.v0_star, alpha);
}

namespace {

double leg_value(const SkibaProblem& pr, const CpTarget& t, const CanonicalPath& p) {
  return path_value(pr.sys.with_params(t.params), p);
}

// Newton at alpha from a converged neighbour, followed by the usual T adaptation.
CanonicalPath warm_solve(const SkibaProblem& pr, const CpTarget& t, const VectorXd& v0_star, const CanonicalPath& warm,
                         double alpha, const CpSettings& s) {
  CanonicalPath guess = warm;
  guess.alpha = alpha;
  CanonicalPath p = solve_cp_bvp(pr.sys, t, v0_star, guess, BvpMode{}, s);
  CpHistory h;
  return adapt_T(pr.sys, t, v0_star, p, s, h);
}

std::vector<double> steps_to(double alpha, double step = 0.1) {
  std::vector<double> a;
  for (double x = step; x < alpha - 1e-12; x += step) a.push_back(x);
  a.push_back(alpha);
  return a;
}

}  // namespace

CanonicalPath skiba_leg_B(const SkibaProblem& pr, const VectorXd& states, const CanonicalPath* warm,
                          const SkibaSettings& s) {
  if (warm) {
    try {
      return warm_solve(pr, pr.B, states, *warm, 1.0, s.cp);
    } catch (const NoConvergence&) {
    }
  }
  CpHistory h;
  const IscResult r = isc(pr.sys, pr.B, states, s.alvin, s.n_arc, s.cp, h);
  if (!r.reached) throw NoConvergence("leg B did not reach alpha=1: " + r.message, 0.0);
  return r.path;
}

SkibaScan skiba_scan(const SkibaProblem& pr, const CpHistory& history_A, const SkibaSettings& s) {
  if (history_A.empty()) throw InvalidArgument("skiba_scan: empty history to target A");
  const bool have_paths = history_A.paths.size() == history_A.alphas.size();
  SkibaScan out;
  std::optional<std::size_t> warm;
  for (std::size_t i = 0; i < history_A.alphas.size(); ++i) {
    SkibaRow row;
    row.alpha = history_A.alphas[i];
    row.J_A = history_A.values[i];
    out.paths_A.push_back(have_paths ? std::optional(history_A.paths[i]) : std::nullopt);
    try {
      CanonicalPath b = skiba_leg_B(pr, history_A.initial_states[i], warm ? &*out.paths_B[*warm] : nullptr, s);
      row.J_B = leg_value(pr, pr.B, b);
      row.valid = std::isfinite(row.J_A) && std::isfinite(row.J_B);
      out.paths_B.push_back(std::move(b));
      warm = out.paths_B.size() - 1;
    } catch (const Error& e) {
      row.J_B = std::numeric_limits<double>::quiet_NaN();
      row.note = e.what();
      out.paths_B.push_back(std::nullopt);
    }
    out.rows.push_back(row);
  }
  return out;
}

SkibaResult skiba_bisect(const std::vector<SkibaRow>& rows, const std::function<std::pair<double, double>(double)>& probe,
                         double value_tol, double alpha_width, int max_probes) {
  const SkibaRow* lo = nullptr;
  const SkibaRow* hi = nullptr;
  const SkibaRow* prev = nullptr;
  for (const auto& r : rows) {
    if (!r.valid) continue;
    if (std::abs(r.diff()) < value_tol) {
      SkibaResult res;
      res.alpha_star = r.alpha;
      res.J_A = r.J_A;
      res.J_B = r.J_B;
      res.bracket = {r.alpha, r.alpha};
      return res;
    }
    if (prev && (prev->diff() < 0.0) != (r.diff() < 0.0)) {
      lo = prev;
      hi = &r;
      break;
    }
    prev = &r;
  }
  if (!lo) throw NoSkiba("skiba_bisect: J_A - J_B does not change sign between valid scan rows");

  // Illinois false position: the bracket keeps one end on each side of the root.
  double a = lo->alpha, fa = lo->diff(), b = hi->alpha, fb = hi->diff();
  SkibaResult best;
  best.alpha_star = std::abs(fa) < std::abs(fb) ? a : b;
  best.J_A = std::abs(fa) < std::abs(fb) ? lo->J_A : hi->J_A;
  best.J_B = std::abs(fa) < std::abs(fb) ? lo->J_B : hi->J_B;
  double best_f = std::min(std::abs(fa), std::abs(fb));
  int side = 0;
  for (int k = 0; k < max_probes && std::abs(b - a) >= alpha_width; ++k) {
    double x = b - fb * (b - a) / (fb - fa);
    if (!(std::isfinite(x)) || (x - a) * (x - b) > 0.0) x = 0.5 * (a + b);
    const auto [ja, jb] = probe(x);
    const double fx = ja - jb;
    ++best.probes;
    if (std::abs(fx) < best_f) {
      best_f = std::abs(fx);
      best.alpha_star = x;
      best.J_A = ja;
      best.J_B = jb;
    }
    if (std::abs(fx) < value_tol) break;
    if ((fx < 0.0) == (fb < 0.0)) {
      b = x;
      fb = fx;
      if (side == 1) fa *= 0.5;
      side = 1;
    } else {
      a = x;
      fa = fx;
      if (side == -1) fb *= 0.5;
      side = -1;
    }
  }
  best.bracket = {std::min(a, b), std::max(a, b)};
  return best;
}

SkibaResult skiba_bisect(const SkibaProblem& pr, const SkibaScan& scan, const SkibaSettings& s) {
  auto nearest = [&](double alpha, const std::vector<std::optional<CanonicalPath>>& paths) -> const CanonicalPath* {
    const CanonicalPath* best = nullptr;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < paths.size(); ++i)
      if (paths[i] && std::abs(scan.rows[i].alpha - alpha) < d) {
        d = std::abs(scan.rows[i].alpha - alpha);
        best = &*paths[i];
      }
    return best;
  };
  std::map<double, std::pair<CanonicalPath, CanonicalPath>> probed;
  auto probe = [&](double alpha) {
    CanonicalPath pa;
    if (const CanonicalPath* w = nearest(alpha, scan.paths_A)) {
      pa = warm_solve(pr, pr.A, pr.v0_star, *w, alpha, s.cp);
    } else {
      CpHistory h;
      const IscResult r = isc(pr.sys, pr.A, pr.v0_star, steps_to(alpha), s.n_arc, s.cp, h);
      if (r.path.alpha != alpha) throw NoConvergence("leg A did not reach the probe alpha: " + r.message, 0.0);
      pa = r.path;
    }
    CanonicalPath pb = skiba_leg_B(pr, skiba_states(pr, alpha), nearest(alpha, scan.paths_B), s);
    const double ja = leg_value(pr, pr.A, pa), jb = leg_value(pr, pr.B, pb);
    probed.insert_or_assign(alpha, std::pair{std::move(pa), std::move(pb)});
    return std::pair{ja, jb};
  };
  SkibaResult r = skiba_bisect(scan.rows, probe, s.value_tol, s.alpha_width, s.max_probes);
  if (auto it = probed.find(r.alpha_star); it != probed.end()) {
    r.path_A = it->second.first;
    r.path_B = it->second.second;
  } else {
    for (std::size_t i = 0; i < scan.rows.size(); ++i)
      if (scan.rows[i].alpha == r.alpha_star) {
        r.path_A = scan.paths_A[i];
        r.path_B = scan.paths_B[i];
      }
  }
  return r;
}

}  // namespace occ
