#include "occ/cpath.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "occ/continuation.hpp"
#include "occ/errors.hpp"
#include "occ/value.hpp"

namespace occ {

void CpSettings::validate() const {
  if (nti < 5) throw InvalidArgument("cp settings: nti must be at least 5");
  if (!(sigmin > 0.0 && sigmin <= sig && sig <= sigmax))
    throw InvalidArgument("cp settings: need 0 < sigmin <= sig <= sigmax");
  if (!(xi > 0.0 && xi <= 1.0)) throw InvalidArgument("cp settings: xi must lie in (0, 1]");
  if (!(tol > 0.0) || max_newton < 1) throw InvalidArgument("cp settings: bad Newton controls");
  if (T < 0.0 || nTp < 1) throw InvalidArgument("cp settings: bad truncation time controls");
  if (!(eps_inf > 0.0) || eps2 < 0.0) throw InvalidArgument("cp settings: bad deviation tolerances");
  if (msw != 0 && msw != 1) throw InvalidArgument("cp settings: msw must be 0 or 1");
}

CpTarget CpTarget::from(const CssTarget& t) {
  CpTarget c;
  c.kind = TargetKind::css;
  c.u_hat = t.u_hat;
  c.rows = t.Psi;
  c.params = t.params;
  c.defect = t.defect;
  c.decay_time = t.T_suggest;
  return c;
}

CpTarget CpTarget::from(const CpsTarget& t) {
  CpTarget c;
  c.kind = TargetKind::cps;
  c.orbit = rotate_orbit(t.orbit, t.anchor_index);
  c.u_hat = c.orbit.u.col(0);
  c.rows = t.P;
  c.params = t.orbit.params;
  c.defect = t.defect;
  return c;
}

void CpHistory::record(const CanonicalPath& p, double value, const VectorXd& v0, bool keep_path) {
  alphas.push_back(p.alpha);
  values.push_back(value);
  Ts.push_back(p.T);
  initial_states.push_back(v0);
  if (keep_path) paths.push_back(p);
  recent.push_back(p);
  if (recent.size() > 2) recent.erase(recent.begin());
}

double init_T(const CpTarget& target, const CpSettings& s) {
  if (s.T > 0.0) return s.T;
  if (target.kind == TargetKind::cps) return s.nTp * target.period();
  if (!(target.decay_time > 0.0) || !std::isfinite(target.decay_time))
    throw Error("init_T: target has no stable eigenvalue");
  return target.decay_time;
}

VectorXd blend_states(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star, double alpha) {
  const int nn = sys.n_states_total();
  if (v0_star.size() != nn) throw InvalidArgument("initial states must have length N*n");
  return alpha * v0_star + (1.0 - alpha) * target.u_hat.head(nn);
}

CanonicalPath initial_path(const CanonicalSystem& sys, const CpTarget& target, const CpSettings& s) {
  CanonicalPath p;
  p.target_kind = target.kind;
  p.T = init_T(target, s);
  if (target.kind == TargetKind::css) {
    p.t.resize(s.nti);
    for (int j = 0; j < s.nti; ++j) p.t[j] = static_cast<double>(j) / (s.nti - 1);
    p.u = target.u_hat.replicate(1, s.nti);
    return p;
  }
  // nTp copies of the orbit ending at the anchor; a user T is rounded to whole periods.
  const int copies = s.T > 0.0 ? std::max(1, static_cast<int>(std::lround(s.T / target.period()))) : s.nTp;
  p.T = copies * target.period();
  const CpsOrbit& o = target.orbit;
  const int mo = o.m();
  p.t.push_back(0.0);
  p.u.resize(sys.n_u(), copies * (mo - 1) + 1);
  p.u.col(0) = o.u.col(0);
  int col = 1;
  for (int k = 0; k < copies; ++k)
    for (int i = 1; i < mo; ++i) {
      p.t.push_back((k + o.t[i]) / copies);
      p.u.col(col++) = o.u.col(i);
    }
  p.t.back() = 1.0;
  return p;
}

namespace {

struct Layout {
  int n_u, m, nn;
  bool t_free, a_free;
  int tcol, acol, n_unknowns;
};

Layout layout(const CanonicalSystem& sys, const CpTarget& target, const CanonicalPath& p, const BvpMode& mode) {
  Layout l;
  l.n_u = sys.n_u();
  l.m = p.m();
  l.nn = sys.n_states_total();
  l.t_free = target.kind == TargetKind::cps || mode.free_T;
  l.a_free = mode.free_alpha;
  int k = l.m * l.n_u;
  l.tcol = l.t_free ? k++ : -1;
  l.acol = l.a_free ? k++ : -1;
  l.n_unknowns = k;
  return l;
}

void check_problem(const CanonicalSystem& sys, const CpTarget& target, const CanonicalPath& p, const BvpMode& mode) {
  if (target.defect != 0)
    throw SppViolation("target defect " + std::to_string(target.defect) + " (not a saddle point)", target.defect);
  if (p.m() < 3) throw InvalidArgument("path mesh needs at least 3 points");
  if (p.u.rows() != sys.n_u() || p.u.cols() != p.m()) throw InvalidArgument("path shape mismatch");
  if (target.rows.cols() != sys.n_u()) throw InvalidArgument("projection rows have wrong width");
  const Layout l = layout(sys, target, p, mode);
  const bool closure = target.kind == TargetKind::css && mode.free_T;
  if (closure && !(mode.eps2 > 0.0)) throw InvalidArgument("free-T closure needs eps2 > 0");
  const long eqs = static_cast<long>(l.m - 1) * l.n_u + l.nn + target.rows.rows() + (closure ? 1 : 0) +
                   (mode.free_alpha ? 1 : 0);
  if (eqs != l.n_unknowns)
    throw InvalidArgument("BVP dimension mismatch: " + std::to_string(eqs) + " equations for " +
                          std::to_string(l.n_unknowns) + " unknowns");
}

VectorXd pack(const CanonicalPath& p, const Layout& l) {
  VectorXd x(l.n_unknowns);
  x.head(l.m * l.n_u) = Eigen::Map<const VectorXd>(p.u.data(), l.m * l.n_u);
  if (l.t_free) x(l.tcol) = p.T;
  if (l.a_free) x(l.acol) = p.alpha;
  return x;
}

void unpack(const VectorXd& x, const Layout& l, CanonicalPath& p) {
  Eigen::Map<VectorXd>(p.u.data(), l.m * l.n_u) = x.head(l.m * l.n_u);
  if (l.t_free) p.T = x(l.tcol);
  if (l.a_free) p.alpha = x(l.acol);
}

}  // namespace

VectorXd cp_residual(const CanonicalSystem& sys0, const CpTarget& target, const VectorXd& v0_star,
                     const CanonicalPath& p, const BvpMode& mode) {
  const auto sys = sys0.with_params(target.params);
  const Layout l = layout(sys, target, p, mode);
  const int n = l.n_u;
  const SpMat& mass = sys.mass();
  const bool closure = target.kind == TargetKind::css && mode.free_T;
  VectorXd r(l.n_unknowns);
  r.head(l.nn) = p.u.col(0).head(l.nn) - blend_states(sys, target, v0_star, p.alpha);
  int row = l.nn;
  VectorXd g_prev = sys.residual(p.u.col(0));
  for (int j = 0; j + 1 < l.m; ++j) {
    const VectorXd g_next = sys.residual(p.u.col(j + 1));
    const double h = p.t[j + 1] - p.t[j];
    r.segment(row, n) = mass * (p.u.col(j + 1) - p.u.col(j)) / h + 0.5 * p.T * (g_prev + g_next);
    g_prev = g_next;
    row += n;
  }
  const VectorXd dev = p.end() - target.u_hat;
  r.segment(row, target.rows.rows()) = target.rows * dev;
  row += static_cast<int>(target.rows.rows());
  // Divided by 2 eps2 so the residual is close to ||dev||_2 - eps2 in size.
  if (closure) r(row++) = (dev.squaredNorm() / n - mode.eps2 * mode.eps2) / (2.0 * mode.eps2);
  if (mode.free_alpha)
    r(row++) = mode.arc_s.dot(p.u.col(0) - mode.arc_u0) + mode.arc_s_alpha * (p.alpha - mode.arc_alpha0) -
               mode.arc_sigma;
  return r;
}

SpMat cp_jacobian(const CanonicalSystem& sys0, const CpTarget& target, const VectorXd& v0_star,
                  const CanonicalPath& p, const BvpMode& mode) {
  const auto sys = sys0.with_params(target.params);
  const Layout l = layout(sys, target, p, mode);
  const int n = l.n_u;
  const SpMat& mass = sys.mass();
  const bool closure = target.kind == TargetKind::css && mode.free_T;
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < l.nn; ++i) t.emplace_back(i, i, 1.0);
  if (l.a_free) {
    const VectorXd d = -(v0_star - target.u_hat.head(l.nn));
    for (int i = 0; i < l.nn; ++i)
      if (d[i] != 0.0) t.emplace_back(i, l.acol, d[i]);
  }
  int row = l.nn;
  SpMat j_prev = sys.jacobian(p.u.col(0));
  VectorXd g_prev = sys.residual(p.u.col(0));
  for (int j = 0; j + 1 < l.m; ++j) {
    SpMat j_next = sys.jacobian(p.u.col(j + 1));
    VectorXd g_next = sys.residual(p.u.col(j + 1));
    const double h = p.t[j + 1] - p.t[j];
    auto add = [&](const SpMat& a, double sc, int col0) {
      for (int k = 0; k < a.outerSize(); ++k)
        for (SpMat::InnerIterator it(a, k); it; ++it) t.emplace_back(row + it.row(), col0 + it.col(), sc * it.value());
    };
    add(mass, -1.0 / h, j * n);
    add(j_prev, 0.5 * p.T, j * n);
    add(mass, 1.0 / h, (j + 1) * n);
    add(j_next, 0.5 * p.T, (j + 1) * n);
    if (l.t_free)
      for (int i = 0; i < n; ++i) {
        const double v = 0.5 * (g_prev[i] + g_next[i]);
        if (v != 0.0) t.emplace_back(row + i, l.tcol, v);
      }
    j_prev = std::move(j_next);
    g_prev = std::move(g_next);
    row += n;
  }
  const int last = (l.m - 1) * n;
  for (int r = 0; r < target.rows.rows(); ++r) {
    for (int c = 0; c < n; ++c)
      if (target.rows(r, c) != 0.0) t.emplace_back(row, last + c, target.rows(r, c));
    ++row;
  }
  if (closure) {
    const VectorXd dev = p.end() - target.u_hat;
    for (int c = 0; c < n; ++c) t.emplace_back(row, last + c, dev[c] / (n * mode.eps2));
    ++row;
  }
  if (mode.free_alpha) {
    for (int c = 0; c < n; ++c)
      if (mode.arc_s[c] != 0.0) t.emplace_back(row, c, mode.arc_s[c]);
    t.emplace_back(row, l.acol, mode.arc_s_alpha);
    ++row;
  }
  SpMat a(row, l.n_unknowns);
  a.setFromTriplets(t.begin(), t.end());
  a.makeCompressed();
  return a;
}

CanonicalPath solve_cp_bvp(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                           const CanonicalPath& guess, const BvpMode& mode, const CpSettings& s, BvpReport* report) {
  check_problem(sys, target, guess, mode);
  if (v0_star.size() != sys.n_states_total()) throw InvalidArgument("initial states must have length N*n");
  const Layout l = layout(sys, target, guess, mode);
  CanonicalPath p = guess;
  p.target_kind = target.kind;
  std::vector<double> trace;
  VectorXd r = cp_residual(sys, target, v0_star, p, mode);
  double res = r.lpNorm<Eigen::Infinity>();
  trace.push_back(res);
  int it = 0;
  for (; res >= s.tol && std::isfinite(res) && it < s.max_newton; ++it) {
    VectorXd d;
    try {
      d = sparse_solve(cp_jacobian(sys, target, v0_star, p, mode), r, "solve_cp_bvp");
    } catch (const Error&) {
      break;
    }
    const VectorXd x = pack(p, l);
    // Halve the step while the update leaves the admissible region.
    double lambda = 1.0;
    CanonicalPath trial = p;
    VectorXd rt;
    double rest = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 6; ++k, lambda *= 0.5) {
      unpack(x - lambda * d, l, trial);
      if (!(trial.T > 0.0)) continue;
      try {
        rt = cp_residual(sys, target, v0_star, trial, mode);
      } catch (const DomainError&) {
        continue;
      }
      rest = rt.lpNorm<Eigen::Infinity>();
      if (std::isfinite(rest)) break;
    }
    if (!std::isfinite(rest)) break;
    p = std::move(trial);
    r = std::move(rt);
    res = rest;
    trace.push_back(res);
  }
  if (report) {
    report->iterations = it;
    report->residuals = trace;
  }
  if (!(res < s.tol)) {
    std::ostringstream msg;
    msg << "solve_cp_bvp: no convergence at alpha=" << guess.alpha << "; residuals";
    for (double v : trace) msg << ' ' << v;
    throw NoConvergence(msg.str(), res);
  }
  return p;
}

std::pair<double, double> end_deviation(const CanonicalPath& p, const CpTarget& target) {
  return deviation(p, target.u_hat);
}

namespace {

BvpMode natural_mode(const CpTarget& target, const CpHistory& h) {
  BvpMode m;
  if (target.kind == TargetKind::css && h.free_T_active) {
    m.free_T = true;
    m.eps2 = h.eps2_active;
  }
  return m;
}

}  // namespace

CanonicalPath free_T_policy(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                            const CanonicalPath& path, const CpSettings& s, CpHistory& h) {
  if (target.kind != TargetKind::css) throw InvalidArgument("free_T_policy applies to CSS targets");
  const double dev = end_deviation(path, target).first;
  if (!s.freeT || dev <= s.eps_inf) return path;
  const double eps2 = s.eps2 > 0.0 ? s.eps2 : 0.1 * dev;
  BvpMode mode;
  mode.free_T = true;
  mode.eps2 = eps2;
  CanonicalPath p = solve_cp_bvp(sys, target, v0_star, path, mode, s);
  h.free_T_active = true;
  h.eps2_active = eps2;
  return p;
}

CanonicalPath append_period(const CanonicalPath& path, const CpTarget& target, double fraction) {
  if (target.kind != TargetKind::cps) throw InvalidArgument("append_period needs a CPS target");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw InvalidArgument("append_period: fraction must lie in (0, 1]");
  const CpsOrbit& o = target.orbit;
  const int mo = 1 + static_cast<int>(std::lround(fraction * (o.m() - 1)));
  if (mo < 2) throw InvalidArgument("append_period: fraction below one orbit mesh interval");
  const double tp = o.t[mo - 1] * o.T, t_old = path.T, t_new = t_old + tp;
  CanonicalPath p = path;
  p.T = t_new;
  p.t.resize(path.m() + mo - 1);
  p.u.resize(path.u.rows(), path.m() + mo - 1);
  p.u.leftCols(path.m()) = path.u;
  for (int j = 0; j < path.m(); ++j) p.t[j] = path.t[j] * t_old / t_new;
  for (int i = 1; i < mo; ++i) {
    p.t[path.m() - 1 + i] = (t_old + o.t[i] * o.T) / t_new;
    p.u.col(path.m() - 1 + i) = o.u.col(i);
  }
  p.t.back() = 1.0;
  return p;
}

CanonicalPath extend_T_cps(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                           const CanonicalPath& path, const CpSettings& s, int* appended) {
  if (target.kind != TargetKind::cps) throw InvalidArgument("extend_T_cps needs a CPS target");
  CanonicalPath p = path;
  int count = 0;
  while (end_deviation(p, target).first > s.eps_inf) {
    if (p.T + target.period() > s.t_cap_periods * target.period())
      throw Error("extend_T_cps: truncation time would exceed " + std::to_string(s.t_cap_periods) + " periods");
    p = solve_cp_bvp(sys, target, v0_star, append_period(p, target), BvpMode{}, s);
    ++count;
  }
  if (appended) *appended = count;
  return p;
}

CanonicalPath adapt_T(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                      const CanonicalPath& p, const CpSettings& s, CpHistory& h) {
  if (target.kind == TargetKind::cps) return extend_T_cps(sys, target, v0_star, p, s);
  try {
    return free_T_policy(sys, target, v0_star, p, s, h);
  } catch (const NoConvergence&) {
    return p;  // keep the fixed-T path
  }
}

namespace {

bool same_mesh(const CanonicalPath& a, const CanonicalPath& b) { return a.m() == b.m(); }

// Bring an older path onto the mesh of a newer one by appending periods (CPS only).
std::optional<CanonicalPath> align(const CanonicalPath& older, const CanonicalPath& newer, const CpTarget& target) {
  CanonicalPath p = older;
  while (target.kind == TargetKind::cps && p.m() < newer.m()) p = append_period(p, target);
  if (!same_mesh(p, newer)) return std::nullopt;
  return p;
}

CanonicalPath extrapolate(const CanonicalPath& a, const CanonicalPath& b, double w) {
  CanonicalPath p = b;
  p.u = b.u + w * (b.u - a.u);
  p.T = b.T + w * (b.T - a.T);
  p.alpha = b.alpha + w * (b.alpha - a.alpha);
  if (!(p.T > 0.0)) p.T = b.T;
  return p;
}

void record(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star, const CanonicalPath& p,
            const CpSettings& s, CpHistory& h) {
  const auto st = sys.with_params(target.params);
  h.record(p, path_value(st, p), blend_states(st, target, v0_star, p.alpha), s.retsw);
}

}  // namespace

std::optional<CanonicalPath> arc_step(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
                                      CpHistory& h, double& sigma, const CpSettings& s) {
  if (h.recent.size() < 2) throw InvalidArgument("arc_step: needs two previous converged points");
  const CanonicalPath& p2 = h.recent[1];
  const auto p1 = align(h.recent[0], p2, target);
  const int n = static_cast<int>(p2.u.rows());
  const VectorXd du = p2.u.col(0) - h.recent[0].u.col(0);
  const double da = p2.alpha - h.recent[0].alpha;
  const double du_norm = du.norm() / std::sqrt(static_cast<double>(n));

  BvpMode mode = natural_mode(target, h);
  mode.free_alpha = true;
  mode.arc_s = du_norm > 0.0 ? VectorXd(s.xi * du / (n * du_norm)) : VectorXd(VectorXd::Zero(n));
  mode.arc_s_alpha = (1.0 - s.xi) * (da < 0.0 ? -1.0 : 1.0);
  mode.arc_u0 = p2.u.col(0);
  mode.arc_alpha0 = p2.alpha;
  const double ell = s.xi * du_norm + (1.0 - s.xi) * std::abs(da);
  if (!(ell > 0.0)) throw InvalidArgument("arc_step: previous points coincide");

  while (sigma >= s.sigmin) {
    mode.arc_sigma = sigma;
    CanonicalPath guess;
    if (p1) {
      guess = extrapolate(*p1, p2, sigma / ell);
    } else {
      guess = p2;
      guess.alpha = p2.alpha + sigma / ell * da;
    }
    try {
      BvpReport rep;
      CanonicalPath p = solve_cp_bvp(sys, target, v0_star, guess, mode, s, &rep);
      if (rep.iterations <= 3) sigma = std::min(2.0 * sigma, s.sigmax);
      return p;
    } catch (const NoConvergence&) {
      sigma *= 0.5;
    }
  }
  return std::nullopt;
}

IscResult isc(const CanonicalSystem& sys, const CpTarget& target, const VectorXd& v0_star,
              const std::vector<double>& alvin, int n_arc, const CpSettings& s, CpHistory& h) {
  s.validate();
  if (target.defect != 0)
    throw SppViolation("isc: target defect " + std::to_string(target.defect) + " (not a saddle point)", target.defect);
  if (v0_star.size() != sys.n_states_total()) throw InvalidArgument("isc: initial states must have length N*n");
  for (std::size_t i = 0; i < alvin.size(); ++i)
    if (!(alvin[i] > 0.0 && alvin[i] <= 1.0) || (i > 0 && alvin[i] <= alvin[i - 1]))
      throw InvalidArgument("isc: alpha values must be increasing in (0, 1]");
  if (alvin.empty() && h.recent.size() < 2) throw InvalidArgument("isc: arclength restart needs two stored points");

  IscResult out;
  if (h.recent.empty()) {
    CanonicalPath p0 = initial_path(sys, target, s);
    p0 = solve_cp_bvp(sys, target, v0_star, p0, natural_mode(target, h), s);
    record(sys, target, v0_star, p0, s, h);
  }
  CanonicalPath cur = h.recent.back();

  for (double goal : alvin) {
    if (goal <= cur.alpha) continue;
    double delta = goal - cur.alpha;
    while (cur.alpha < goal) {
      const double a_try = std::min(cur.alpha + delta, goal);
      CanonicalPath guess = cur;
      if (s.msw == 1 && h.recent.size() == 2) {
        const auto prev = align(h.recent[0], cur, target);
        const double da = cur.alpha - h.recent[0].alpha;
        if (prev && da > 0.0) guess = extrapolate(*prev, cur, (a_try - cur.alpha) / da);
      }
      guess.alpha = a_try;
      try {
        CanonicalPath p = solve_cp_bvp(sys, target, v0_star, guess, natural_mode(target, h), s);
        p = adapt_T(sys, target, v0_star, p, s, h);
        cur = p;
        record(sys, target, v0_star, cur, s, h);
      } catch (const NoConvergence& e) {
        delta *= 0.5;
        if (delta < s.min_dalpha) {
          out.stalled = true;
          out.message = "natural continuation stalled at alpha=" + std::to_string(cur.alpha);
          break;
        }
      }
    }
    if (out.stalled) break;
  }
  out.reached = cur.alpha >= 1.0;

  if (!out.reached && (out.stalled || alvin.empty()) && n_arc > 0) {
    double sigma = s.sig;
    for (int k = 0; k < n_arc; ++k) {
      auto p = arc_step(sys, target, v0_star, h, sigma, s);
      if (!p) {
        out.stalled = true;
        out.message = "arclength stalled at alpha=" + std::to_string(cur.alpha);
        break;
      }
      if (p->alpha >= 1.0) {
        // Land exactly on alpha = 1 between the last two points.
        const double w = (1.0 - cur.alpha) / (p->alpha - cur.alpha);
        CanonicalPath guess = *p;
        if (same_mesh(cur, *p)) {
          guess.u = cur.u + w * (p->u - cur.u);
          guess.T = cur.T + w * (p->T - cur.T);
        }
        guess.alpha = 1.0;
        try {
          CanonicalPath q = solve_cp_bvp(sys, target, v0_star, guess, natural_mode(target, h), s);
          cur = adapt_T(sys, target, v0_star, q, s, h);
          record(sys, target, v0_star, cur, s, h);
          out.reached = true;
          out.stalled = false;
          out.message.clear();
        } catch (const NoConvergence&) {
          out.message = "could not land on alpha=1";
        }
        break;
      }
      cur = adapt_T(sys, target, v0_star, *p, s, h);
      record(sys, target, v0_star, cur, s, h);
      out.stalled = false;
      out.message.clear();
    }
    if (!out.reached && out.message.empty()) {
      out.stalled = true;
      out.message = "arclength steps exhausted at alpha=" + std::to_string(cur.alpha);
    }
  }
  out.path = cur;
  return out;
}

}  // namespace occ
