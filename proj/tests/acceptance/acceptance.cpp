// Acceptance criteria 1-11. Prints one PASS/FAIL line per criterion.
// Usage: acceptance [k ...]   (no arguments: all criteria)
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "occ/cpath.hpp"
#include "occ/errors.hpp"
#include "occ/io.hpp"
#include "occ/models.hpp"
#include "occ/periodic.hpp"
#include "occ/skiba.hpp"
#include "occ/steady.hpp"
#include "occ/value.hpp"

using namespace occ;
using cd = std::complex<double>;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> steps(int n) {
  std::vector<double> a;
  for (int i = 1; i <= n; ++i) a.push_back(static_cast<double>(i) / n);
  return a;
}

// Moduli sorted ascending, trivial multiplier removed.
std::vector<double> nontrivial(const FloquetResult& f) {
  std::vector<double> v;
  for (int i = 0; i < static_cast<int>(f.multipliers.size()); ++i)
    if (i != f.trivial_index) v.push_back(std::abs(f.multipliers[i]));
  std::sort(v.begin(), v.end());
  return v;
}

double leading_stable(const FloquetResult& f) {
  double best = 0.0;
  for (double a : nontrivial(f))
    if (a < 1.0) best = std::max(best, a);
  return best;
}

// Flat pollution branch from rho = 0.5 and its Hopf events.
struct PollutionBranch {
  CanonicalSystem sys;
  Branch branch;
  std::vector<BifurcationEvent> hopf;
};

PollutionBranch pollution_branch(const std::string& model) {
  auto sys = make_system(model).with_param("rho", 0.5);
  CssContinuation c;
  c.ds = 0.01;
  c.n_steps = 40;
  c.p_max = 0.65;
  PollutionBranch out{sys, continue_css(sys, make_branch_point(sys, pollution_flat_css(sys)), "rho", c), {}};
  for (const auto& e : detect_bifurcations(sys, out.branch))
    if (e.kind == BifurcationKind::hopf) out.hopf.push_back(e);
  return out;
}

CpsOrbit hopf_orbit(const PollutionBranch& pb, int event, int m, double ds_max, int n_steps, double rho) {
  CpsContinuation o;
  o.ds = 0.05;
  o.n_steps = n_steps;
  o.ds_max = ds_max;
  const CpsBranch cb = cps_continue_from_hopf(pb.sys, pb.hopf.at(event), m, o);
  return cps_at_param(pb.sys, cb, rho, cb.folds.empty() ? 0 : cb.folds[0]);
}

// ---------------------------------------------------------------- criteria

Outcome c1() {
  auto sys = make_system("toy");
  const FloquetResult f = floquet(sys, toy_orbit(sys, 400), FloquetScheme::gauss4);
  const auto g = nontrivial(f);
  const double s = std::sqrt(2.0 * kPi);
  const double e1 = std::abs(f.multipliers[f.trivial_index] - 1.0);
  const double e2 = std::abs(g[0] - std::exp(-2.0 * kPi * s));
  const double e3 = std::abs(g[1] - std::exp(4.0 * kPi)) / std::exp(4.0 * kPi);
  const double e4 = std::abs(g[2] - std::exp(2.0 * kPi * s)) / std::exp(2.0 * kPi * s);
  return {g.size() == 3 && e1 < 1e-8 && e2 < 1e-9 && e3 < 1e-4 && e4 < 1e-4,
          fmt("|g1-1|=%.2e |g2-g2*|=%.2e rel3=%.2e rel4=%.2e (gamma2=%.4e)", e1, e2, e3, e4, g[0])};
}

Outcome c2() {
  auto sys = make_system("toy").with_param("omega", 0.04);
  const double g2 = nontrivial(floquet(sys, toy_orbit(sys, 400), FloquetScheme::gauss4))[0];
  return {std::abs(g2 - 0.5325) <= 0.02, fmt("gamma2=%.5f (0.5325 +- 0.02)", g2)};
}

struct ToyRun {
  CanonicalSystem sys;
  CpsOrbit orbit;
  CpTarget target;
  IscResult result;
};

ToyRun toy_run(double x1, double x2) {
  auto sys = make_system("toy");
  const CpsOrbit orbit = cps_newton(sys, toy_orbit(sys, 201));
  const CpTarget tg = CpTarget::from(cps_target(sys, orbit, 0));
  CpSettings s;
  CpHistory h;
  VectorXd v0(2);
  v0 << x1, x2;
  return {sys, orbit, tg, isc(sys, tg, v0, steps(10), 20, s, h)};
}

Outcome c3() {
  const ToyRun r = toy_run(4.0, 0.0);
  const auto an = toy_analytics(r.sys.params());
  const double omega = r.sys.params().get("omega");
  double emax = 0.0;
  for (int j = 0; j < r.result.path.m(); ++j)
    emax = std::max(emax, std::abs(an.energy(r.result.path.u(2, j), r.result.path.u(3, j)) - omega * omega / (2.0 * kPi)));
  const double dev = end_deviation(r.result.path, r.target).first;
  const bool anchor_ok = (r.target.u_hat - (VectorXd(4) << 1.0, 0.0, 1.0, 0.0).finished()).norm() < 1e-12;
  return {r.result.reached && anchor_ok && dev < 1e-4 && emax < 1e-3,
          fmt("reached=%d dev=%.2e max|E-E*|=%.2e", r.result.reached, dev, emax)};
}

Outcome c4() {
  const ToyRun r = toy_run(4.0, 4.0);
  const double T = r.result.path.T, Tp = r.orbit.T;
  const double mod = std::fmod(T, 2.0 * kPi);
  const double e_mod = std::abs(mod - 7.0 * kPi / 4.0);
  // Half-period anchor, started from the converged path with half a period appended.
  const CpTarget shifted = CpTarget::from(cps_target(r.sys, r.orbit, (r.orbit.m() - 1) / 2));
  CpSettings s;
  VectorXd v0(2);
  v0 << 4.0, 4.0;
  const CanonicalPath ps = solve_cp_bvp(r.sys, shifted, v0, append_period(r.result.path, r.target, 0.5), BvpMode{}, s);
  const double dT = ps.T - T;
  const double k = std::round((dT - 0.5 * Tp) / Tp);
  const double e_shift = std::abs(dT - 0.5 * Tp - k * Tp);
  return {r.result.reached && e_mod <= 1e-2 && e_shift <= 1e-2,
          fmt("T=%.5f T mod 2pi=%.5f (7pi/4=%.5f) dT=%.5f Tp/2=%.5f", T, mod, 7.0 * kPi / 4.0, dT, 0.5 * Tp)};
}

Outcome c5() {
  const PollutionBranch pb = pollution_branch("pollution");
  if (pb.sys.nodes() != 21) return {false, "mesh is not n=21"};
  const auto& p = pb.sys.params();
  if (p.get("d1") != 0.001 || p.get("d2") != 0.2) return {false, "diffusion is not (0.001, 0.2)"};
  bool h1 = false, h2 = false;
  std::string ev;
  for (const auto& e : pb.hopf) {
    ev += fmt(" rho=%.4f(l=%d)", e.param, e.spatial_mode);
    if (e.spatial_mode == 1 && e.param >= 0.52 && e.param <= 0.54) h1 = true;
    if (e.spatial_mode == 0 && e.param >= 0.57 && e.param <= 0.59) h2 = true;
  }
  int d[3];
  const double probe[3] = {0.51, 0.55, 0.60};
  for (int i = 0; i < 3; ++i) {
    auto s = pb.sys.with_param("rho", probe[i]);
    d[i] = css_target(s, pollution_flat_css(s), false).defect;
  }
  return {pb.hopf.size() == 2 && h1 && h2 && d[0] == 0 && d[1] == 2 && d[2] == 4,
          fmt("Hopf:%s defects %d/%d/%d", ev.c_str(), d[0], d[1], d[2])};
}

Outcome c6() {
  const PollutionBranch ode = pollution_branch("pollution-ode");
  const CpsOrbit o = hopf_orbit(ode, static_cast<int>(ode.hopf.size()) - 1, 40, 0.2, 40, 0.57);
  const FloquetResult f = floquet(ode.sys.with_params(o.params), o);
  const auto g = nontrivial(f);
  const double triv = std::abs(f.multipliers[f.trivial_index] - 1.0);
  const double rel2 = std::abs(g[0] - 0.303) / 0.303;

  const PollutionBranch pde = pollution_branch("pollution");
  const CpsOrbit o2 = hopf_orbit(pde, 1, 40, 0.2, 14, 0.57);
  const double h2 = leading_stable(floquet(pde.sys.with_params(o2.params), o2));
  const CpsOrbit o1 = hopf_orbit(pde, 0, 40, 0.1, 8, 0.55);
  const double h1 = leading_stable(floquet(pde.sys.with_params(o1.params), o1));
  return {rel2 < 0.05 && triv < 1e-6 && std::abs(h2 - 0.905) <= 0.02 && std::abs(h1 - 0.948) <= 0.02,
          fmt("ODE (%.4g, 1%+.1e, %.4g, %.4g); PDE h2 gamma2=%.4f h1 gamma2=%.4f", g[0], triv, g[1], g[2], h2, h1)};
}

Outcome c7() {
  auto sys = make_system("pollution-ode").with_param("rho", 0.55);
  const CpTarget tg = CpTarget::from(css_target(sys, pollution_flat_css(sys)));
  CpSettings s;
  s.nti = 200;
  double J[2];
  bool reached = true;
  const double start[2] = {0.4, 0.0};
  for (int i = 0; i < 2; ++i) {
    CpHistory h;
    const IscResult r = isc(sys, tg, VectorXd::Constant(2, start[i]), steps(10), 0, s, h);
    reached = reached && r.reached;
    J[i] = path_value(sys, r.path);
  }
  return {reached && std::abs(J[0] + 0.1297) <= 0.005 && std::abs(J[1] - 0.0202) <= 0.005,
          fmt("J(0.4)=%.5f J(0)=%.5f", J[0], J[1])};
}

Outcome c8() {
  const PollutionBranch ode = pollution_branch("pollution-ode");
  const CpsOrbit o = hopf_orbit(ode, static_cast<int>(ode.hopf.size()) - 1, 40, 0.2, 20, 0.57);
  const auto sys = ode.sys.with_params(o.params);
  const CpTarget tg = CpTarget::from(cps_target(sys, o, 0));
  CpSettings s;
  s.eps_inf = 1e-2;
  const double T0 = init_T(tg, s);
  CpHistory h;
  const IscResult r = isc(sys, tg, VectorXd::Constant(2, 0.4), steps(10), 10, s, h);
  const double ratio = r.path.T / o.T;
  const double dev = end_deviation(r.path, tg).first;
  return {r.reached && std::abs(T0 / o.T - 2.0) < 1e-12 && std::abs(ratio - 10.0) <= 2.0 && dev <= 5e-4,
          fmt("reached=%d T=%.3f T_p (want 10 +- 2) dev=%.2e (want <= 5e-4)", r.reached, ratio, dev)};
}

Outcome c9() {
  auto sys = make_system("sloc").with_param("b", 0.6);
  CssContinuation c;
  c.ds = 0.01;
  c.n_steps = 200;
  c.ds_max = 0.02;
  c.p_min = 0.5;
  c.p_max = 0.8;
  const Branch br = continue_css(sys, make_branch_point(sys, sloc_flat_seed(sys, FlatBranch::clean)), "b", c);
  if (br.folds.empty()) return {false, "no fold"};
  const double fold = br.points[br.folds.front()].param("b");
  // Distinct flat CSS at b = 0.70: branch crossings plus the clean and muddy Newton roots.
  const auto s70 = sys.with_param("b", 0.70);
  std::vector<VectorXd> flat{sloc_flat_seed(s70, FlatBranch::clean), sloc_flat_seed(s70, FlatBranch::muddy)};
  for (std::size_t i = 0; i + 1 < br.points.size(); ++i) {
    const double d0 = br.points[i].param("b") - 0.70, d1 = br.points[i + 1].param("b") - 0.70;
    if (d0 * d1 > 0.0 || d0 == d1) continue;
    const double w = d0 / (d0 - d1);
    flat.push_back(newton_css(s70, (1.0 - w) * br.points[i].u + w * br.points[i + 1].u));
  }
  std::vector<VectorXd> distinct;
  for (const auto& u : flat) {
    bool seen = false;
    for (const auto& v : distinct) seen = seen || (u - v).lpNorm<Eigen::Infinity>() < 1e-6;
    if (!seen) distinct.push_back(u);
  }
  const int n_flat = static_cast<int>(distinct.size());
  int patterned = 0;
  // The branch covers FSC and FSI only: it has a single fold.
  for (const auto& e : detect_bifurcations(sys, br))
    if (e.kind == BifurcationKind::steady && e.spatial_mode > 0) ++patterned;
  return {std::abs(fold - 0.73) <= 0.01 && br.folds.size() == 1 && n_flat == 3 && patterned >= 1,
          fmt("folds %zu, fold b=%.4f, distinct flat CSS at b=0.70: %d, patterned steady bifurcations: %d", br.folds.size(), fold, n_flat,
              patterned)};
}

Outcome c10() {
  auto sys = make_system("sloc").with_param("b", 0.6);
  CssContinuation c;
  c.ds = 0.01;
  c.n_steps = 200;
  c.ds_max = 0.02;
  c.p_min = 0.5;
  c.p_max = 0.8;
  const Branch br = continue_css(sys, make_branch_point(sys, sloc_flat_seed(sys, FlatBranch::clean)), "b", c);
  const BifurcationEvent* ev = nullptr;
  const auto evs = detect_bifurcations(sys, br);
  for (const auto& e : evs)
    if (e.kind == BifurcationKind::steady && e.spatial_mode > 0) {
      ev = &e;
      break;
    }
  if (!ev) return {false, "no patterned bifurcation"};
  const BranchPoint bp = switch_corrector(sys.with_params(ev->params), *ev, 0.1);
  CssContinuation c2 = c;
  c2.ds = -0.01;
  c2.n_steps = 300;
  c2.p_min = 0.55;
  const Branch p1 = continue_css(sys.with_params(bp.params), bp, "b", c2);
  const auto s65 = sys.with_param("b", 0.65);
  VectorXd patterned;
  for (std::size_t i = 0, k = 0; i + 1 < p1.points.size(); ++i) {
    const double d0 = p1.points[i].param("b") - 0.65, d1 = p1.points[i + 1].param("b") - 0.65;
    if (d0 * d1 > 0.0 || d0 == d1) continue;
    if (k++ == 2) {
      const double w = d0 / (d0 - d1);
      patterned = newton_css(s65, (1.0 - w) * p1.points[i].u + w * p1.points[i + 1].u);
      break;
    }
  }
  if (patterned.size() == 0) return {false, "patterned branch has fewer than three crossings of b=0.65"};
  const SkibaProblem pr{s65, CpTarget::from(css_target(s65, sloc_flat_seed(s65, FlatBranch::clean))),
                        CpTarget::from(css_target(s65, sloc_flat_seed(s65, FlatBranch::muddy))),
                        patterned.head(s65.n_states_total())};
  SkibaSettings ss;
  ss.cp.retsw = true;
  ss.cp.T = 100.0;
  CpHistory h;
  isc(s65, pr.A, pr.v0_star, ss.alvin, ss.n_arc, ss.cp, h);
  const SkibaResult r = skiba_bisect(pr, skiba_scan(pr, h, ss), ss);
  const double dj = std::abs(r.J_A - r.J_B);
  return {r.alpha_star >= 0.40 && r.alpha_star <= 0.48 && dj < 1e-4,
          fmt("alpha*=%.5f |J_A-J_B|=%.2e probes=%d", r.alpha_star, dj, r.probes)};
}

Outcome c11() {
  const int status = std::system(UNIT_TESTS_BIN " --no-version --minimal > /dev/null 2>&1");
  const bool units = status == 0;
  // Deterministic reruns: the same computation serialized twice.
  auto run_once = [] {
    auto sys = make_system("pollution").with_param("rho", 0.5);
    CssContinuation c;
    c.n_steps = 8;
    std::ostringstream os;
    write_record(os, branch_record(sys, continue_css(sys, make_branch_point(sys, pollution_flat_css(sys)), "rho", c)));
    auto toy = make_system("toy");
    CpHistory h;
    const CpTarget tg = CpTarget::from(cps_target(toy, cps_newton(toy, toy_orbit(toy, 101)), 0));
    write_record(os, path_record(toy, isc(toy, tg, (VectorXd(2) << 4.0, 0.0).finished(), steps(4), 0, CpSettings{}, h).path));
    return os.str();
  };
  const bool same = run_once() == run_once();
  return {units && same, fmt("property suites %s, deterministic rerun %s", units ? "pass" : "FAIL",
                             same ? "byte-identical" : "DIFFERS")};
}

const std::vector<std::pair<const char*, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<const char*, std::function<Outcome()>>> list{
      {"toy multipliers", c1},          {"toy slow regime", c2},
      {"toy CP conservation", c3},      {"toy T-quantization", c4},
      {"pollution Hopf points", c5},    {"pollution CPS multipliers", c6},
      {"pollution CP values", c7},      {"pollution CP-to-CPS T growth", c8},
      {"shallow-lake structure", c9},   {"Skiba point", c10},
      {"property suites", c11}};
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (int k = 1; k <= static_cast<int>(criteria().size()); ++k) which.push_back(k);
  int failed = 0;
  for (int k : which) {
    if (k < 1 || k > static_cast<int>(criteria().size())) {
      std::printf("unknown criterion %d\n", k);
      return 2;
    }
    const auto& [name, fn] = criteria()[k - 1];
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("C%d %s %s: %s\n", k, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
