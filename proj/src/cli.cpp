#include "occ/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include "occ/errors.hpp"
#include "occ/io.hpp"
#include "occ/models.hpp"
#include "occ/value.hpp"

namespace fs = std::filesystem;

namespace occ {

namespace {

const std::set<std::string> kSystemKeys{"model", "lx", "nx"};

const std::set<std::string> kCpKeys{"cp.nti",   "cp.T",      "cp.nTp",        "cp.freeT",          "cp.eps_inf",
                                    "cp.eps2",  "cp.msw",    "cp.sig",        "cp.sigmin",         "cp.sigmax",
                                    "cp.xi",    "cp.tol",    "cp.max_newton", "cp.min_dalpha",     "cp.t_cap_periods"};

const std::set<std::string> kCssKeys{"css.param", "css.ds",  "css.steps", "css.ds_max",  "css.pmin",
                                     "css.pmax",  "css.bif", "css.ptol",  "css.at",      "css.crossing"};

// Keys per stage besides "out". `system` marks stages that build the system from
// model/lx/nx/p.*; the others take it from their input file.
struct StageKeys {
  std::set<std::string> keys;
  bool system = false;
  bool cp = false;
};

const std::map<std::string, StageKeys>& stage_keys() {
  static const std::map<std::string, StageKeys> table = [] {
    std::map<std::string, StageKeys> t;
    t["css"] = {kCssKeys, true, false};
    t["css"].keys.insert("css.start");
    t["swibra"] = {kCssKeys, false, false};
    t["swibra"].keys.insert({"swibra.branch", "swibra.event", "swibra.amp"});
    t["hopf"] = {{"hopf.branch", "hopf.event", "hopf.m", "hopf.ds", "hopf.steps", "hopf.ds_max", "hopf.pmin",
                  "hopf.pmax", "css.ptol"},
                 false,
                 false};
    t["cps"] = {{"cps.branch", "cps.param", "cps.from"}, false, false};
    t["floquet"] = {{"floquet.orbit", "floquet.scheme", "floquet.anchor"}, false, false};
    t["path"] = {{"path.target", "path.anchor", "path.scheme", "path.v0", "path.alvin", "path.narc"}, false, true};
    t["skiba"] = {{"skiba.target_a", "skiba.target_b", "skiba.v0", "skiba.value_tol", "skiba.width", "skiba.alvin",
                   "skiba.narc", "skiba.max_probes"},
                  false,
                  true};
    t["value"] = {{"value.path", "value.point", "value.orbit", "value.phase"}, false, false};
    return t;
  }();
  return table;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_number(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const FormatError&) {
    throw InvalidArgument("config key " + key + ": expected a number, got '" + v + "'");
  }
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_number(key, item));
  }
  return out;
}

bool is_number_list(const std::string& v) {
  try {
    return !to_list("", v).empty();
  } catch (const InvalidArgument&) {
    return false;
  }
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"css", "swibra", "hopf", "cps", "floquet", "path", "skiba", "value"};
  return names;
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw InvalidArgument("config line " + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, trim(std::string_view(line).substr(eq + 1))).second)
      throw InvalidArgument("config line " + std::to_string(lineno) + ": repeated key " + key);
  }
  return out;
}

RunConfig RunConfig::from_map(const std::string& stage, std::map<std::string, std::string> values) {
  const auto it = stage_keys().find(stage);
  if (it == stage_keys().end()) throw InvalidArgument("unknown stage '" + stage + "'");
  const StageKeys& sk = it->second;
  ModelParams defaults;
  if (sk.system) defaults = make_model(values.count("model") ? values.at("model") : "pollution")->default_params();
  for (const auto& [k, v] : values) {
    if (k == "out" || sk.keys.count(k)) continue;
    if (sk.system && kSystemKeys.count(k)) continue;
    if (sk.cp && kCpKeys.count(k)) continue;
    if (sk.system && k.rfind("p.", 0) == 0) {
      if (!defaults.has(k.substr(2))) throw InvalidArgument("unknown parameter '" + k.substr(2) + "' for this model");
      to_number(k, v);
      continue;
    }
    if (!sk.system && (kSystemKeys.count(k) || k.rfind("p.", 0) == 0))
      throw InvalidArgument("key " + k + " not accepted by stage " + stage + ": the system comes from the input file");
    throw InvalidArgument("unknown key '" + k + "' for stage " + stage);
  }
  RunConfig c;
  c.stage = stage;
  c.values = std::move(values);
  return c;
}

RunConfig RunConfig::load(const std::string& stage, const std::string& file, const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> values;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw InvalidArgument("config file not found: " + file);
    std::stringstream ss;
    ss << in.rdbuf();
    values = parse_config_text(ss.str());
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("override '" + o + "' is not key=value");
    values[trim(std::string_view(o).substr(0, eq))] = trim(std::string_view(o).substr(eq + 1));
  }
  return from_map(stage, std::move(values));
}

std::string RunConfig::str(const std::string& key, const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double RunConfig::num(const std::string& key, double fallback) const {
  return has(key) ? to_number(key, values.at(key)) : fallback;
}

int RunConfig::integer(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  const double v = num(key, 0.0);
  if (v != std::floor(v) || std::abs(v) > 1e9) throw InvalidArgument("config key " + key + ": expected an integer");
  return static_cast<int>(v);
}

bool RunConfig::flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& v = values.at(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidArgument("config key " + key + ": expected true or false");
}

std::vector<double> RunConfig::list(const std::string& key) const {
  return has(key) ? to_list(key, values.at(key)) : std::vector<double>{};
}

std::string output_root() {
  const char* env = std::getenv("OCC_OUT_DIR");
  return env && *env ? env : ".";
}

namespace {

// ---------------------------------------------------------------- helpers

struct Context {
  const RunConfig& cfg;
  std::ostream& out;
  fs::path dir;

  fs::path file(const std::string& name) const { return dir / name; }

  // Relative inputs are looked up under the output root.
  fs::path input(const std::string& key, const std::string& what) const {
    const std::string v = cfg.str(key);
    if (v.empty()) throw InvalidArgument("missing key " + key);
    fs::path p(v);
    if (p.is_relative()) p = fs::path(output_root()) / p;
    if (!fs::exists(p)) throw InvalidArgument(what + " not found: " + p.string());
    return p;
  }

  template <class F>
  void csv(const std::string& name, F&& write) const {
    std::ofstream os(file(name), std::ios::binary);
    if (!os) throw Error("cannot write " + file(name).string());
    write(os);
  }
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

CanonicalSystem system_from_config(const RunConfig& c) {
  auto sys = make_system(c.str("model", "pollution"), c.num("lx", 0.0), c.integer("nx", 0));
  ModelParams p = sys.params();
  for (const auto& [k, v] : c.values)
    if (k.rfind("p.", 0) == 0) p.set(k.substr(2), to_number(k, v));
  return sys.with_params(p);
}

CssContinuation css_options(const RunConfig& c) {
  CssContinuation o;
  o.ds = c.num("css.ds", o.ds);
  o.n_steps = c.integer("css.steps", o.n_steps);
  o.ds_max = c.num("css.ds_max", o.ds_max);
  o.p_min = c.num("css.pmin", o.p_min);
  o.p_max = c.num("css.pmax", o.p_max);
  if (o.n_steps < 0) throw InvalidArgument("css.steps must be >= 0");
  if (!(o.ds_max > 0.0)) throw InvalidArgument("css.ds_max must be > 0");
  return o;
}

CpSettings cp_settings(const RunConfig& c) {
  CpSettings s;
  s.nti = c.integer("cp.nti", s.nti);
  s.T = c.num("cp.T", s.T);
  s.nTp = c.integer("cp.nTp", s.nTp);
  s.freeT = c.flag("cp.freeT", s.freeT);
  s.eps_inf = c.num("cp.eps_inf", s.eps_inf);
  s.eps2 = c.num("cp.eps2", s.eps2);
  s.msw = c.integer("cp.msw", s.msw);
  s.sig = c.num("cp.sig", s.sig);
  s.sigmin = c.num("cp.sigmin", s.sigmin);
  s.sigmax = c.num("cp.sigmax", s.sigmax);
  s.xi = c.num("cp.xi", s.xi);
  s.tol = c.num("cp.tol", s.tol);
  s.max_newton = c.integer("cp.max_newton", s.max_newton);
  s.min_dalpha = c.num("cp.min_dalpha", s.min_dalpha);
  s.t_cap_periods = c.num("cp.t_cap_periods", s.t_cap_periods);
  s.validate();
  return s;
}

FloquetScheme scheme_of(const std::string& v) {
  if (v == "trapezoid") return FloquetScheme::trapezoid;
  if (v == "gauss4") return FloquetScheme::gauss4;
  throw InvalidArgument("unknown Floquet scheme '" + v + "' (trapezoid or gauss4)");
}

std::vector<double> alvin_of(const RunConfig& c, const std::string& key) {
  if (!c.has(key)) return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  auto a = c.list(key);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] > 0.0 && a[i] <= 1.0) || (i && a[i] <= a[i - 1]))
      throw InvalidArgument(key + " must increase within (0, 1]");
  return a;
}

// Initial states: N numbers (broadcast), N * nodes numbers, or a point file.
VectorXd states_of(const Context& ctx, const CanonicalSystem& sys, const std::string& key) {
  const std::string v = ctx.cfg.str(key);
  if (v.empty()) throw InvalidArgument("missing key " + key);
  const int n = sys.states(), total = sys.n_states_total();
  if (is_number_list(v)) {
    const auto x = to_list(key, v);
    if (static_cast<int>(x.size()) == total) return Eigen::Map<const VectorXd>(x.data(), total);
    if (static_cast<int>(x.size()) == n) {
      std::vector<double> vals(2 * n, 0.0);
      std::copy(x.begin(), x.end(), vals.begin());
      return sys.broadcast(vals).head(total);
    }
    throw InvalidArgument(key + ": expected " + std::to_string(n) + " or " + std::to_string(total) + " numbers");
  }
  const PointFile f = load_point(ctx.input(key, "initial state file").string());
  if (static_cast<int>(f.u.size()) != sys.n_u()) throw InvalidArgument(key + ": point file does not match the system");
  return f.u.head(total);
}

// A saved point (CSS target) or orbit (CPS target). The saddle data is computed
// by make(), after the caller has validated the remaining settings.
struct TargetFile {
  CanonicalSystem sys;
  std::optional<PointFile> point;
  std::optional<OrbitFile> orbit;

  CpTarget make(int anchor, FloquetScheme scheme) const {
    if (point) return CpTarget::from(css_target(sys, newton_css(sys, point->u)));
    if (anchor < 0 || anchor >= orbit->orbit.m()) throw InvalidArgument("anchor index out of range");
    return CpTarget::from(cps_target(sys, orbit->orbit, anchor, scheme));
  }
};

TargetFile target_file(const Context& ctx, const std::string& key) {
  const Record r = read_record_file(ctx.input(key, "target").string());
  if (r.kind == "point") {
    PointFile f = point_from(r);
    return {f.system.build(), std::move(f), std::nullopt};
  }
  if (r.kind == "orbit") {
    OrbitFile f = orbit_from(r);
    return {f.system.build(), std::nullopt, std::move(f)};
  }
  throw FormatError(key + ": expected an occ-point or occ-orbit file, found occ-" + r.kind);
}

void check_same_system(const CanonicalSystem& a, const CanonicalSystem& b, const std::string& what) {
  const SystemSpec x = SystemSpec::of(a), y = SystemSpec::of(b);
  if (x.model != y.model || x.nx != y.nx || x.lx != y.lx || !(x.params == y.params))
    throw InvalidArgument(what + ": inputs describe different systems");
}

void print_branch(const Context& ctx, const Branch& b) {
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    const auto& p = b.points[i];
    ctx.out << "step " << i << ' ' << b.param_name << '=' << fmt(p.param(b.param_name))
            << " |u|=" << fmt(p.u.lpNorm<Eigen::Infinity>()) << " J=" << fmt(p.j_ca) << " n_neg=" << p.n_neg << ' '
            << p.stability_tag << '\n';
  }
  if (b.failed) ctx.out << "branch stopped: " << b.message << '\n';
}

void write_events(const Context& ctx, const std::vector<BifurcationEvent>& evs) {
  ctx.csv("events.csv", [&](std::ostream& os) {
    os << "index,kind,kind_index,param,mode,mu_re,mu_im,n_neg_before,n_neg_after\n";
    int ns = 0, nh = 0;
    for (std::size_t i = 0; i < evs.size(); ++i) {
      const auto& e = evs[i];
      const bool hopf = e.kind == BifurcationKind::hopf;
      os << i << ',' << (hopf ? "hopf" : "steady") << ',' << (hopf ? nh++ : ns++) << ',' << format_double(e.param)
         << ',' << e.spatial_mode << ',' << format_double(e.mu.real()) << ',' << format_double(e.mu.imag()) << ','
         << e.n_neg_before << ',' << e.n_neg_after << '\n';
    }
  });
  for (const auto& e : evs)
    ctx.out << (e.kind == BifurcationKind::hopf ? "hopf" : "steady") << " event at " << e.param_name << '='
            << fmt(e.param) << " mode=" << e.spatial_mode << '\n';
}

// Converged CSS where the branch crosses css.at, counting crossings from 0.
void write_point_at(const Context& ctx, const CanonicalSystem& sys, const Branch& b) {
  if (!ctx.cfg.has("css.at")) return;
  const double at = ctx.cfg.num("css.at", 0.0);
  const int wanted = ctx.cfg.integer("css.crossing", 0);
  int k = 0;
  for (std::size_t i = 0; i + 1 < b.points.size(); ++i) {
    const double d0 = b.points[i].param(b.param_name) - at, d1 = b.points[i + 1].param(b.param_name) - at;
    if (d0 * d1 > 0.0 || d0 == d1) continue;
    if (k++ != wanted) continue;
    const double w = d0 / (d0 - d1);
    const auto s = sys.with_params(b.points[i].params).with_param(b.param_name, at);
    const VectorXd u = newton_css(s, (1.0 - w) * b.points[i].u + w * b.points[i + 1].u);
    save_point(ctx.file("point.txt").string(), s, u);
    ctx.out << "point at " << b.param_name << '=' << fmt(at) << " (crossing " << wanted << ") J=" << fmt(css_value(s, u))
            << '\n';
    return;
  }
  throw InvalidArgument("branch has only " + std::to_string(k) + " crossings of " + b.param_name + "=" + fmt(at));
}

void finish_branch(const Context& ctx, const CanonicalSystem& sys, const Branch& b) {
  save_branch(ctx.file("branch.txt").string(), sys, b);
  ctx.csv("branch.csv", [&](std::ostream& os) { write_branch_csv(os, b); });
  print_branch(ctx, b);
  write_events(ctx, ctx.cfg.flag("css.bif", true) ? detect_bifurcations(sys, b, ctx.cfg.num("css.ptol", 1e-3))
                                                  : std::vector<BifurcationEvent>{});
  write_point_at(ctx, sys, b);
}

std::string param_of(const RunConfig& c, const CanonicalSystem& sys) {
  const std::string p = c.str("css.param", sys.params().rho_index >= 0 ? "rho" : "");
  sys.params().index_of(p);
  return p;
}

// ---------------------------------------------------------------- stages

void stage_css(const Context& ctx) {
  auto sys = system_from_config(ctx.cfg);
  const std::string start = ctx.cfg.str("css.start", sys.model().name() == "sloc" ? "clean" : "flat");
  VectorXd u;
  if (start == "flat") {
    u = newton_css(sys, pollution_flat_css(sys));
  } else if (start == "clean" || start == "muddy") {
    u = sloc_flat_seed(sys, start == "clean" ? FlatBranch::clean : FlatBranch::muddy);
  } else {
    const PointFile f = load_point(ctx.input("css.start", "start point").string());
    sys = f.system.build();
    u = newton_css(sys, f.u);
  }
  save_point(ctx.file("start.txt").string(), sys, u);
  const Branch b = continue_css(sys, make_branch_point(sys, u), param_of(ctx.cfg, sys), css_options(ctx.cfg));
  finish_branch(ctx, sys, b);
}

void stage_swibra(const Context& ctx) {
  const BranchFile f = load_branch(ctx.input("swibra.branch", "branch").string());
  const auto sys = f.system.build();
  const auto evs = detect_bifurcations(sys, f.branch, ctx.cfg.num("css.ptol", 1e-3));
  std::vector<const BifurcationEvent*> steady;
  for (const auto& e : evs)
    if (e.kind == BifurcationKind::steady) steady.push_back(&e);
  const int k = ctx.cfg.integer("swibra.event", 0);
  if (k < 0 || k >= static_cast<int>(steady.size()))
    throw InvalidArgument("swibra.event " + std::to_string(k) + " out of range: branch has " +
                          std::to_string(steady.size()) + " steady events");
  const auto& ev = *steady[k];
  ctx.out << "switching at " << ev.param_name << '=' << fmt(ev.param) << " mode=" << ev.spatial_mode << '\n';
  const BranchPoint bp = switch_corrector(sys.with_params(ev.params), ev, ctx.cfg.num("swibra.amp", 0.1));
  const auto s = sys.with_params(bp.params);
  save_point(ctx.file("start.txt").string(), s, bp.u);
  const Branch b = continue_css(s, bp, ev.param_name, css_options(ctx.cfg));
  finish_branch(ctx, s, b);
}

void stage_hopf(const Context& ctx) {
  const BranchFile f = load_branch(ctx.input("hopf.branch", "branch").string());
  const auto sys = f.system.build();
  const auto evs = detect_bifurcations(sys, f.branch, ctx.cfg.num("css.ptol", 1e-3));
  std::vector<const BifurcationEvent*> hopf;
  for (const auto& e : evs)
    if (e.kind == BifurcationKind::hopf) hopf.push_back(&e);
  const int k = ctx.cfg.integer("hopf.event", 0);
  if (k < 0 || k >= static_cast<int>(hopf.size()))
    throw InvalidArgument("hopf.event " + std::to_string(k) + " out of range: branch has " +
                          std::to_string(hopf.size()) + " Hopf events");
  CpsContinuation o;
  o.ds = ctx.cfg.num("hopf.ds", o.ds);
  o.n_steps = ctx.cfg.integer("hopf.steps", o.n_steps);
  o.ds_max = ctx.cfg.num("hopf.ds_max", o.ds_max);
  o.p_min = ctx.cfg.num("hopf.pmin", o.p_min);
  o.p_max = ctx.cfg.num("hopf.pmax", o.p_max);
  const int m = ctx.cfg.integer("hopf.m", 50);
  if (m < 4) throw InvalidArgument("hopf.m must be >= 4");
  const CpsBranch b = cps_continue_from_hopf(sys, *hopf[k], m, o);
  save_cps_branch(ctx.file("cps_branch.txt").string(), sys, b);
  ctx.csv("cps_branch.csv", [&](std::ostream& os) { write_cps_branch_csv(os, sys, b); });
  for (std::size_t i = 0; i < b.orbits.size(); ++i) {
    const auto& o2 = b.orbits[i];
    ctx.out << "step " << i << ' ' << b.param_name << '=' << fmt(o2.params.get(b.param_name)) << " T=" << fmt(o2.T)
            << " amplitude=" << fmt(o2.amplitude()) << " J=" << fmt(cps_value(sys.with_params(o2.params), o2, 0.0))
            << '\n';
  }
  if (b.failed) ctx.out << "branch stopped: " << b.message << '\n';
}

void stage_cps(const Context& ctx) {
  const CpsBranchFile f = load_cps_branch(ctx.input("cps.branch", "cps branch").string());
  const auto sys = f.system.build();
  if (!ctx.cfg.has("cps.param")) throw InvalidArgument("missing key cps.param");
  const double value = ctx.cfg.num("cps.param", 0.0);
  const CpsOrbit o = cps_at_param(sys, f.branch, value, ctx.cfg.integer("cps.from", 0));
  const auto s = sys.with_params(o.params);
  save_orbit(ctx.file("orbit.txt").string(), s, o);
  ctx.out << "orbit at " << f.branch.param_name << '=' << fmt(value) << " T=" << fmt(o.T)
          << " amplitude=" << fmt(o.amplitude()) << " J=" << fmt(cps_value(s, o, 0.0)) << '\n';
}

void stage_floquet(const Context& ctx) {
  const OrbitFile f = load_orbit(ctx.input("floquet.orbit", "orbit").string());
  const auto sys = f.system.build();
  const FloquetScheme scheme = scheme_of(ctx.cfg.str("floquet.scheme", "trapezoid"));
  const int anchor = ctx.cfg.integer("floquet.anchor", 0);
  if (anchor < 0 || anchor >= f.orbit.m()) throw InvalidArgument("floquet.anchor out of range");
  const FloquetResult r = floquet(sys, f.orbit, scheme);
  ctx.csv("multipliers.csv", [&](std::ostream& os) { write_multipliers_csv(os, r.multipliers); });
  const CpsTarget t = cps_target(sys, f.orbit, anchor, scheme, false);
  ctx.out << "multipliers=" << r.multipliers.size() << " trivial_error=" << fmt(r.trivial_error)
          << " defect=" << t.defect << '\n';
  if (t.defect != 0)
    throw SppViolation("orbit lacks the saddle-point property, defect " + std::to_string(t.defect), t.defect);
}

void print_history(const Context& ctx, const CpHistory& h) {
  for (std::size_t i = 0; i < h.alphas.size(); ++i)
    ctx.out << "step " << i << " alpha=" << fmt(h.alphas[i]) << " T=" << fmt(h.Ts[i]) << " J=" << fmt(h.values[i])
            << '\n';
}

void stage_path(const Context& ctx) {
  const CpSettings s = cp_settings(ctx.cfg);
  const TargetFile tf = target_file(ctx, "path.target");
  const CanonicalSystem& sys = tf.sys;
  const VectorXd v0 = states_of(ctx, sys, "path.v0");
  const auto alvin = alvin_of(ctx.cfg, "path.alvin");
  const CpTarget target = tf.make(ctx.cfg.integer("path.anchor", 0), scheme_of(ctx.cfg.str("path.scheme", "trapezoid")));
  CpHistory h;
  const IscResult r = isc(sys, target, v0, alvin, ctx.cfg.integer("path.narc", 0), s, h);
  print_history(ctx, h);
  if (h.empty()) throw NoConvergence("no converged point: " + r.message, 0.0);
  const CanonicalPath& p = r.path;
  save_path(ctx.file("path.txt").string(), sys, p);
  ctx.csv("history.csv", [&](std::ostream& os) { write_history_csv(os, h); });
  ctx.csv("diagnostics.csv", [&](std::ostream& os) { write_diagnostics_csv(os, diagnose(sys, p, target)); });
  ctx.csv("heatmap.csv", [&](std::ostream& os) { write_path_heatmap_csv(os, sys, p); });
  for (int c = 0; c < 2 * sys.states(); ++c)
    ctx.csv("series_" + component_name(sys, c) + ".csv", [&](std::ostream& os) { write_path_series_csv(os, sys, p, c); });
  ctx.out << (r.reached ? "reached" : "stopped") << " alpha=" << fmt(p.alpha) << " T=" << fmt(p.T)
          << " J=" << fmt(path_value(sys, p)) << (r.message.empty() ? "" : " (" + r.message + ")") << '\n';
  if (!r.reached) throw NoConvergence("alpha=1 not reached: " + r.message, 0.0);
}

void stage_skiba(const Context& ctx) {
  const TargetFile a = target_file(ctx, "skiba.target_a");
  const TargetFile b = target_file(ctx, "skiba.target_b");
  check_same_system(a.sys, b.sys, "skiba");
  SkibaSettings s;
  s.cp = cp_settings(ctx.cfg);
  s.cp.retsw = true;
  s.alvin = alvin_of(ctx.cfg, "skiba.alvin");
  s.n_arc = ctx.cfg.integer("skiba.narc", s.n_arc);
  s.value_tol = ctx.cfg.num("skiba.value_tol", s.value_tol);
  s.alpha_width = ctx.cfg.num("skiba.width", s.alpha_width);
  s.max_probes = ctx.cfg.integer("skiba.max_probes", s.max_probes);
  const VectorXd v0 = states_of(ctx, a.sys, "skiba.v0");
  const SkibaProblem pr{a.sys, a.make(0, FloquetScheme::trapezoid), b.make(0, FloquetScheme::trapezoid), v0};
  CpHistory h;
  const IscResult ra = isc(pr.sys, pr.A, pr.v0_star, s.alvin, s.n_arc, s.cp, h);
  ctx.out << "leg A " << (ra.reached ? "reached" : "stopped") << " alpha=" << fmt(ra.path.alpha) << '\n';
  ctx.csv("history_a.csv", [&](std::ostream& os) { write_history_csv(os, h); });
  const SkibaScan scan = skiba_scan(pr, h, s);
  ctx.csv("skiba.csv", [&](std::ostream& os) { write_skiba_csv(os, scan.rows); });
  for (const auto& row : scan.rows)
    ctx.out << "alpha=" << fmt(row.alpha) << " J_A=" << fmt(row.J_A) << " J_B=" << fmt(row.J_B)
            << (row.valid ? "" : " invalid: " + row.note) << '\n';
  const SkibaResult r = skiba_bisect(pr, scan, s);
  if (r.path_A) save_path(ctx.file("path_a.txt").string(), pr.sys, *r.path_A);
  if (r.path_B) save_path(ctx.file("path_b.txt").string(), pr.sys, *r.path_B);
  ctx.out << "skiba alpha*=" << fmt(r.alpha_star) << " J_A=" << fmt(r.J_A) << " J_B=" << fmt(r.J_B)
          << " bracket=[" << fmt(r.bracket.first) << ',' << fmt(r.bracket.second) << "] probes=" << r.probes << '\n';
}

void stage_value(const Context& ctx) {
  const int given = ctx.cfg.has("value.path") + ctx.cfg.has("value.point") + ctx.cfg.has("value.orbit");
  if (given != 1) throw InvalidArgument("value: give exactly one of value.path, value.point, value.orbit");
  double J = 0.0;
  if (ctx.cfg.has("value.path")) {
    const PathFile f = load_path(ctx.input("value.path", "path").string());
    J = path_value(f.system.build(), f.path);
  } else if (ctx.cfg.has("value.point")) {
    const PointFile f = load_point(ctx.input("value.point", "point").string());
    J = css_value(f.system.build(), f.u);
  } else {
    const OrbitFile f = load_orbit(ctx.input("value.orbit", "orbit").string());
    J = cps_value(f.system.build(), f.orbit, ctx.cfg.num("value.phase", 0.0));
  }
  ctx.out << "J=" << format_double(J) << '\n';
}

}  // namespace

int run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    const auto it = stage_keys().find(config.stage);
    if (it == stage_keys().end()) throw InvalidArgument("unknown stage '" + config.stage + "'");
    Context ctx{config, out, fs::path(output_root()) / config.str("out", config.stage)};
    fs::create_directories(ctx.dir);
    if (config.stage == "css") stage_css(ctx);
    else if (config.stage == "swibra") stage_swibra(ctx);
    else if (config.stage == "hopf") stage_hopf(ctx);
    else if (config.stage == "cps") stage_cps(ctx);
    else if (config.stage == "floquet") stage_floquet(ctx);
    else if (config.stage == "path") stage_path(ctx);
    else if (config.stage == "skiba") stage_skiba(ctx);
    else stage_value(ctx);
    return kExitOk;
  } catch (const InvalidArgument& e) {
    err << "occ " << config.stage << ": config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FormatError& e) {
    err << "occ " << config.stage << ": format error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SppViolation& e) {
    err << "occ " << config.stage << ": saddle-point property violated: " << e.what() << '\n';
    return kExitSpp;
  } catch (const Error& e) {
    err << "occ " << config.stage << ": solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const fs::filesystem_error& e) {
    err << "occ " << config.stage << ": " << e.what() << '\n';
    return kExitSolver;
  }
}

}  // namespace occ
