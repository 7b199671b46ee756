#include "occ/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "occ/errors.hpp"
#include "occ/models.hpp"
#include "occ/value.hpp"

namespace occ {

SystemSpec SystemSpec::of(const CanonicalSystem& sys) {
  SystemSpec s;
  s.model = sys.model().name();
  s.params = sys.params();
  if (sys.fem().spatial()) {
    s.lx = -sys.fem().nodes.front();
    s.nx = sys.nodes() - 1;
  }
  return s;
}

CanonicalSystem SystemSpec::build() const {
  auto sys = make_system(model, lx, nx);
  ModelParams p = sys.params();
  if (params.names != p.names) throw FormatError("parameter names do not match model " + model);
  return sys.with_params(params);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("format_double failed");
  return {buf, end};
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw FormatError("not a number: '" + s + "'");
  return v;
}

void Record::set(const std::string& key, const std::string& value) {
  for (auto& [k, v] : fields)
    if (k == key) {
      v = value;
      return;
    }
  fields.emplace_back(key, value);
}

void Record::set(const std::string& key, double value) { set(key, format_double(value)); }

bool Record::has(const std::string& key) const {
  for (const auto& kv : fields)
    if (kv.first == key) return true;
  return false;
}

const std::string& Record::get(const std::string& key) const {
  for (const auto& [k, v] : fields)
    if (k == key) return v;
  throw FormatError("occ-" + kind + ": missing field '" + key + "'");
}

double Record::number(const std::string& key) const { return parse_double(get(key)); }

const Record::Table& Record::table(const std::string& name) const {
  for (const auto& t : tables)
    if (t.name == name) return t;
  throw FormatError("occ-" + kind + ": missing table '" + name + "'");
}

void write_record(std::ostream& os, const Record& r) {
  os << "occ-" << r.kind << ' ' << r.major << '.' << r.minor << '\n';
  for (const auto& [k, v] : r.fields) os << k << ' ' << v << '\n';
  for (const auto& t : r.tables) {
    os << "table " << t.name << ' ' << t.data.rows() << ' ' << t.data.cols() << '\n';
    os << "columns";
    for (const auto& c : t.columns) os << ' ' << c;
    os << '\n';
    for (Eigen::Index i = 0; i < t.data.rows(); ++i) {
      for (Eigen::Index j = 0; j < t.data.cols(); ++j) os << (j ? " " : "") << format_double(t.data(i, j));
      os << '\n';
    }
  }
  os << "end\n";
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

int parse_int(const std::string& s) {
  int v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw FormatError("not an integer: '" + s + "'");
  return v;
}

}  // namespace

Record read_record(std::istream& is) {
  Record r;
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty file");
  const auto head = split(line);
  if (head.size() != 2 || head[0].rfind("occ-", 0) != 0) throw FormatError("bad header: '" + line + "'");
  r.kind = head[0].substr(4);
  const auto dot = head[1].find('.');
  if (dot == std::string::npos) throw FormatError("bad version: '" + head[1] + "'");
  r.major = parse_int(head[1].substr(0, dot));
  r.minor = parse_int(head[1].substr(dot + 1));
  if (r.major > kFormatMajor)
    throw FormatError("occ-" + r.kind + " version " + head[1] + " is newer than supported " +
                      std::to_string(kFormatMajor) + ".x");
  bool ended = false;
  while (std::getline(is, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    const auto w = split(line);
    if (w.empty()) continue;
    if (w[0] == "table") {
      if (w.size() != 4) throw FormatError("bad table line: '" + line + "'");
      Record::Table t;
      t.name = w[1];
      const int rows = parse_int(w[2]), cols = parse_int(w[3]);
      if (rows < 0 || cols < 0) throw FormatError("negative table size");
      if (!std::getline(is, line)) throw FormatError("truncated table " + t.name);
      const auto c = split(line);
      if (c.empty() || c[0] != "columns" || static_cast<int>(c.size()) != cols + 1)
        throw FormatError("table " + t.name + ": column line does not match " + std::to_string(cols) + " columns");
      t.columns.assign(c.begin() + 1, c.end());
      t.data.resize(rows, cols);
      for (int i = 0; i < rows; ++i) {
        if (!std::getline(is, line)) throw FormatError("truncated table " + t.name);
        const auto v = split(line);
        if (static_cast<int>(v.size()) != cols) throw FormatError("table " + t.name + ": wrong row length");
        for (int j = 0; j < cols; ++j) t.data(i, j) = parse_double(v[j]);
      }
      r.tables.push_back(std::move(t));
    } else {
      const auto sp = line.find(' ');
      r.fields.emplace_back(line.substr(0, sp), sp == std::string::npos ? "" : line.substr(sp + 1));
    }
  }
  if (!ended) throw FormatError("occ-" + r.kind + ": missing 'end' (truncated file)");
  return r;
}

Record read_record_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_record(in);
}

void write_record_file(const std::string& path, const Record& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_record(out, r);
  if (!out) throw Error("write failed: " + path);
}

namespace {

void put_system(Record& r, const CanonicalSystem& sys) {
  const SystemSpec s = SystemSpec::of(sys);
  r.set("model", s.model);
  r.set("lx", s.lx);
  r.set("nx", std::to_string(s.nx));
  std::string names;
  for (std::size_t i = 0; i < s.params.names.size(); ++i) {
    names += (i ? " " : "") + s.params.names[i];
  }
  r.set("param_names", names);
  std::string values;
  for (std::size_t i = 0; i < s.params.values.size(); ++i) values += (i ? " " : "") + format_double(s.params.values[i]);
  r.set("param_values", values);
}

ModelParams params_from(const Record& r, const ModelParams& base) {
  ModelParams p = base;
  const auto names = split(r.get("param_names"));
  const auto values = split(r.get("param_values"));
  if (names != p.names || values.size() != names.size()) throw FormatError("parameter list mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) p.values[i] = parse_double(values[i]);
  return p;
}

SystemSpec system_from(const Record& r) {
  SystemSpec s;
  s.model = r.get("model");
  s.lx = r.number("lx");
  s.nx = parse_int(r.get("nx"));
  const auto m = make_model(s.model);
  s.params = params_from(r, m->default_params());
  return s;
}

void expect_kind(const Record& r, const std::string& kind) {
  if (r.kind != kind) throw FormatError("expected occ-" + kind + ", found occ-" + r.kind);
}

std::vector<std::string> u_columns(int n, const std::string& prefix = "u") {
  std::vector<std::string> c;
  for (int i = 0; i < n; ++i) c.push_back(prefix + std::to_string(i));
  return c;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> v;
  for (const auto& w : split(s)) v.push_back(parse_int(w));
  return v;
}

void check_u_width(const Record::Table& t, int offset, int n_u, const std::string& what) {
  if (t.data.cols() != offset + n_u) throw FormatError(what + ": width does not match the system size");
}

// Orbit blocks share a layout: one table with columns t, u0..u{n-1}.
Record::Table orbit_table(const std::string& name, const CpsOrbit& o) {
  Record::Table t;
  t.name = name;
  t.columns = {"t"};
  for (auto& c : u_columns(static_cast<int>(o.u.rows()))) t.columns.push_back(c);
  t.data.resize(o.m(), 1 + o.u.rows());
  for (int j = 0; j < o.m(); ++j) {
    t.data(j, 0) = o.t[j];
    t.data.row(j).tail(o.u.rows()) = o.u.col(j).transpose();
  }
  return t;
}

CpsOrbit orbit_from_table(const Record::Table& t, int n_u) {
  check_u_width(t, 1, n_u, "orbit table " + t.name);
  CpsOrbit o;
  o.t.resize(t.data.rows());
  o.u = t.data.rightCols(n_u).transpose();
  for (Eigen::Index j = 0; j < t.data.rows(); ++j) o.t[j] = t.data(j, 0);
  return o;
}

}  // namespace

Record point_record(const CanonicalSystem& sys, const VectorXd& u) {
  sys.check_size(u, "point_record");
  Record r;
  r.kind = "point";
  put_system(r, sys);
  Record::Table t;
  t.name = "u";
  t.columns = {"value"};
  t.data = u;
  r.tables.push_back(std::move(t));
  return r;
}

PointFile point_from(const Record& r) {
  expect_kind(r, "point");
  PointFile f;
  f.system = system_from(r);
  const auto& t = r.table("u");
  const auto sys = f.system.build();
  if (t.data.cols() != 1 || t.data.rows() != sys.n_u()) throw FormatError("point: wrong vector length");
  f.u = t.data.col(0);
  return f;
}

Record branch_record(const CanonicalSystem& sys, const Branch& b) {
  Record r;
  r.kind = "branch";
  put_system(r, sys);
  r.set("param_name", b.param_name);
  r.set("folds", join_ints(b.folds));
  r.set("failed", b.failed ? "1" : "0");
  r.set("message", b.message);
  std::string tags;
  for (std::size_t i = 0; i < b.points.size(); ++i) tags += (i ? " " : "") + b.points[i].stability_tag;
  r.set("stability", tags);
  Record::Table t;
  t.name = "points";
  t.columns = {"param", "arclength", "j_ca", "n_neg"};
  for (auto& c : u_columns(sys.n_u())) t.columns.push_back(c);
  t.data.resize(static_cast<Eigen::Index>(b.points.size()), 4 + sys.n_u());
  for (std::size_t i = 0; i < b.points.size(); ++i) {
    const auto& p = b.points[i];
    const auto row = static_cast<Eigen::Index>(i);
    t.data(row, 0) = b.param_name.empty() ? 0.0 : p.param(b.param_name);
    t.data(row, 1) = p.arclength;
    t.data(row, 2) = p.j_ca;
    t.data(row, 3) = p.n_neg;
    t.data.row(row).tail(sys.n_u()) = p.u.transpose();
  }
  r.tables.push_back(std::move(t));
  return r;
}

BranchFile branch_from(const Record& r) {
  expect_kind(r, "branch");
  BranchFile f;
  f.system = system_from(r);
  const auto sys = f.system.build();
  Branch& b = f.branch;
  b.model = f.system.model;
  b.param_name = r.get("param_name");
  b.folds = split_ints(r.get("folds"));
  b.failed = r.get("failed") == "1";
  b.message = r.get("message");
  const auto tags = split(r.get("stability"));
  const auto& t = r.table("points");
  check_u_width(t, 4, sys.n_u(), "branch");
  if (static_cast<Eigen::Index>(tags.size()) != t.data.rows()) throw FormatError("branch: stability list length");
  for (Eigen::Index i = 0; i < t.data.rows(); ++i) {
    BranchPoint p;
    p.params = f.system.params;
    if (!b.param_name.empty()) p.params.set(b.param_name, t.data(i, 0));
    p.arclength = t.data(i, 1);
    p.j_ca = t.data(i, 2);
    p.n_neg = static_cast<int>(t.data(i, 3));
    p.u = t.data.row(i).tail(sys.n_u()).transpose();
    p.stability_tag = tags[i];
    b.points.push_back(std::move(p));
  }
  return f;
}

Record orbit_record(const CanonicalSystem& sys, const CpsOrbit& o) {
  Record r;
  r.kind = "orbit";
  put_system(r, sys.with_params(o.params));
  r.set("T", o.T);
  r.tables.push_back(orbit_table("orbit", o));
  return r;
}

OrbitFile orbit_from(const Record& r) {
  expect_kind(r, "orbit");
  OrbitFile f;
  f.system = system_from(r);
  const auto sys = f.system.build();
  f.orbit = orbit_from_table(r.table("orbit"), sys.n_u());
  f.orbit.T = r.number("T");
  f.orbit.params = f.system.params;
  return f;
}

Record cps_branch_record(const CanonicalSystem& sys, const CpsBranch& b) {
  Record r;
  r.kind = "cps-branch";
  put_system(r, sys);
  r.set("param_name", b.param_name);
  r.set("folds", join_ints(b.folds));
  r.set("failed", b.failed ? "1" : "0");
  r.set("message", b.message);
  r.set("count", std::to_string(b.orbits.size()));
  std::string ts, ps;
  for (std::size_t i = 0; i < b.orbits.size(); ++i) {
    ts += (i ? " " : "") + format_double(b.orbits[i].T);
    ps += (i ? " " : "") + format_double(b.orbits[i].params.get(b.param_name));
  }
  r.set("periods", ts);
  r.set("branch_params", ps);
  for (std::size_t i = 0; i < b.orbits.size(); ++i) r.tables.push_back(orbit_table("orbit" + std::to_string(i), b.orbits[i]));
  return r;
}

CpsBranchFile cps_branch_from(const Record& r) {
  expect_kind(r, "cps-branch");
  CpsBranchFile f;
  f.system = system_from(r);
  const auto sys = f.system.build();
  CpsBranch& b = f.branch;
  b.param_name = r.get("param_name");
  b.folds = split_ints(r.get("folds"));
  b.failed = r.get("failed") == "1";
  b.message = r.get("message");
  const int count = parse_int(r.get("count"));
  const auto ts = split(r.get("periods"));
  const auto ps = split(r.get("branch_params"));
  if (static_cast<int>(ts.size()) != count || static_cast<int>(ps.size()) != count)
    throw FormatError("cps-branch: list lengths do not match count");
  for (int i = 0; i < count; ++i) {
    CpsOrbit o = orbit_from_table(r.table("orbit" + std::to_string(i)), sys.n_u());
    o.T = parse_double(ts[i]);
    o.params = f.system.params;
    o.params.set(b.param_name, parse_double(ps[i]));
    b.orbits.push_back(std::move(o));
  }
  return f;
}

Record path_record(const CanonicalSystem& sys, const CanonicalPath& p) {
  Record r;
  r.kind = "path";
  put_system(r, sys);
  r.set("T", p.T);
  r.set("alpha", p.alpha);
  r.set("target_kind", p.target_kind == TargetKind::css ? "css" : "cps");
  Record::Table t;
  t.name = "path";
  t.columns = {"t"};
  for (auto& c : u_columns(static_cast<int>(p.u.rows()))) t.columns.push_back(c);
  t.data.resize(p.m(), 1 + p.u.rows());
  for (int j = 0; j < p.m(); ++j) {
    t.data(j, 0) = p.t[j];
    t.data.row(j).tail(p.u.rows()) = p.u.col(j).transpose();
  }
  r.tables.push_back(std::move(t));
  return r;
}

PathFile path_from(const Record& r) {
  expect_kind(r, "path");
  PathFile f;
  f.system = system_from(r);
  const auto sys = f.system.build();
  const auto& t = r.table("path");
  check_u_width(t, 1, sys.n_u(), "path");
  CanonicalPath& p = f.path;
  p.T = r.number("T");
  p.alpha = r.number("alpha");
  const auto& kind = r.get("target_kind");
  if (kind != "css" && kind != "cps") throw FormatError("path: unknown target kind '" + kind + "'");
  p.target_kind = kind == "css" ? TargetKind::css : TargetKind::cps;
  p.t.resize(t.data.rows());
  for (Eigen::Index j = 0; j < t.data.rows(); ++j) p.t[j] = t.data(j, 0);
  p.u = t.data.rightCols(sys.n_u()).transpose();
  return f;
}

void save_point(const std::string& file, const CanonicalSystem& sys, const VectorXd& u) {
  write_record_file(file, point_record(sys, u));
}
void save_branch(const std::string& file, const CanonicalSystem& sys, const Branch& b) {
  write_record_file(file, branch_record(sys, b));
}
void save_orbit(const std::string& file, const CanonicalSystem& sys, const CpsOrbit& o) {
  write_record_file(file, orbit_record(sys, o));
}
void save_cps_branch(const std::string& file, const CanonicalSystem& sys, const CpsBranch& b) {
  write_record_file(file, cps_branch_record(sys, b));
}
void save_path(const std::string& file, const CanonicalSystem& sys, const CanonicalPath& p) {
  write_record_file(file, path_record(sys, p));
}
PointFile load_point(const std::string& file) { return point_from(read_record_file(file)); }
BranchFile load_branch(const std::string& file) { return branch_from(read_record_file(file)); }
OrbitFile load_orbit(const std::string& file) { return orbit_from(read_record_file(file)); }
CpsBranchFile load_cps_branch(const std::string& file) { return cps_branch_from(read_record_file(file)); }
PathFile load_path(const std::string& file) { return path_from(read_record_file(file)); }

// ---------------------------------------------------------------- CSV

std::string component_name(const CanonicalSystem& sys, int c) {
  const int n = sys.states();
  return (c < n ? "v" : "l") + std::to_string(c % n + 1);
}

void write_branch_csv(std::ostream& os, const Branch& b) {
  os << "param,norm_inf,j_ca,n_neg,stability\n";
  for (const auto& p : b.points)
    os << format_double(b.param_name.empty() ? 0.0 : p.param(b.param_name)) << ','
       << format_double(p.u.lpNorm<Eigen::Infinity>()) << ',' << format_double(p.j_ca) << ',' << p.n_neg << ','
       << p.stability_tag << '\n';
}

void write_cps_branch_csv(std::ostream& os, const CanonicalSystem& sys, const CpsBranch& b) {
  os << "param,T,amplitude,J_phase0,J_min,J_max\n";
  constexpr int kPhases = 16;
  for (const auto& o : b.orbits) {
    const auto s = sys.with_params(o.params);
    const double j0 = cps_value(s, o, 0.0);
    double lo = j0, hi = j0;
    for (int k = 1; k < kPhases; ++k) {
      const double j = cps_value(s, o, o.T * k / kPhases);
      lo = std::min(lo, j);
      hi = std::max(hi, j);
    }
    os << format_double(o.params.get(b.param_name)) << ',' << format_double(o.T) << ',' << format_double(o.amplitude())
       << ',' << format_double(j0) << ',' << format_double(lo) << ',' << format_double(hi) << '\n';
  }
}

void write_path_heatmap_csv(std::ostream& os, const CanonicalSystem& sys, const CanonicalPath& p) {
  os << "t,x,component,value\n";
  const auto& x = sys.fem().nodes;
  const int n = sys.nodes();
  for (int j = 0; j < p.m(); ++j)
    for (int c = 0; c < 2 * sys.states(); ++c)
      for (int i = 0; i < n; ++i)
        os << format_double(p.t[j] * p.T) << ',' << format_double(x[i]) << ',' << component_name(sys, c) << ','
           << format_double(p.u(c * n + i, j)) << '\n';
}

void write_path_series_csv(std::ostream& os, const CanonicalSystem& sys, const CanonicalPath& p, int component) {
  if (component < 0 || component >= 2 * sys.states()) throw InvalidArgument("write_path_series_csv: bad component");
  os << "time," << component_name(sys, component) << '\n';
  const int n = sys.nodes();
  for (int j = 0; j < p.m(); ++j) {
    // Spatial average for PDE models.
    const double v = p.u.col(j).segment(component * n, n).mean();
    os << format_double(p.t[j] * p.T) << ',' << format_double(v) << '\n';
  }
}

void write_diagnostics_csv(std::ostream& os, const PathDiagnostics& d) {
  os << "t,dev,j_ca,discounted_j_ca\n";
  for (std::size_t j = 0; j < d.time.size(); ++j)
    os << format_double(d.time[j]) << ',' << format_double(d.dev[j]) << ',' << format_double(d.jca[j]) << ','
       << format_double(d.discounted[j]) << '\n';
}

void write_skiba_csv(std::ostream& os, const std::vector<SkibaRow>& rows) {
  os << "alpha,J_A,J_B,valid\n";
  for (const auto& r : rows)
    os << format_double(r.alpha) << ',' << format_double(r.J_A) << ',' << format_double(r.J_B) << ','
       << (r.valid ? 1 : 0) << '\n';
}

void write_multipliers_csv(std::ostream& os, const std::vector<std::complex<double>>& m) {
  os << "index,re,im,abs\n";
  for (std::size_t i = 0; i < m.size(); ++i)
    os << i + 1 << ',' << format_double(m[i].real()) << ',' << format_double(m[i].imag()) << ','
       << format_double(std::abs(m[i])) << '\n';
}

void write_history_csv(std::ostream& os, const CpHistory& h) {
  os << "alpha,J,T\n";
  for (std::size_t i = 0; i < h.alphas.size(); ++i)
    os << format_double(h.alphas[i]) << ',' << format_double(h.values[i]) << ',' << format_double(h.Ts[i]) << '\n';
}

}  // namespace occ
