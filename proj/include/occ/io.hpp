#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "occ/cpath.hpp"
#include "occ/periodic.hpp"
#include "occ/skiba.hpp"
#include "occ/steady.hpp"
#include "occ/value.hpp"

namespace occ {

/// Current major.minor of every file format. Readers reject a newer major.
inline constexpr int kFormatMajor = 1;
inline constexpr int kFormatMinor = 0;

/// Everything needed to rebuild a CanonicalSystem.
struct SystemSpec {
  std::string model;
  double lx = 0.0;  // 0 for ODE models
  int nx = 0;
  ModelParams params;

  static SystemSpec of(const CanonicalSystem& sys);
  CanonicalSystem build() const;
};

/// A generic self-describing text record: header line "occ-<kind> <major>.<minor>",
/// `key value` fields, then named tables with dimensions and column names.
struct Record {
  std::string kind;
  int major = kFormatMajor, minor = kFormatMinor;
  std::vector<std::pair<std::string, std::string>> fields;
  struct Table {
    std::string name;
    std::vector<std::string> columns;
    MatrixXd data;  // rows x columns
  };
  std::vector<Table> tables;

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  const std::string& get(const std::string& key) const;  // FormatError if missing
  double number(const std::string& key) const;
  bool has(const std::string& key) const;
  const Table& table(const std::string& name) const;
};

/// Shortest decimal that reads back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);

void write_record(std::ostream& os, const Record& r);
/// Throws FormatError on a bad header, newer major, missing "end" or malformed table.
Record read_record(std::istream& is);
Record read_record_file(const std::string& path);
void write_record_file(const std::string& path, const Record& r);

struct PointFile {
  SystemSpec system;
  VectorXd u;
};
struct BranchFile {
  SystemSpec system;
  Branch branch;
};
struct OrbitFile {
  SystemSpec system;
  CpsOrbit orbit;
};
struct CpsBranchFile {
  SystemSpec system;
  CpsBranch branch;
};
struct PathFile {
  SystemSpec system;
  CanonicalPath path;
};

Record point_record(const CanonicalSystem& sys, const VectorXd& u);
Record branch_record(const CanonicalSystem& sys, const Branch& b);
Record orbit_record(const CanonicalSystem& sys, const CpsOrbit& o);
Record cps_branch_record(const CanonicalSystem& sys, const CpsBranch& b);
Record path_record(const CanonicalSystem& sys, const CanonicalPath& p);

PointFile point_from(const Record& r);
BranchFile branch_from(const Record& r);
OrbitFile orbit_from(const Record& r);
CpsBranchFile cps_branch_from(const Record& r);
PathFile path_from(const Record& r);

void save_point(const std::string& file, const CanonicalSystem& sys, const VectorXd& u);
void save_branch(const std::string& file, const CanonicalSystem& sys, const Branch& b);
void save_orbit(const std::string& file, const CanonicalSystem& sys, const CpsOrbit& o);
void save_cps_branch(const std::string& file, const CanonicalSystem& sys, const CpsBranch& b);
void save_path(const std::string& file, const CanonicalSystem& sys, const CanonicalPath& p);
PointFile load_point(const std::string& file);
BranchFile load_branch(const std::string& file);
OrbitFile load_orbit(const std::string& file);
CpsBranchFile load_cps_branch(const std::string& file);
PathFile load_path(const std::string& file);

// CSV emitters. Every file starts with a header row; empty inputs give a header-only file.

/// param, norm_inf, j_ca, n_neg, stability
void write_branch_csv(std::ostream& os, const Branch& b);
/// param, T, amplitude, J_phase0, J_min, J_max (J over 16 phases)
void write_cps_branch_csv(std::ostream& os, const CanonicalSystem& sys, const CpsBranch& b);
/// t, x, component, value; t unscaled
void write_path_heatmap_csv(std::ostream& os, const CanonicalSystem& sys, const CanonicalPath& p);
/// time, value of one nodal component (ODE models: one series per component)
void write_path_series_csv(std::ostream& os, const CanonicalSystem& sys, const CanonicalPath& p, int component);
/// t, dev, j_ca, discounted_j_ca
void write_diagnostics_csv(std::ostream& os, const PathDiagnostics& d);
/// alpha, J_A, J_B, valid
void write_skiba_csv(std::ostream& os, const std::vector<SkibaRow>& rows);
/// index, re, im, abs
void write_multipliers_csv(std::ostream& os, const std::vector<std::complex<double>>& m);
/// alpha, J, T
void write_history_csv(std::ostream& os, const CpHistory& h);

/// Component labels: v1..vN for states, l1..lN for costates.
std::string component_name(const CanonicalSystem& sys, int c);

}  // namespace occ
