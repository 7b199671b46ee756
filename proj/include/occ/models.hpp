#pragma once

#include <complex>
#include <string>
#include <vector>

#include "occ/model.hpp"

namespace occ {

/// Shallow lake: phosphorus v, load kappa = -1/lambda, J_c = ln kappa - gamma v^2.
class ShallowLakeModel final : public CanonicalModel {
 public:
  std::string name() const override { return "sloc"; }
  int num_states() const override { return 1; }
  bool spatial() const override { return true; }
  ModelParams default_params() const override;
  double default_half_length() const override;
  int default_elements() const override { return 40; }
  std::vector<double> diffusion(const ModelParams& p) const override;
  void rhs(std::span<const double> u, const ModelParams& p, std::span<double> f) const override;
  void rhs_jacobian(std::span<const double> u, const ModelParams& p, std::span<double> jac) const override;
  double control(std::span<const double> u, const ModelParams& p) const override;
  double local_value(std::span<const double> u, const ModelParams& p) const override;
};

/// Pollution mitigation with emissions v1, stock v2 and abatement kappa = -(1+lambda1)/gamma.
/// The ODE variant drops diffusion and runs on a single node.
class PollutionModel final : public CanonicalModel {
 public:
  explicit PollutionModel(bool spatial) : spatial_(spatial) {}
  std::string name() const override { return spatial_ ? "pollution" : "pollution-ode"; }
  int num_states() const override { return 2; }
  bool spatial() const override { return spatial_; }
  ModelParams default_params() const override;
  double default_half_length() const override;
  int default_elements() const override { return 20; }
  std::vector<double> diffusion(const ModelParams& p) const override;
  void rhs(std::span<const double> u, const ModelParams& p, std::span<double> f) const override;
  void rhs_jacobian(std::span<const double> u, const ModelParams& p, std::span<double> jac) const override;
  double control(std::span<const double> u, const ModelParams& p) const override;
  double local_value(std::span<const double> u, const ModelParams& p) const override;

 private:
  bool spatial_;
};

/// Rotating saddle driven by a pendulum; states x1, x2 and "costates" y1, y2.
class ToyModel final : public CanonicalModel {
 public:
  std::string name() const override { return "toy"; }
  int num_states() const override { return 2; }
  bool spatial() const override { return false; }
  ModelParams default_params() const override;
  std::vector<double> diffusion(const ModelParams&) const override { return {0.0, 0.0}; }
  void rhs(std::span<const double> u, const ModelParams& p, std::span<double> f) const override;
  void rhs_jacobian(std::span<const double> u, const ModelParams& p, std::span<double> jac) const override;
  bool has_control() const override { return false; }
  double control(std::span<const double>, const ModelParams&) const override { return 0.0; }
  double local_value(std::span<const double>, const ModelParams&) const override { return 0.0; }
};

/// Registered names: "sloc", "pollution", "pollution-ode", "toy".
ModelPtr make_model(const std::string& name);
std::vector<std::string> model_names();

/// Operators for a model: the FEM pair on (-lx, lx) with nx elements, or the
/// one-node identity for ODE models. lx <= 0 or nx <= 0 select the defaults.
FemOperators default_operators(const CanonicalModel& model, double lx = 0.0, int nx = 0);
CanonicalSystem make_system(const std::string& model_name, double lx = 0.0, int nx = 0);

/// Closed-form flat CSS of the pollution model, broadcast to all nodes.
VectorXd pollution_flat_css(const CanonicalSystem& sys);

enum class FlatBranch { clean, muddy };

/// Newton-refined flat root of the shallow-lake system. clean starts at low v, muddy at high v.
VectorXd sloc_flat_seed(const CanonicalSystem& sys, FlatBranch branch, double tol = 1e-12);

struct ToyAnalytics {
  double period;
  std::vector<double> multipliers;  // (1, gamma2, gamma3, gamma4)
  /// Orbit state at time t in [0, period].
  std::vector<double> orbit(double t) const;
  double theta;
  double omega;
  double energy(double y1, double y2) const;
  double heteroclinic_energy() const;
};

ToyAnalytics toy_analytics(const ModelParams& p);

}  // namespace occ
