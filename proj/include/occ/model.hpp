#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "occ/fem1d.hpp"

namespace occ {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Named model parameters. rho_index points at the discount rate, or is -1.
struct ModelParams {
  std::vector<std::string> names;
  std::vector<double> values;
  int rho_index = -1;

  double get(std::string_view name) const;
  void set(std::string_view name, double value);
  int index_of(std::string_view name) const;  // throws InvalidArgument if unknown
  bool has(std::string_view name) const;
  double rho() const;
  bool operator==(const ModelParams&) const = default;
};

/// Nodewise description of a canonical system u_t = -G(u) with u = (v, lambda).
///
/// Concrete models supply the local right-hand side f (everything except
/// diffusion), its Jacobian, the control map and the local current value J_c.
/// All nodewise vectors have length 2N: states first, then costates.
class CanonicalModel {
 public:
  virtual ~CanonicalModel() = default;

  virtual std::string name() const = 0;
  virtual int num_states() const = 0;
  virtual bool spatial() const = 0;
  virtual ModelParams default_params() const = 0;
  /// Half length of the default domain (-lx, lx); unused for ODE models.
  virtual double default_half_length() const { return 1.0; }
  virtual int default_elements() const { return 20; }

  /// Per-state diffusion coefficients d_1..d_N.
  virtual std::vector<double> diffusion(const ModelParams& p) const = 0;
  virtual void rhs(std::span<const double> u, const ModelParams& p, std::span<double> f) const = 0;
  /// Row-major 2N x 2N Jacobian of rhs.
  virtual void rhs_jacobian(std::span<const double> u, const ModelParams& p,
                            std::span<double> jac) const = 0;

  virtual bool has_control() const { return true; }
  virtual double control(std::span<const double> u, const ModelParams& p) const = 0;
  virtual double local_value(std::span<const double> u, const ModelParams& p) const = 0;
};

using ModelPtr = std::shared_ptr<const CanonicalModel>;

/// A model bound to a discretization and a parameter set.
///
/// Field vectors are stacked componentwise: (v_1 nodes, ..., v_N nodes,
/// lambda_1 nodes, ..., lambda_N nodes), length n_u = 2 N n.
class CanonicalSystem {
 public:
  CanonicalSystem(ModelPtr model, FemOperators fem, ModelParams params);

  const CanonicalModel& model() const { return *model_; }
  const ModelPtr& model_ptr() const { return model_; }
  const FemOperators& fem() const { return fem_; }
  const ModelParams& params() const { return params_; }

  int nodes() const { return fem_.size(); }
  int states() const { return model_->num_states(); }
  int n_u() const { return 2 * states() * nodes(); }
  int n_states_total() const { return states() * nodes(); }
  double rho() const { return params_.rho(); }

  CanonicalSystem with_param(std::string_view name, double value) const;
  CanonicalSystem with_params(ModelParams params) const;

  /// Block-diagonal mass matrix blockdiag(M, ..., M).
  const SpMat& mass() const { return mass_; }

  VectorXd residual(const VectorXd& u) const;
  SpMat jacobian(const VectorXd& u) const;
  MatrixXd jacobian_dense(const VectorXd& u) const { return MatrixXd(jacobian(u)); }
  /// d G / d parameter by central differences.
  VectorXd param_derivative(const VectorXd& u, std::string_view name) const;

  VectorXd control(const VectorXd& u) const;
  VectorXd local_values(const VectorXd& u) const;
  double current_value(const VectorXd& u) const;

  /// Node values of component c (0..2N-1).
  Eigen::Map<const VectorXd> component(const VectorXd& u, int c) const {
    return {u.data() + static_cast<std::ptrdiff_t>(c) * nodes(), nodes()};
  }
  VectorXd broadcast(std::span<const double> node_values) const;
  void check_size(const VectorXd& u, const char* who) const;

 private:
  void gather(const VectorXd& u, int node, std::span<double> out) const;

  ModelPtr model_;
  FemOperators fem_;
  ModelParams params_;
  SpMat mass_;
  VectorXd lumped_weights_;  // 1^T M, for spatial averages
};

VectorXd residual_G(const CanonicalSystem& sys, const VectorXd& u);
SpMat jacobian_G(const CanonicalSystem& sys, const VectorXd& u);
VectorXd control_of(const CanonicalSystem& sys, const VectorXd& u);
double current_value(const CanonicalSystem& sys, const VectorXd& u);

}  // namespace occ
