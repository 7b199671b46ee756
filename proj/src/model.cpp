#include "occ/model.hpp"

#include <cmath>
#include <string>

#include "occ/errors.hpp"

namespace occ {

int ModelParams::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw InvalidArgument("unknown parameter '" + std::string(name) + "'");
}

bool ModelParams::has(std::string_view name) const {
  for (const auto& n : names)
    if (n == name) return true;
  return false;
}

double ModelParams::get(std::string_view name) const { return values[index_of(name)]; }

void ModelParams::set(std::string_view name, double value) { values[index_of(name)] = value; }

double ModelParams::rho() const {
  if (rho_index < 0) throw InvalidArgument("model has no discount rate");
  return values[rho_index];
}

CanonicalSystem::CanonicalSystem(ModelPtr model, FemOperators fem, ModelParams params)
    : model_(std::move(model)), fem_(std::move(fem)), params_(std::move(params)) {
  if (!model_) throw InvalidArgument("CanonicalSystem: null model");
  const int n = fem_.size();
  const int nc = 2 * model_->num_states();
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(nc) * fem_.M.nonZeros());
  for (int c = 0; c < nc; ++c)
    for (int k = 0; k < fem_.M.outerSize(); ++k)
      for (SpMat::InnerIterator it(fem_.M, k); it; ++it)
        t.emplace_back(c * n + it.row(), c * n + it.col(), it.value());
  mass_.resize(nc * n, nc * n);
  mass_.setFromTriplets(t.begin(), t.end());
  mass_.makeCompressed();
  lumped_weights_ = VectorXd::Ones(n).transpose() * fem_.M;
}

CanonicalSystem CanonicalSystem::with_param(std::string_view name, double value) const {
  ModelParams p = params_;
  p.set(name, value);
  return with_params(std::move(p));
}

CanonicalSystem CanonicalSystem::with_params(ModelParams params) const {
  CanonicalSystem s = *this;
  s.params_ = std::move(params);
  return s;
}

void CanonicalSystem::check_size(const VectorXd& u, const char* who) const {
  if (u.size() != n_u())
    throw InvalidArgument(std::string(who) + ": field vector has length " + std::to_string(u.size()) +
                          ", expected " + std::to_string(n_u()));
}

void CanonicalSystem::gather(const VectorXd& u, int node, std::span<double> out) const {
  const int n = nodes();
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = u[static_cast<int>(c) * n + node];
}

VectorXd CanonicalSystem::broadcast(std::span<const double> node_values) const {
  const int n = nodes();
  if (static_cast<int>(node_values.size()) != 2 * states())
    throw InvalidArgument("broadcast: expected one value per component");
  VectorXd u(n_u());
  for (int c = 0; c < 2 * states(); ++c) u.segment(c * n, n).setConstant(node_values[c]);
  return u;
}

VectorXd CanonicalSystem::residual(const VectorXd& u) const {
  check_size(u, "residual_G");
  const int n = nodes();
  const int nc = 2 * states();
  MatrixXd f(n, nc);
  std::vector<double> un(nc), fn(nc);
  for (int i = 0; i < n; ++i) {
    gather(u, i, un);
    model_->rhs(un, params_, fn);
    for (int c = 0; c < nc; ++c) f(i, c) = fn[c];
  }
  VectorXd g(n_u());
  const bool diffuse = fem_.spatial();
  const auto d = model_->diffusion(params_);
  for (int c = 0; c < nc; ++c) {
    auto seg = g.segment(c * n, n);
    seg = -(fem_.M * f.col(c));
    if (diffuse) {
      const double coef = c < states() ? d[c] : -d[c - states()];
      seg += coef * (fem_.K * u.segment(c * n, n));
    }
  }
  return g;
}

SpMat CanonicalSystem::jacobian(const VectorXd& u) const {
  check_size(u, "jacobian_G");
  const int n = nodes();
  const int nc = 2 * states();
  std::vector<double> un(nc), jn(nc * nc);
  // df[node][a*nc+b]
  std::vector<double> df(static_cast<std::size_t>(n) * nc * nc);
  for (int i = 0; i < n; ++i) {
    gather(u, i, un);
    model_->rhs_jacobian(un, params_, jn);
    std::copy(jn.begin(), jn.end(), df.begin() + static_cast<std::ptrdiff_t>(i) * nc * nc);
  }
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(nc) * nc * fem_.M.nonZeros() + nc * fem_.K.nonZeros());
  for (int k = 0; k < fem_.M.outerSize(); ++k)
    for (SpMat::InnerIterator it(fem_.M, k); it; ++it) {
      const int row = static_cast<int>(it.row()), col = static_cast<int>(it.col());
      for (int a = 0; a < nc; ++a)
        for (int b = 0; b < nc; ++b) {
          const double v = df[(static_cast<std::size_t>(col) * nc + a) * nc + b];
          if (v != 0.0) t.emplace_back(a * n + row, b * n + col, -it.value() * v);
        }
    }
  if (fem_.spatial()) {
    const auto d = model_->diffusion(params_);
    for (int c = 0; c < nc; ++c) {
      const double coef = c < states() ? d[c] : -d[c - states()];
      if (coef == 0.0) continue;
      for (int k = 0; k < fem_.K.outerSize(); ++k)
        for (SpMat::InnerIterator it(fem_.K, k); it; ++it)
          t.emplace_back(c * n + it.row(), c * n + it.col(), coef * it.value());
    }
  }
  SpMat jac(n_u(), n_u());
  jac.setFromTriplets(t.begin(), t.end());
  jac.makeCompressed();
  return jac;
}

VectorXd CanonicalSystem::param_derivative(const VectorXd& u, std::string_view name) const {
  const double p0 = params_.get(name);
  const double h = 1e-6 * std::max(1.0, std::abs(p0));
  return (with_param(name, p0 + h).residual(u) - with_param(name, p0 - h).residual(u)) / (2.0 * h);
}

VectorXd CanonicalSystem::control(const VectorXd& u) const {
  check_size(u, "control_of");
  if (!model_->has_control()) return {};
  const int n = nodes();
  std::vector<double> un(2 * states());
  VectorXd q(n);
  for (int i = 0; i < n; ++i) {
    gather(u, i, un);
    q[i] = model_->control(un, params_);
  }
  return q;
}

VectorXd CanonicalSystem::local_values(const VectorXd& u) const {
  check_size(u, "current_value");
  const int n = nodes();
  std::vector<double> un(2 * states());
  VectorXd jc(n);
  for (int i = 0; i < n; ++i) {
    gather(u, i, un);
    jc[i] = model_->local_value(un, params_);
  }
  return jc;
}

double CanonicalSystem::current_value(const VectorXd& u) const {
  return lumped_weights_.dot(local_values(u)) / fem_.domain_size;
}

VectorXd residual_G(const CanonicalSystem& sys, const VectorXd& u) { return sys.residual(u); }
SpMat jacobian_G(const CanonicalSystem& sys, const VectorXd& u) { return sys.jacobian(u); }
VectorXd control_of(const CanonicalSystem& sys, const VectorXd& u) { return sys.control(u); }
double current_value(const CanonicalSystem& sys, const VectorXd& u) { return sys.current_value(u); }

}  // namespace occ
