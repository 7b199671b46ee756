#include "occ/value.hpp"

#include <cmath>

#include "occ/errors.hpp"

namespace occ {

double css_value(const CanonicalSystem& sys, const VectorXd& u_hat) {
  const double rho = sys.rho();
  if (!(rho > 0.0)) throw InvalidArgument("css_value: discount rate must be positive");
  return sys.current_value(u_hat) / rho;
}

namespace {

double jca_at(const CanonicalSystem& sys, const CanonicalPath& path, int j) {
  double v;
  try {
    v = sys.current_value(path.u.col(j));
  } catch (const DomainError& e) {
    throw DomainError(std::string(e.what()) + " at mesh point " + std::to_string(j));
  }
  if (!std::isfinite(v)) throw DomainError("non-finite current value at mesh point " + std::to_string(j));
  return v;
}

}  // namespace

double path_value(const CanonicalSystem& sys, const CanonicalPath& path) {
  const double rho = sys.rho();
  const double T = path.T;
  double total = 0.0;
  double prev = T * jca_at(sys, path, 0);
  for (int j = 0; j + 1 < path.m(); ++j) {
    const double next = T * std::exp(-rho * T * path.t[j + 1]) * jca_at(sys, path, j + 1);
    total += 0.5 * (path.t[j + 1] - path.t[j]) * (prev + next);
    prev = next;
  }
  return total;
}

std::pair<double, double> deviation(const CanonicalPath& path, const VectorXd& target) {
  const VectorXd d = path.end() - target;
  return {d.lpNorm<Eigen::Infinity>(), d.norm() / std::sqrt(static_cast<double>(d.size()))};
}

PathDiagnostics diagnose(const CanonicalSystem& sys, const CanonicalPath& path, const CpTarget& target,
                         const VectorXd* start_css) {
  const auto s = sys.with_params(target.params);
  PathDiagnostics d;
  d.J = path_value(s, path);
  std::tie(d.dev_inf, d.dev_2) = deviation(path, target.u_hat);
  const double rho = s.rho();
  for (int j = 0; j < path.m(); ++j) {
    const double t = path.t[j] * path.T;
    const double g = jca_at(s, path, j);
    d.time.push_back(t);
    d.jca.push_back(g);
    d.discounted.push_back(std::exp(-rho * t) * g);
    d.dev.push_back((path.u.col(j) - target.u_hat).lpNorm<Eigen::Infinity>());
  }
  if (start_css) d.J0 = css_value(s, *start_css);
  d.J1 = target.kind == TargetKind::css ? css_value(s, target.u_hat) : cps_value(s, target.orbit, 0.0);
  return d;
}

}  // namespace occ
