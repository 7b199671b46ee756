#include "occ/models.hpp"

#include <cmath>
#include <numbers>

#include "occ/errors.hpp"

namespace occ {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

// ---------------------------------------------------------------- shallow lake

ModelParams ShallowLakeModel::default_params() const {
  return {{"b", "rho", "gamma", "D"}, {0.65, 0.03, 0.5, 0.5}, 1};
}

// Half-length 2*pi/0.44 fits one period of the first Turing mode near the fold.
double ShallowLakeModel::default_half_length() const { return 2.0 * kPi / 0.44; }

std::vector<double> ShallowLakeModel::diffusion(const ModelParams& p) const { return {p.values[3]}; }

void ShallowLakeModel::rhs(std::span<const double> u, const ModelParams& p, std::span<double> f) const {
  const double v = u[0], lam = u[1];
  const double b = p.values[0], rho = p.values[1], gam = p.values[2];
  const double q = 1.0 + v * v;
  f[0] = -1.0 / lam - b * v + v * v / q;
  f[1] = 2.0 * gam * v + lam * (rho + b - 2.0 * v / (q * q));
}

void ShallowLakeModel::rhs_jacobian(std::span<const double> u, const ModelParams& p,
                                    std::span<double> jac) const {
  const double v = u[0], lam = u[1];
  const double b = p.values[0], rho = p.values[1], gam = p.values[2];
  const double q = 1.0 + v * v;
  jac[0] = -b + 2.0 * v / (q * q);
  jac[1] = 1.0 / (lam * lam);
  jac[2] = 2.0 * gam - lam * (2.0 - 6.0 * v * v) / (q * q * q);
  jac[3] = rho + b - 2.0 * v / (q * q);
}

double ShallowLakeModel::control(std::span<const double> u, const ModelParams&) const {
  if (u[1] == 0.0) throw DomainError("sloc: control undefined at lambda = 0");
  return -1.0 / u[1];
}

double ShallowLakeModel::local_value(std::span<const double> u, const ModelParams& p) const {
  const double k = control(u, p);
  if (!(k > 0.0)) throw DomainError("sloc: ln(kappa) undefined for kappa <= 0");
  return std::log(k) - p.values[2] * u[0] * u[0];
}

// ---------------------------------------------------------------- pollution

ModelParams PollutionModel::default_params() const {
  return {{"rho", "p", "beta", "gamma", "d1", "d2"}, {0.5, 1.0, 0.2, 300.0, 0.001, 0.2}, 0};
}

double PollutionModel::default_half_length() const { return kPi / 2.0; }

std::vector<double> PollutionModel::diffusion(const ModelParams& p) const {
  return {p.values[4], p.values[5]};
}

void PollutionModel::rhs(std::span<const double> u, const ModelParams& p, std::span<double> f) const {
  const double v1 = u[0], v2 = u[1], l1 = u[2], l2 = u[3];
  const double rho = p.values[0], pp = p.values[1], beta = p.values[2], gam = p.values[3];
  f[0] = (1.0 + l1) / gam;
  f[1] = v1 - v2 * (1.0 - v2);
  f[2] = rho * l1 - pp - l2;
  f[3] = (rho + 1.0 - 2.0 * v2) * l2 + beta;
}

void PollutionModel::rhs_jacobian(std::span<const double> u, const ModelParams& p,
                                  std::span<double> jac) const {
  const double v2 = u[1], l2 = u[3];
  const double rho = p.values[0], gam = p.values[3];
  std::fill(jac.begin(), jac.end(), 0.0);
  jac[0 * 4 + 2] = 1.0 / gam;
  jac[1 * 4 + 0] = 1.0;
  jac[1 * 4 + 1] = -(1.0 - 2.0 * v2);
  jac[2 * 4 + 2] = rho;
  jac[2 * 4 + 3] = -1.0;
  jac[3 * 4 + 1] = -2.0 * l2;
  jac[3 * 4 + 3] = rho + 1.0 - 2.0 * v2;
}

double PollutionModel::control(std::span<const double> u, const ModelParams& p) const {
  return -(1.0 + u[2]) / p.values[3];
}

// Abatement cost k + gamma k^2 / 2, the cost for which kappa = -(1 + lambda1) / gamma maximizes H.
double PollutionModel::local_value(std::span<const double> u, const ModelParams& p) const {
  const double k = control(u, p);
  return p.values[1] * u[0] - p.values[2] * u[1] - (k + 0.5 * p.values[3] * k * k);
}

// ---------------------------------------------------------------- toy

ModelParams ToyModel::default_params() const { return {{"rho", "omega", "theta"}, {1.0, 1.0, 1.0}, 0}; }

void ToyModel::rhs(std::span<const double> u, const ModelParams& p, std::span<double> f) const {
  const double x1 = u[0], x2 = u[1], y1 = u[2], y2 = u[3];
  const double rho = p.values[0], om = p.values[1], th = p.values[2];
  const double r2 = x1 * x1 + x2 * x2;
  f[0] = -rho * x1 - th * x2 + rho * x1 * y1 * r2;
  f[1] = -rho * x2 + th * x1 + rho * x2 * y1 * r2;
  f[2] = om * y2;
  f[3] = om * std::sin(2.0 * kPi * y1);
}

void ToyModel::rhs_jacobian(std::span<const double> u, const ModelParams& p, std::span<double> jac) const {
  const double x1 = u[0], x2 = u[1], y1 = u[2];
  const double rho = p.values[0], om = p.values[1], th = p.values[2];
  const double r2 = x1 * x1 + x2 * x2;
  std::fill(jac.begin(), jac.end(), 0.0);
  jac[0] = -rho + rho * y1 * (r2 + 2.0 * x1 * x1);
  jac[1] = -th + 2.0 * rho * y1 * x1 * x2;
  jac[2] = rho * x1 * r2;
  jac[4] = th + 2.0 * rho * y1 * x1 * x2;
  jac[5] = -rho + rho * y1 * (r2 + 2.0 * x2 * x2);
  jac[6] = rho * x2 * r2;
  jac[11] = om;
  jac[14] = 2.0 * kPi * om * std::cos(2.0 * kPi * y1);
}

std::vector<double> ToyAnalytics::orbit(double t) const {
  return {std::cos(theta * t), std::sin(theta * t), 1.0, 0.0};
}

double ToyAnalytics::energy(double y1, double y2) const {
  return 0.5 * y2 * y2 + omega * omega / (2.0 * kPi) * std::cos(2.0 * kPi * y1);
}

double ToyAnalytics::heteroclinic_energy() const { return omega * omega / (2.0 * kPi); }

ToyAnalytics toy_analytics(const ModelParams& p) {
  const double rho = p.get("rho"), om = p.get("omega"), th = p.get("theta");
  if (!(rho > 0 && om > 0 && th > 0)) throw InvalidArgument("toy_analytics: parameters must be positive");
  const double s = 2.0 * kPi * std::sqrt(2.0 * kPi) * om / th;
  ToyAnalytics a;
  a.period = 2.0 * kPi / th;
  a.multipliers = {1.0, std::exp(-s), std::exp(4.0 * kPi * rho / th), std::exp(s)};
  a.theta = th;
  a.omega = om;
  return a;
}

// ---------------------------------------------------------------- registry

ModelPtr make_model(const std::string& name) {
  if (name == "sloc") return std::make_shared<ShallowLakeModel>();
  if (name == "pollution") return std::make_shared<PollutionModel>(true);
  if (name == "pollution-ode") return std::make_shared<PollutionModel>(false);
  if (name == "toy") return std::make_shared<ToyModel>();
  throw InvalidArgument("unknown model '" + name + "'");
}

std::vector<std::string> model_names() { return {"sloc", "pollution", "pollution-ode", "toy"}; }

FemOperators default_operators(const CanonicalModel& model, double lx, int nx) {
  if (!model.spatial()) return ode_operators();
  if (lx <= 0.0) lx = model.default_half_length();
  if (nx <= 0) nx = model.default_elements();
  return assemble_operators(build_mesh(lx, nx));
}

CanonicalSystem make_system(const std::string& model_name, double lx, int nx) {
  auto m = make_model(model_name);
  auto ops = default_operators(*m, lx, nx);
  return {m, std::move(ops), m->default_params()};
}

VectorXd pollution_flat_css(const CanonicalSystem& sys) {
  const auto& p = sys.params();
  const double rho = p.get("rho"), pp = p.get("p"), beta = p.get("beta");
  if (!(pp + rho > 0.0)) throw InvalidArgument("pollution_flat_css: need p + rho > 0");
  const double z = 0.5 * (1.0 + rho - beta / (pp + rho));
  const double vals[4] = {z * (1.0 - z), z, -1.0, -(pp + rho)};
  return sys.broadcast(vals);
}

VectorXd sloc_flat_seed(const CanonicalSystem& sys, FlatBranch branch, double tol) {
  if (sys.model().name() != "sloc") throw InvalidArgument("sloc_flat_seed: system is not the shallow lake");
  const auto& model = sys.model();
  const auto& p = sys.params();
  const double gam = p.get("gamma"), b = p.get("b"), rho = p.get("rho");
  // Starting costate from the costate equation at the guessed v.
  const double v0 = branch == FlatBranch::clean ? 0.3 : 1.6;
  const double q0 = 1.0 + v0 * v0;
  double u[2] = {v0, -2.0 * gam * v0 / (rho + b - 2.0 * v0 / (q0 * q0))};
  double f[2], j[4];
  double res = 0.0;
  for (int it = 0; it < 50; ++it) {
    model.rhs(u, p, f);
    res = std::max(std::abs(f[0]), std::abs(f[1]));
    if (!std::isfinite(res)) break;
    if (res < tol) {
      // The clean/intermediate pair lies below v = 1 and merges at the fold; the muddy root stays above.
      if ((branch == FlatBranch::muddy) != (u[0] > 1.0))
        throw NoConvergence("sloc_flat_seed: requested flat branch does not exist at b = " + std::to_string(b), res);
      if (!(u[1] < 0.0)) throw NoConvergence("sloc_flat_seed: converged to inadmissible costate", res);
      return sys.broadcast(u);
    }
    model.rhs_jacobian(u, p, j);
    const double det = j[0] * j[3] - j[1] * j[2];
    if (det == 0.0) break;
    double dv = (j[3] * f[0] - j[1] * f[1]) / det;
    double dl = (-j[2] * f[0] + j[0] * f[1]) / det;
    // Damp steps that would flip the costate sign.
    double t = 1.0;
    while (u[1] - t * dl >= 0.0 && t > 1e-6) t *= 0.5;
    u[0] -= t * dv;
    u[1] -= t * dl;
  }
  throw NoConvergence("sloc_flat_seed: Newton did not converge", res);
}

}  // namespace occ
