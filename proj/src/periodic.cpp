#include "occ/periodic.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "occ/errors.hpp"
#include "occ/pschur.hpp"

namespace occ {

namespace {

using cd = std::complex<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

void add_block(Triplets& t, const SpMat& a, double scale, int row0, int col0) {
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMat::InnerIterator it(a, k); it; ++it)
      t.emplace_back(row0 + it.row(), col0 + it.col(), scale * it.value());
}

// Periodic trapezoidal collocation with unknowns x = (u_0, ..., u_{m-2}, T).
class Collocation {
 public:
  Collocation(const CanonicalSystem& sys, std::vector<double> t) : sys_(sys), t_(std::move(t)) {
    if (t_.size() < 4) throw InvalidArgument("periodic orbit needs at least 4 mesh points");
    nb_ = static_cast<int>(t_.size()) - 1;
  }

  int blocks() const { return nb_; }
  int size() const { return nb_ * sys_.n_u() + 1; }

  VectorXd pack(const CpsOrbit& o) const {
    const int n = sys_.n_u();
    VectorXd x(size());
    for (int j = 0; j < nb_; ++j) x.segment(j * n, n) = o.u.col(j);
    x(nb_ * n) = o.T;
    return x;
  }

  CpsOrbit unpack(const VectorXd& x, const ModelParams& p) const {
    const int n = sys_.n_u();
    CpsOrbit o;
    o.t = t_;
    o.params = p;
    o.T = x(nb_ * n);
    o.u.resize(n, nb_ + 1);
    for (int j = 0; j < nb_; ++j) o.u.col(j) = x.segment(j * n, n);
    o.u.col(nb_) = o.u.col(0);
    return o;
  }

  void set_reference(const CpsOrbit& ref) {
    const int n = sys_.n_u();
    ref_ = pack(ref);
    dref_.resize(nb_ * n);
    for (int j = 0; j < nb_; ++j) {
      const int jp = (j + 1) % nb_, jm = (j - 1 + nb_) % nb_;
      const double hp = t_[j + 1] - t_[j];
      const double hm = j == 0 ? t_[nb_] - t_[nb_ - 1] : t_[j] - t_[j - 1];
      const double w = 0.5 * (hp + hm);
      dref_.segment(j * n, n) = w * (ref.u.col(jp) - ref.u.col(jm)) / (hp + hm);
    }
    if (dref_.lpNorm<Eigen::Infinity>() < 1e-14)
      throw DegenerateOrbit("phase condition reference has no time dependence");
  }

  VectorXd residual(const CanonicalSystem& s, const VectorXd& x) const {
    const int n = sys_.n_u();
    const double T = x(nb_ * n);
    std::vector<VectorXd> g(nb_);
    for (int j = 0; j < nb_; ++j) g[j] = s.residual(x.segment(j * n, n));
    VectorXd r(size());
    const SpMat& m = s.mass();
    for (int j = 0; j < nb_; ++j) {
      const int jn = (j + 1) % nb_;
      const double h = t_[j + 1] - t_[j];
      r.segment(j * n, n) = m * (x.segment(jn * n, n) - x.segment(j * n, n)) / h + 0.5 * T * (g[j] + g[jn]);
    }
    r(nb_ * n) = dref_.dot(x.head(nb_ * n) - ref_.head(nb_ * n));
    return r;
  }

  // Square Jacobian; with a parameter name, one extra column for d/dp.
  SpMat jacobian(const CanonicalSystem& s, const VectorXd& x, const std::string* param) const {
    const int n = sys_.n_u();
    const double T = x(nb_ * n);
    const SpMat& m = s.mass();
    std::vector<SpMat> jac(nb_);
    std::vector<VectorXd> g(nb_), gp;
    for (int j = 0; j < nb_; ++j) {
      const VectorXd uj = x.segment(j * n, n);
      jac[j] = s.jacobian(uj);
      g[j] = s.residual(uj);
      if (param) gp.push_back(s.param_derivative(uj, *param));
    }
    Triplets t;
    t.reserve(static_cast<std::size_t>(nb_) * (2 * jac[0].nonZeros() + 2 * m.nonZeros() + 2 * n) + nb_ * n);
    const int tc = nb_ * n;
    for (int j = 0; j < nb_; ++j) {
      const int jn = (j + 1) % nb_;
      const double h = t_[j + 1] - t_[j];
      add_block(t, m, -1.0 / h, j * n, j * n);
      add_block(t, jac[j], 0.5 * T, j * n, j * n);
      add_block(t, m, 1.0 / h, j * n, jn * n);
      add_block(t, jac[jn], 0.5 * T, j * n, jn * n);
      const VectorXd dt = 0.5 * (g[j] + g[jn]);
      for (int i = 0; i < n; ++i) {
        if (dt[i] != 0.0) t.emplace_back(j * n + i, tc, dt[i]);
        if (param) {
          const double v = 0.5 * T * (gp[j][i] + gp[jn][i]);
          if (v != 0.0) t.emplace_back(j * n + i, tc + 1, v);
        }
      }
    }
    for (int k = 0; k < nb_ * n; ++k)
      if (dref_[k] != 0.0) t.emplace_back(tc, k, dref_[k]);
    SpMat a(size(), size() + (param ? 1 : 0));
    a.setFromTriplets(t.begin(), t.end());
    a.makeCompressed();
    return a;
  }

 private:
  const CanonicalSystem& sys_;
  std::vector<double> t_;
  int nb_;
  VectorXd ref_;
  VectorXd dref_;
};

class CpsProblem final : public PacProblem {
 public:
  CpsProblem(const CanonicalSystem& sys, const std::vector<double>& t, std::string param)
      : sys_(sys), col_(sys, t), param_(std::move(param)) {}

  Collocation& collocation() { return col_; }

  VectorXd residual(const VectorXd& x, double p) const override {
    return col_.residual(sys_.with_param(param_, p), x);
  }
  SpMat jacobian(const VectorXd& x, double p) const override {
    return col_.jacobian(sys_.with_param(param_, p), x, &param_);
  }
  void accept(const VectorXd& x, double p) override {
    col_.set_reference(col_.unpack(x, sys_.with_param(param_, p).params()));
  }

 private:
  const CanonicalSystem& sys_;
  Collocation col_;
  std::string param_;
};

CpsBranch to_branch(const CanonicalSystem& sys, const CpsProblem& prob, const Collocation& col,
                    const PacResult& pr, const std::string& param) {
  (void)prob;
  CpsBranch br;
  br.param_name = param;
  br.folds = pr.folds;
  br.failed = pr.failed;
  br.message = pr.message;
  for (const auto& pt : pr.points) br.orbits.push_back(col.unpack(pt.x, sys.with_param(param, pt.p).params()));
  return br;
}

}  // namespace

VectorXd CpsOrbit::sample(double s) const {
  s -= std::floor(s);
  const int m = this->m();
  auto it = std::upper_bound(t.begin(), t.end(), s);
  int j = static_cast<int>(it - t.begin()) - 1;
  j = std::clamp(j, 0, m - 2);
  const double w = (s - t[j]) / (t[j + 1] - t[j]);
  return (1.0 - w) * u.col(j) + w * u.col(j + 1);
}

double CpsOrbit::amplitude() const {
  const VectorXd mean = u.leftCols(m() - 1).rowwise().mean();
  double a = 0.0;
  for (int j = 0; j + 1 < m(); ++j) a = std::max(a, (u.col(j) - mean).lpNorm<Eigen::Infinity>());
  return a;
}

CpsOrbit toy_orbit(const CanonicalSystem& sys, int m) {
  const double th = sys.params().get("theta");
  return make_orbit(m, 2.0 * std::numbers::pi / th, sys.params(), [&](double s) {
    VectorXd v(4);
    const double a = 2.0 * std::numbers::pi * s;
    v << std::cos(a), std::sin(a), 1.0, 0.0;
    return v;
  });
}

namespace {

VectorXcd hopf_mode(const BifurcationEvent& ev) {
  if (ev.kind != BifurcationKind::hopf || !(ev.mu.imag() > 0.0))
    throw Unsupported("cps_from_hopf: event is not a Hopf crossing");
  VectorXcd phi = ev.phi;
  const double nrm = phi.cwiseAbs().maxCoeff();
  if (nrm == 0.0) throw Unsupported("cps_from_hopf: zero eigenvector");
  // Rotate so that the largest entry is real and positive.
  Eigen::Index k;
  phi.cwiseAbs().maxCoeff(&k);
  phi *= std::conj(phi[k]) / std::abs(phi[k]) / nrm;
  return phi;
}

}  // namespace

CpsOrbit cps_from_hopf(const CanonicalSystem& sys, const BifurcationEvent& ev, double amplitude, int m) {
  const VectorXcd phi = hopf_mode(ev);
  sys.check_size(ev.u, "cps_from_hopf");
  // Linearization M w' = -dG w with dG phi = i omega M phi gives w = exp(-i omega t) phi.
  const double omega = ev.mu.imag();
  return make_orbit(m, 2.0 * std::numbers::pi / omega, ev.params, [&](double s) {
    const cd e = std::exp(cd(0.0, -2.0 * std::numbers::pi * s));
    return VectorXd(ev.u + amplitude * (e * phi).real());
  });
}

double cps_residual(const CanonicalSystem& sys, const CpsOrbit& orbit) {
  const auto s = sys.with_params(orbit.params);
  double r = 0.0;
  for (int j = 0; j + 1 < orbit.m(); ++j) {
    const double h = orbit.t[j + 1] - orbit.t[j];
    const VectorXd e = s.mass() * (orbit.u.col(j + 1) - orbit.u.col(j)) / h +
                       0.5 * orbit.T * (s.residual(orbit.u.col(j)) + s.residual(orbit.u.col(j + 1)));
    r = std::max(r, e.lpNorm<Eigen::Infinity>());
  }
  return r;
}

CpsOrbit cps_newton(const CanonicalSystem& sys, const CpsOrbit& guess, double tol, int max_iter,
                    const CpsOrbit* reference) {
  if (guess.m() < 20) throw InvalidArgument("cps_newton: need at least 20 mesh points");
  if (guess.u.rows() != sys.n_u()) throw InvalidArgument("cps_newton: orbit dimension mismatch");
  if (guess.amplitude() < 1e-8) throw DegenerateOrbit("cps_newton: guess has no oscillation");
  const auto s = sys.with_params(guess.params);
  Collocation col(s, guess.t);
  col.set_reference(reference ? *reference : guess);
  VectorXd x = col.pack(guess);
  double res = 0.0;
  for (int it = 0; it <= max_iter; ++it) {
    const VectorXd r = col.residual(s, x);
    res = r.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(res)) break;
    if (res < tol) {
      CpsOrbit out = col.unpack(x, s.params());
      if (out.amplitude() < 1e-8) throw DegenerateOrbit("cps_newton: orbit collapsed onto a steady state");
      if (!(out.T > 0.0)) throw NoConvergence("cps_newton: nonpositive period", res);
      return out;
    }
    if (it == max_iter) break;
    VectorXd d;
    try {
      d = sparse_solve(col.jacobian(s, x, nullptr), r, "cps_newton");
    } catch (const Error&) {
      break;
    }
    x -= d;
  }
  throw NoConvergence("cps_newton: no convergence (residual " + std::to_string(res) + ")", res);
}

CpsBranch cps_continue(const CanonicalSystem& sys, const CpsOrbit& orbit, const std::string& param_name,
                       const CpsContinuation& opt) {
  const auto base = sys.with_params(orbit.params);
  CpsProblem prob(base, orbit.t, param_name);
  prob.collocation().set_reference(orbit);
  PacOptions po;
  po.ds = opt.ds;
  po.ds_min = opt.ds_min;
  po.ds_max = opt.ds_max;
  po.n_steps = opt.n_steps;
  po.tol = opt.tol;
  po.max_newton = opt.max_newton;
  po.p_min = opt.p_min;
  po.p_max = opt.p_max;
  const PacResult pr = pseudo_arclength(prob, prob.collocation().pack(orbit), orbit.params.get(param_name), po);
  return to_branch(base, prob, prob.collocation(), pr, param_name);
}

CpsBranch cps_continue_from_hopf(const CanonicalSystem& sys, const BifurcationEvent& ev, int m,
                                 const CpsContinuation& opt) {
  const VectorXcd phi = hopf_mode(ev);
  const auto base = sys.with_params(ev.params);
  const CpsOrbit start = cps_from_hopf(base, ev, 0.0, m);
  const CpsOrbit mode = cps_from_hopf(base, ev, 1.0, m);
  CpsProblem prob(base, start.t, ev.param_name);
  Collocation& col = prob.collocation();
  CpsOrbit ref = start;
  ref.u = start.u + std::abs(opt.ds) * (mode.u - start.u);
  col.set_reference(ref);
  VectorXd tau = VectorXd::Zero(col.size() + 1);
  tau.head(col.size()) = col.pack(mode) - col.pack(start);
  PacOptions po;
  po.ds = std::abs(opt.ds);
  po.ds_min = opt.ds_min;
  po.ds_max = opt.ds_max;
  po.n_steps = opt.n_steps;
  po.tol = opt.tol;
  po.max_newton = opt.max_newton;
  po.p_min = opt.p_min;
  po.p_max = opt.p_max;
  const PacResult pr = pseudo_arclength(prob, col.pack(start), ev.param, po, tau);
  return to_branch(base, prob, col, pr, ev.param_name);
}

CpsOrbit cps_at_param(const CanonicalSystem& sys, const CpsBranch& branch, double value, int from_index) {
  const auto& o = branch.orbits;
  const std::string& name = branch.param_name;
  for (std::size_t i = std::max(0, from_index); i + 1 < o.size(); ++i) {
    const double a = o[i].params.get(name), b = o[i + 1].params.get(name);
    if ((a - value) * (b - value) > 0.0) continue;
    const double w = a == b ? 0.0 : (value - a) / (b - a);
    CpsOrbit guess = o[i];
    guess.u = (1.0 - w) * o[i].u + w * o[i + 1].u;
    guess.T = (1.0 - w) * o[i].T + w * o[i + 1].T;
    guess.params.set(name, value);
    return cps_newton(sys, guess, 1e-9, 25);
  }
  throw InvalidArgument("cps_at_param: branch does not reach " + name + " = " + std::to_string(value));
}

std::vector<MatrixXd> floquet_factors(const CanonicalSystem& sys, const CpsOrbit& orbit, FloquetScheme scheme) {
  const auto s = sys.with_params(orbit.params);
  const int n = s.n_u();
  const int nb = orbit.m() - 1;
  const MatrixXd m = MatrixXd(s.mass());
  const double T = orbit.T;
  std::vector<MatrixXd> a(nb);

  if (scheme == FloquetScheme::trapezoid) {
    std::vector<MatrixXd> j(nb + 1);
    for (int k = 0; k < nb; ++k) j[k] = s.jacobian_dense(orbit.u.col(k));
    j[nb] = j[0];
    for (int k = 0; k < nb; ++k) {
      const double h = orbit.t[k + 1] - orbit.t[k];
      Eigen::PartialPivLU<MatrixXd> lu(m + 0.5 * h * T * j[k + 1]);
      if (!(std::abs(lu.determinant()) > 0.0) || !std::isfinite(lu.rcond()) || lu.rcond() < 1e-14)
        throw Error("floquet: singular step factor at step " + std::to_string(k));
      a[k] = lu.solve(m - 0.5 * h * T * j[k]);
    }
    return a;
  }

  // Two-stage Gauss-Legendre on M w' = -T dG(u(s)) w with a Hermite-cubic orbit.
  Eigen::SparseLU<SpMat> mlu(s.mass());
  std::vector<VectorXd> du(nb + 1);
  for (int k = 0; k < nb; ++k) du[k] = -T * VectorXd(mlu.solve(s.residual(orbit.u.col(k))));
  du[nb] = du[0];
  const double r3 = std::sqrt(3.0) / 6.0;
  const double c[2] = {0.5 - r3, 0.5 + r3};
  const double aa[2][2] = {{0.25, 0.25 - r3}, {0.25 + r3, 0.25}};
  for (int k = 0; k < nb; ++k) {
    const double h = orbit.t[k + 1] - orbit.t[k];
    MatrixXd cm[2];
    for (int i = 0; i < 2; ++i) {
      const double th = c[i];
      const double h00 = 2 * th * th * th - 3 * th * th + 1, h10 = th * th * th - 2 * th * th + th;
      const double h01 = -2 * th * th * th + 3 * th * th, h11 = th * th * th - th * th;
      const VectorXd ui = h00 * orbit.u.col(k) + h10 * h * du[k] + h01 * orbit.u.col(k + 1) + h11 * h * du[k + 1];
      cm[i] = -T * s.jacobian_dense(ui);
    }
    MatrixXd big(2 * n, 2 * n);
    big.topLeftCorner(n, n) = m - h * aa[0][0] * cm[0];
    big.topRightCorner(n, n) = -h * aa[0][1] * cm[0];
    big.bottomLeftCorner(n, n) = -h * aa[1][0] * cm[1];
    big.bottomRightCorner(n, n) = m - h * aa[1][1] * cm[1];
    MatrixXd rhs(2 * n, n);
    rhs.topRows(n) = cm[0];
    rhs.bottomRows(n) = cm[1];
    Eigen::PartialPivLU<MatrixXd> lu(big);
    if (!std::isfinite(lu.rcond()) || lu.rcond() < 1e-14)
      throw Error("floquet: singular step factor at step " + std::to_string(k));
    const MatrixXd kk = lu.solve(rhs);
    a[k] = MatrixXd::Identity(n, n) + 0.5 * h * (kk.topRows(n) + kk.bottomRows(n));
  }
  return a;
}

namespace {

int trivial_position(const std::vector<cd>& logs) {
  int best = 0;
  double dist = 1e300;
  for (int i = 0; i < static_cast<int>(logs.size()); ++i) {
    const double d = std::abs(logs[i]);
    if (d < dist) {
      dist = d;
      best = i;
    }
  }
  return best;
}

double trivial_distance(cd log_gamma) { return std::abs(std::exp(log_gamma) - 1.0); }

}  // namespace

FloquetResult floquet(const CanonicalSystem& sys, const CpsOrbit& orbit, FloquetScheme scheme) {
  PeriodicSchur ps(floquet_factors(sys, orbit, scheme));
  ps.sort_descending();
  FloquetResult r;
  r.log_multipliers = ps.log_eigenvalues();
  for (auto z : r.log_multipliers) r.multipliers.push_back(std::exp(z));
  r.trivial_index = trivial_position(r.log_multipliers);
  r.trivial_error = trivial_distance(r.log_multipliers[r.trivial_index]);
  r.orthogonality_error = ps.orthogonality_error();
  return r;
}

CpsTarget cps_target(const CanonicalSystem& sys, const CpsOrbit& orbit, int anchor_index, FloquetScheme scheme,
                     bool require_spp) {
  const int nb = orbit.m() - 1;
  if (anchor_index < 0 || anchor_index > nb) throw InvalidArgument("cps_target: anchor index out of range");
  const int a = anchor_index % nb;
  PeriodicSchur ps(floquet_factors(sys, orbit, scheme));
  const auto logs = ps.log_eigenvalues();
  const int triv = trivial_position(logs);
  std::vector<int> rank(logs.size());
  int k = 0;
  for (int i = 0; i < static_cast<int>(logs.size()); ++i) {
    const bool stable = i != triv && logs[i].real() < 0.0;
    rank[i] = stable ? 0 : 1;
    k += stable;
  }
  ps.reorder(rank);

  CpsTarget t;
  t.orbit = orbit;
  t.anchor_index = a;
  t.u0 = orbit.u.col(a);
  auto sorted = ps.log_eigenvalues();
  std::stable_sort(sorted.begin(), sorted.end(), [](cd x, cd y) { return x.real() > y.real(); });
  for (auto z : sorted) t.multipliers.push_back(std::exp(z));
  t.trivial_index = trivial_position(sorted);
  t.trivial_error = trivial_distance(sorted[t.trivial_index]);
  const int n = ps.size();
  t.defect = sys.n_states_total() - (k + 1);

  // Real orthonormal basis of the stable subspace and of its complement.
  if (k == 0) {
    t.stable_basis = MatrixXd(n, 0);
    t.P = MatrixXd::Identity(n, n);
  } else {
    const MatrixXcd s = ps.basis(a).leftCols(k);
    MatrixXd re(n, 2 * k);
    re << s.real(), s.imag();
    Eigen::JacobiSVD<MatrixXd> svd(re, Eigen::ComputeFullU);
    t.stable_basis = svd.matrixU().leftCols(k);
    t.P = svd.matrixU().rightCols(n - k).transpose();
  }

  if (require_spp && t.defect != 0)
    throw SppViolation("cps_target: defect " + std::to_string(t.defect) + " (not a saddle point)", t.defect);
  return t;
}

CpsOrbit rotate_orbit(const CpsOrbit& orbit, int shift) {
  const int nb = orbit.m() - 1;
  shift = ((shift % nb) + nb) % nb;
  CpsOrbit o = orbit;
  std::vector<double> h(nb);
  for (int j = 0; j < nb; ++j) h[j] = orbit.t[(j + shift) % nb + 1] - orbit.t[(j + shift) % nb];
  o.t[0] = 0.0;
  for (int j = 0; j < nb; ++j) {
    o.u.col(j) = orbit.u.col((j + shift) % nb);
    o.t[j + 1] = o.t[j] + h[j];
  }
  o.t[nb] = 1.0;
  o.u.col(nb) = o.u.col(0);
  return o;
}

double discounted_segment(double rho, double a, double b, double ga, double gb) {
  const double len = b - a;
  if (len <= 0.0) return 0.0;
  const double ea = std::exp(-rho * a), eb = std::exp(-rho * b);
  if (rho * len < 1e-8) return 0.5 * (ga * ea + gb * eb) * len;
  const double i0 = (ea - eb) / rho;
  const double i1 = -len * eb / rho - (eb - ea) / (rho * rho);  // integral of (t - a) e^{-rho t}
  return ga * i0 + (gb - ga) * i1 / len;
}

double cps_value(const CanonicalSystem& sys, const CpsOrbit& orbit, double phase) {
  const auto s = sys.with_params(orbit.params);
  const double rho = s.rho();
  if (!(rho > 0.0)) throw InvalidArgument("cps_value: discount rate must be positive");
  const double T = orbit.T;
  if (phase < 0.0 || phase >= T) throw InvalidArgument("cps_value: phase must lie in [0, T_p)");
  const int m = orbit.m();
  std::vector<double> g(m), tau(m);
  for (int j = 0; j < m; ++j) {
    g[j] = s.current_value(orbit.u.col(j));
    tau[j] = orbit.t[j] * T;
  }
  auto g_at = [&](double x) {
    auto it = std::upper_bound(tau.begin(), tau.end(), x);
    int j = std::clamp(static_cast<int>(it - tau.begin()) - 1, 0, m - 2);
    const double w = (x - tau[j]) / (tau[j + 1] - tau[j]);
    return (1.0 - w) * g[j] + w * g[j + 1];
  };
  double total = 0.0;
  // Orbit time sigma in [phase, T] maps to discount time sigma - phase, [0, phase] to sigma + T - phase.
  for (int j = 0; j + 1 < m; ++j) {
    const double lo = std::max(tau[j], phase), hi = tau[j + 1];
    if (hi > lo) total += discounted_segment(rho, lo - phase, hi - phase, g_at(lo), g_at(hi));
    const double lo2 = tau[j], hi2 = std::min(tau[j + 1], phase);
    if (hi2 > lo2) total += discounted_segment(rho, lo2 + T - phase, hi2 + T - phase, g_at(lo2), g_at(hi2));
  }
  return total / (1.0 - std::exp(-rho * T));
}

}  // namespace occ
