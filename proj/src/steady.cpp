#include "occ/steady.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "occ/errors.hpp"

namespace occ {

namespace {

// Dense Cholesky factor L of the block mass matrix.
MatrixXd mass_factor(const CanonicalSystem& sys) {
  Eigen::LLT<MatrixXd> llt{MatrixXd(sys.mass())};
  if (llt.info() != Eigen::Success) throw Error("mass matrix is not positive definite");
  return llt.matrixL();
}

int stable_dimension(const std::vector<std::complex<double>>& mu) {
  return static_cast<int>(std::count_if(mu.begin(), mu.end(), [](auto z) { return z.real() > kMarginal; }));
}

std::string stability_tag(int defect) { return defect == 0 ? "spp" : "d" + std::to_string(defect); }

class CssProblem final : public PacProblem {
 public:
  CssProblem(const CanonicalSystem& sys, std::string name) : sys_(sys), name_(std::move(name)) {}

  VectorXd residual(const VectorXd& x, double p) const override {
    return sys_.with_param(name_, p).residual(x);
  }

  SpMat jacobian(const VectorXd& x, double p) const override {
    const auto s = sys_.with_param(name_, p);
    const SpMat j = s.jacobian(x);
    const VectorXd dp = s.param_derivative(x, name_);
    SpMat out = border(j, dp, MatrixXd(0, j.cols()), MatrixXd(0, 1));
    return out;
  }

 private:
  const CanonicalSystem& sys_;
  std::string name_;
};

}  // namespace

Spectrum css_spectrum(const CanonicalSystem& sys, const VectorXd& u, bool with_vectors) {
  const MatrixXd l = mass_factor(sys);
  const MatrixXd j = sys.jacobian_dense(u);
  // C = L^{-1} J L^{-T}
  MatrixXd c = l.triangularView<Eigen::Lower>().solve(j);
  c = l.triangularView<Eigen::Lower>().solve(c.transpose()).transpose();
  Eigen::EigenSolver<MatrixXd> es(c, with_vectors);
  if (es.info() != Eigen::Success) throw Error("css_spectrum: eigensolver failed");
  const VectorXcd ev = es.eigenvalues();
  std::vector<int> order(ev.size());
  for (int i = 0; i < ev.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (ev[a].real() != ev[b].real()) return ev[a].real() < ev[b].real();
    return ev[a].imag() < ev[b].imag();
  });
  Spectrum s;
  for (int i : order) s.values.push_back(ev[i]);
  if (with_vectors) {
    const MatrixXcd y = es.eigenvectors();
    const Eigen::MatrixXcd lt = l.transpose().cast<std::complex<double>>();
    s.vectors.resize(y.rows(), y.cols());
    for (int k = 0; k < static_cast<int>(order.size()); ++k)
      s.vectors.col(k) = lt.triangularView<Eigen::Upper>().solve(y.col(order[k]));
  }
  return s;
}

int count_negative(const Spectrum& s) {
  return static_cast<int>(std::count_if(s.values.begin(), s.values.end(), [](auto z) { return z.real() < 0.0; }));
}

VectorXd newton_css(const CanonicalSystem& sys, const VectorXd& guess, double tol, int max_iter, int* iterations) {
  sys.check_size(guess, "newton_css");
  if (!guess.allFinite()) throw InvalidArgument("newton_css: initial guess is not finite");
  VectorXd u = guess;
  double res = 0.0;
  for (int it = 0; it <= max_iter; ++it) {
    const VectorXd g = sys.residual(u);
    res = g.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(res)) break;
    if (res < tol) {
      if (iterations) *iterations = it;
      return u;
    }
    if (it == max_iter) break;
    VectorXd du;
    try {
      du = sparse_solve(sys.jacobian(u), g, "newton_css");
    } catch (const Error&) {
      break;
    }
    u -= du;
  }
  throw NoConvergence("newton_css: no convergence (residual " + std::to_string(res) + ")", res);
}

BranchPoint make_branch_point(const CanonicalSystem& sys, const VectorXd& u, double arclength) {
  BranchPoint bp;
  bp.u = u;
  bp.params = sys.params();
  bp.arclength = arclength;
  bp.j_ca = sys.current_value(u);
  const Spectrum s = css_spectrum(sys, u);
  bp.n_neg = count_negative(s);
  bp.stability_tag = stability_tag(sys.n_states_total() - stable_dimension(s.values));
  return bp;
}

Branch continue_css(const CanonicalSystem& sys, const BranchPoint& start, const std::string& param_name,
                    const CssContinuation& opt) {
  if (opt.ds == 0.0) throw InvalidArgument("continue_css: ds must be nonzero");
  const auto base = sys.with_params(start.params);
  base.params().index_of(param_name);
  CssProblem prob(base, param_name);
  PacOptions po;
  po.ds = opt.ds;
  po.ds_min = opt.ds_min;
  po.ds_max = opt.ds_max;
  po.n_steps = opt.n_steps;
  po.tol = opt.tol;
  po.max_newton = opt.max_newton;
  po.p_min = opt.p_min;
  po.p_max = opt.p_max;
  const PacResult pr = pseudo_arclength(prob, start.u, start.params.get(param_name), po);

  Branch br;
  br.model = sys.model().name();
  br.param_name = param_name;
  br.folds = pr.folds;
  br.failed = pr.failed;
  br.message = pr.message;
  for (const auto& pt : pr.points) {
    const auto s = base.with_param(param_name, pt.p);
    if (opt.stability) {
      br.points.push_back(make_branch_point(s, pt.x, pt.s));
    } else {
      BranchPoint bp;
      bp.u = pt.x;
      bp.params = s.params();
      bp.arclength = pt.s;
      bp.j_ca = s.current_value(pt.x);
      bp.n_neg = -1;
      br.points.push_back(std::move(bp));
    }
  }
  return br;
}

int dominant_mode(const CanonicalSystem& sys, const VectorXd& node_values, int max_mode) {
  if (!sys.fem().spatial()) return 0;
  const auto& x = sys.fem().nodes;
  const double x0 = x.front(), len = x.back() - x.front();
  const auto& m = sys.fem().M;
  double best = -1.0;
  int arg = 0;
  for (int l = 0; l <= max_mode && l < sys.nodes(); ++l) {
    VectorXd c(sys.nodes());
    for (int i = 0; i < sys.nodes(); ++i) c[i] = std::cos(l * std::numbers::pi * (x[i] - x0) / len);
    const VectorXd mc = m * c;
    const double score = std::abs(node_values.dot(mc)) / std::sqrt(c.dot(mc));
    if (score > best * (1.0 + 1e-9)) {
      best = score;
      arg = l;
    }
  }
  return arg;
}

namespace {

int mode_of_eigenvector(const CanonicalSystem& sys, const VectorXcd& phi) {
  if (!sys.fem().spatial()) return 0;
  // Sum of squared projections over the state components, real and imaginary parts.
  const int n = sys.nodes();
  std::vector<double> score(std::min(21, n), 0.0);
  const auto& x = sys.fem().nodes;
  const double x0 = x.front(), len = x.back() - x.front();
  for (int l = 0; l < static_cast<int>(score.size()); ++l) {
    VectorXd c(n);
    for (int i = 0; i < n; ++i) c[i] = std::cos(l * std::numbers::pi * (x[i] - x0) / len);
    const VectorXd mc = sys.fem().M * c;
    const double nrm = c.dot(mc);
    for (int comp = 0; comp < 2 * sys.states(); ++comp) {
      const VectorXcd seg = phi.segment(comp * n, n);
      score[l] += std::norm(seg.dot(mc.cast<std::complex<double>>())) / nrm;
    }
  }
  return static_cast<int>(std::max_element(score.begin(), score.end()) - score.begin());
}

}  // namespace

std::vector<BifurcationEvent> detect_bifurcations(const CanonicalSystem& sys, const Branch& branch, double ptol) {
  std::vector<BifurcationEvent> events;
  if (branch.points.size() < 2) return events;
  const std::string& name = branch.param_name;

  struct Probe {
    VectorXd u;
    double p;
    int n_neg;
  };
  auto probe_at = [&](const Probe& a, const Probe& b, double s) -> Probe {
    const double p = (1.0 - s) * a.p + s * b.p;
    const auto sp = sys.with_params(branch.points.front().params).with_param(name, p);
    VectorXd u = (1.0 - s) * a.u + s * b.u;
    try {
      u = newton_css(sp, u, 1e-10, 15);
    } catch (const NoConvergence&) {
    }
    return {u, p, count_negative(css_spectrum(sp, u))};
  };

  std::function<void(const Probe&, const Probe&)> locate = [&](const Probe& a, const Probe& b) {
    if (a.n_neg == b.n_neg) return;
    if (std::abs(b.p - a.p) < ptol) {
      const Probe m = probe_at(a, b, 0.5);
      const auto sp = sys.with_params(branch.points.front().params).with_param(name, m.p);
      const Spectrum s = css_spectrum(sp, m.u, true);
      int k = 0;
      double best = 1e300;
      for (int i = 0; i < static_cast<int>(s.values.size()); ++i) {
        if (s.values[i].imag() < 0.0) continue;
        const double r = std::abs(s.values[i].real());
        if (r < best) {
          best = r;
          k = i;
        }
      }
      BifurcationEvent ev;
      ev.param_name = name;
      ev.param = m.p;
      ev.u = m.u;
      ev.params = sp.params();
      ev.mu = s.values[k];
      ev.phi = s.vectors.col(k);
      ev.kind = std::abs(ev.mu.imag()) > 1e-9 ? BifurcationKind::hopf : BifurcationKind::steady;
      const int jump = std::abs(b.n_neg - a.n_neg);
      ev.kernel_dim = ev.kind == BifurcationKind::hopf ? std::max(1, jump / 2) : jump;
      ev.spatial_mode = mode_of_eigenvector(sp, ev.phi);
      ev.n_neg_before = a.n_neg;
      ev.n_neg_after = b.n_neg;
      events.push_back(std::move(ev));
      return;
    }
    const Probe m = probe_at(a, b, 0.5);
    locate(a, m);
    locate(m, b);
  };

  for (std::size_t i = 0; i + 1 < branch.points.size(); ++i) {
    const auto& pa = branch.points[i];
    const auto& pb = branch.points[i + 1];
    auto count = [&](const BranchPoint& bp) {
      if (bp.n_neg >= 0) return bp.n_neg;
      return count_negative(css_spectrum(sys.with_params(bp.params), bp.u));
    };
    Probe a{pa.u, pa.param(name), count(pa)};
    Probe b{pb.u, pb.param(name), count(pb)};
    locate(a, b);
  }
  return events;
}

namespace {

VectorXd real_mode(const BifurcationEvent& ev) {
  VectorXd phi = ev.phi.real();
  const double nrm = phi.lpNorm<Eigen::Infinity>();
  if (nrm == 0.0) throw Unsupported("branch_switch: zero eigenvector");
  phi /= nrm;
  // Fix the sign so that the largest entry is positive.
  Eigen::Index k;
  phi.cwiseAbs().maxCoeff(&k);
  if (phi[k] < 0) phi = -phi;
  return phi;
}

void require_steady(const BifurcationEvent& ev) {
  if (ev.kind != BifurcationKind::steady)
    throw Unsupported("branch_switch: Hopf events are handled by cps_from_hopf");
  if (ev.kernel_dim != 1)
    throw Unsupported("branch_switch: kernel dimension " + std::to_string(ev.kernel_dim) + " is not 1");
}

}  // namespace

VectorXd branch_switch(const CanonicalSystem& sys, const BifurcationEvent& ev, double amplitude) {
  require_steady(ev);
  sys.check_size(ev.u, "branch_switch");
  return ev.u + amplitude * real_mode(ev);
}

BranchPoint switch_corrector(const CanonicalSystem& sys, const BifurcationEvent& ev, double amplitude, double tol,
                             int max_iter) {
  require_steady(ev);
  const auto base = sys.with_params(ev.params);
  if (amplitude == 0.0) return make_branch_point(base, newton_css(base, ev.u, tol, max_iter));
  const VectorXd phi = real_mode(ev);
  const VectorXd mphi = base.mass() * phi;
  const double scale = phi.dot(mphi);
  VectorXd u = ev.u + amplitude * phi;
  double p = ev.param;
  const int n = base.n_u();
  double res = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const auto s = base.with_param(ev.param_name, p);
    VectorXd f(n + 1);
    f.head(n) = s.residual(u);
    f(n) = mphi.dot(u - ev.u) / scale - amplitude;
    res = f.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(res)) break;
    if (res < tol) return make_branch_point(s, u);
    MatrixXd row = (mphi / scale).transpose();
    const SpMat a = border(s.jacobian(u), s.param_derivative(u, ev.param_name), row, MatrixXd::Zero(1, 1));
    VectorXd d;
    try {
      d = sparse_solve(a, f, "switch_corrector");
    } catch (const Error&) {
      break;
    }
    u -= d.head(n);
    p -= d(n);
  }
  throw NoConvergence("switch_corrector: no convergence", res);
}

CssTarget css_target(const CanonicalSystem& sys, const VectorXd& u_hat, bool require_spp) {
  sys.check_size(u_hat, "css_target");
  const MatrixXd l = mass_factor(sys);
  const MatrixXd jt = sys.jacobian_dense(u_hat).transpose();
  // Adjoint problem J^T phi = Lambda M phi with y = L^T phi; M phi = L y.
  MatrixXd c = l.triangularView<Eigen::Lower>().solve(jt);
  c = l.triangularView<Eigen::Lower>().solve(c.transpose()).transpose();
  Eigen::EigenSolver<MatrixXd> es(c, true);
  if (es.info() != Eigen::Success) throw Error("css_target: eigensolver failed");
  const VectorXcd lam = es.eigenvalues();
  const MatrixXcd y = es.eigenvectors();

  CssTarget t;
  t.u_hat = u_hat;
  t.params = sys.params();
  for (int i = 0; i < lam.size(); ++i) t.spectrum.push_back(lam[i]);
  std::sort(t.spectrum.begin(), t.spectrum.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  t.stable_dim = stable_dimension(t.spectrum);
  t.defect = sys.n_states_total() - t.stable_dim;
  double mu2 = std::numeric_limits<double>::infinity();
  for (auto z : t.spectrum) {
    if (std::abs(z.real()) <= kMarginal) t.near_degenerate = true;
    if (z.real() > kMarginal) mu2 = std::min(mu2, z.real());
  }
  t.T_suggest = std::isfinite(mu2) ? 1.0 / mu2 : 0.0;

  std::vector<VectorXd> rows;
  for (int i = 0; i < lam.size(); ++i) {
    if (lam[i].real() > kMarginal || lam[i].imag() < 0.0) continue;
    const VectorXcd my = l.cast<std::complex<double>>() * y.col(i);
    rows.push_back(my.real());
    if (lam[i].imag() > 0.0) rows.push_back(my.imag());
  }
  MatrixXd psi(rows.size(), sys.n_u());
  for (std::size_t r = 0; r < rows.size(); ++r) psi.row(r) = rows[r].transpose();
  t.Psi = orthonormal_rows(psi);

  if (require_spp && t.defect != 0)
    throw SppViolation("css_target: defect " + std::to_string(t.defect) + " (not a saddle point)", t.defect);
  return t;
}

}  // namespace occ
