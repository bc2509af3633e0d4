#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qma/field.hpp"
#include "qma/hkt.hpp"

namespace qma {

struct SolverConfig {
  GridSpec grid;
  double newton_tol = 1e-10;       ///< residual max-norm
  int max_newton = 30;
  double t_step_init = 0.25;
  double t_step_min = 1e-3;
  double damping = 0.5;            ///< line-search backtracking factor
  double krylov_tol = 1e-12;       ///< relative linear-solve residual
  int krylov_max_iter = 500;
  double positivity_margin = 1e-8; ///< floor kept along the whole path

  void validate() const {
    grid.validate();
    if (newton_tol <= 0 || krylov_tol <= 0 || positivity_margin <= 0 || t_step_min <= 0)
      throw std::invalid_argument("SolverConfig: tolerances must be positive");
    if (!(t_step_min <= t_step_init && t_step_init <= 1.0))
      throw std::invalid_argument("SolverConfig: need t_step_min <= t_step_init <= 1");
    if (damping <= 0.0 || damping >= 1.0)
      throw std::invalid_argument("SolverConfig: damping must lie in (0,1)");
    if (max_newton < 1 || krylov_max_iter < 1)
      throw std::invalid_argument("SolverConfig: iteration limits must be >= 1");
  }
};

struct MonitorSnapshot {
  double beta_sup = 0.0;
  double eta_sup = 0.0;
  double theta_sup = 0.0;
};

struct ContinuityState {
  double t = 0.0;
  RealField phi;  ///< mean-zero working normalization
  double residual_norm = 0.0;
  MonitorSnapshot monitor;
  double positivity_margin = 0.0;
  double mean_pf = 0.0;
  int newton_iters = 0;
  std::vector<double> newton_residuals;  ///< residual max-norm per inner iterate
};

struct SolveReport {
  bool converged = false;
  std::vector<ContinuityState> path;
  double final_residual = std::numeric_limits<double>::infinity();
  RealField phi_mean_zero;
  RealField phi_sup_zero;  ///< the sup_M phi = 0 normalization of the same solution
  std::string failure_reason;
  double rhs_log_constant = 0.0;   ///< additive constant applied by build_rhs
  bool rhs_was_rescaled = false;
  double beta_definition_discrepancy = 0.0;  ///< wedge vs gradient expression, max over path
  double max_discarded_mean = 0.0;           ///< residual mean removed before linear solves
};

struct NewtonDiagnostics {
  double step_size = 0.0;
  int krylov_iterations = 0;
  double discarded_mean = 0.0;
  double residual_norm = 0.0;
};

struct line_search_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct krylov_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Normalized right-hand side: e^f rescaled so its mean is exactly 1, the
/// flat-torus form of the compatibility condition.  The applied additive
/// constant is reported through log_constant.
inline RealField build_rhs(const RealField& f, double* log_constant = nullptr) {
  RealField rhs(f.grid());
  for (std::size_t i = 0; i < f.size(); ++i) rhs[i] = std::exp(f[i]);
  const double m = mean(rhs);
  if (!(m > 0.0) || !std::isfinite(m))
    throw std::invalid_argument("build_rhs: e^f has nonpositive or non-finite mean");
  const double inv = 1.0 / m;
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] *= inv;
  if (log_constant) *log_constant = -std::log(m);
  return rhs;
}

/// Interpolated target t e^f + (1 - t); affine in t, so its mean stays 1
/// along the whole path.
inline RealField continuity_rhs(const RealField& rhs, double t) {
  RealField out(rhs.grid());
  for (std::size_t i = 0; i < rhs.size(); ++i) out[i] = t * rhs[i] + (1.0 - t);
  return out;
}

namespace detail {

/// Projection onto the modes with every axis frequency strictly below
/// Nyquist.  For n >= 2 the Newton directions are confined to this
/// subspace: there the dealiased products are exact truncations, so the
/// Pfaffian mean is conserved to round-off and the pointwise linearization
/// matches the dealiased residual.  The grid cannot represent the mixed
/// second derivatives of Nyquist modes in the first place, so nothing
/// resolvable is lost.
inline RealField nyquist_free(const RealField& f) {
  Spectrum s = Spectrum::forward(f);
  const GridSpec& g = f.grid();
  const int ny = g.points_per_axis / 2;
  for_each_slot(g, [&](std::size_t flat, const int* idx) {
    for (int a = 0; a < g.axes(); ++a)
      if (idx[a] == ny) {
        s.coef(flat) = 0.0;
        return;
      }
  });
  return s.inverse_real();
}

/// Spectral preconditioner: inverse of a constant-coefficient Laplacian
/// surrogate (quarter Laplacian symbol with the zero mode pinned).  The
/// Nyquist frequencies keep their full symbol so every non-constant mode
/// stays reachable by the Krylov space.
class QuarterLaplacianInverse {
 public:
  explicit QuarterLaplacianInverse(const GridSpec& grid) : grid_(grid) {}

  RealField apply(const RealField& r) const {
    Spectrum s = Spectrum::forward(r);
    const double pi2 = std::numbers::pi * std::numbers::pi;
    for_each_slot(grid_, [&](std::size_t flat, const int* idx) {
      double k2 = 0.0;
      for (int a = 0; a < grid_.axes(); ++a) {
        const double k = grid_.frequency(idx[a]);
        k2 += k * k;
      }
      if (k2 == 0.0)
        s.coef(flat) = 0.0;
      else
        s.coef(flat) /= -pi2 * k2;
    });
    return s.inverse_real();
  }

 private:
  GridSpec grid_;
};

struct KrylovStats {
  bool converged = false;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Right-preconditioned restarted GMRES on real mean-zero fields.
template <class Op, class Prec>
KrylovStats gmres(const Op& apply_A, const Prec& apply_P, const RealField& b, RealField& x,
                  double tol, int max_iter, int restart = 30) {
  const double bnorm = norm2(b);
  KrylovStats stats;
  if (bnorm == 0.0) {
    x = RealField(b.grid());
    stats.converged = true;
    return stats;
  }
  x = RealField(b.grid());  // zero initial guess
  int total_iters = 0;
  RealField residual = b;

  while (total_iters < max_iter) {
    const double beta = norm2(residual);
    stats.relative_residual = beta / bnorm;
    if (stats.relative_residual <= tol) {
      stats.converged = true;
      stats.iterations = total_iters;
      return stats;
    }
    const int m = std::min(restart, max_iter - total_iters);
    std::vector<RealField> V;
    V.reserve(m + 1);
    V.push_back((1.0 / beta) * residual);
    std::vector<std::vector<double>> H(m + 1, std::vector<double>(m, 0.0));
    std::vector<double> cs(m, 0.0), sn(m, 0.0), g(m + 1, 0.0);
    g[0] = beta;
    int j = 0;
    for (; j < m; ++j) {
      RealField w = apply_A(apply_P(V[j]));
      for (int i = 0; i <= j; ++i) {
        H[i][j] = dot(w, V[i]);
        w -= H[i][j] * V[i];
      }
      H[j + 1][j] = norm2(w);
      if (H[j + 1][j] > 0.0) V.push_back((1.0 / H[j + 1][j]) * w);
      // apply accumulated Givens rotations
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * H[i][j] + sn[i] * H[i + 1][j];
        H[i + 1][j] = -sn[i] * H[i][j] + cs[i] * H[i + 1][j];
        H[i][j] = t;
      }
      const double denom = std::hypot(H[j][j], H[j + 1][j]);
      if (denom == 0.0) {
        ++j;
        break;
      }
      cs[j] = H[j][j] / denom;
      sn[j] = H[j + 1][j] / denom;
      H[j][j] = denom;
      H[j + 1][j] = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = cs[j] * g[j];
      ++total_iters;
      if (std::abs(g[j + 1]) / bnorm <= tol) {
        ++j;
        break;
      }
      if (static_cast<int>(V.size()) == j + 1) {
        ++j;
        break;  // happy breakdown
      }
    }
    // back substitution on the j x j system
    std::vector<double> y(j, 0.0);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[i];
      for (int k2 = i + 1; k2 < j; ++k2) s -= H[i][k2] * y[k2];
      y[i] = s / H[i][i];
    }
    RealField u(b.grid());
    for (int i = 0; i < j; ++i) u += y[i] * V[i];
    x += apply_P(u);
    // recompute the true residual for the restart and the final report
    residual = b - apply_A(x);
  }
  stats.iterations = total_iters;
  stats.relative_residual = norm2(residual) / bnorm;
  stats.converged = stats.relative_residual <= tol;
  return stats;
}

/// Solver state at a fixed potential: assembled form, Pfaffian field, and
/// the cached positivity margin.
struct NewtonWorkspace {
  RealField phi;
  HktFormField form;
  RealField pf;
  double min_pf = 0.0;
  double margin = 0.0;  ///< filled lazily (negative = unknown)

  static NewtonWorkspace at(const RealField& phi, const StandardModel& model) {
    NewtonWorkspace ws{mean_zero(phi), HktFormField(phi.grid()), RealField(phi.grid())};
    ws.form = assemble_omega_phi(ws.phi, model);
    ws.pf = pfaffian_field(ws.form);
    ws.min_pf = ws.pf[0];
    for (std::size_t i = 1; i < ws.pf.size(); ++i) ws.min_pf = std::min(ws.min_pf, ws.pf[i]);
    ws.margin = -1.0;
    return ws;
  }

  double ensure_margin() {
    if (margin < 0.0) margin = positivity_check(form).margin;
    return margin;
  }
};

inline RealField log_residual(const RealField& target, const RealField& pf) {
  RealField r(target.grid());
  for (std::size_t i = 0; i < target.size(); ++i)
    r[i] = std::log(target[i]) - std::log(pf[i]);
  return r;
}

/// Working residual of the Newton iteration.  At n = 1 every grid row is
/// resolvable and the log residual is used directly.  For n >= 2 the
/// iteration is the Galerkin system on the Nyquist-free modes (see
/// nyquist_free), so convergence is measured as the linear-scale defect on
/// those rows; the log scale would mix in the unresolvable slots.  Both
/// scales agree near Pf = target = 1 and both collapse together when the
/// data is grid-representable at t = 1.
inline double working_residual_norm(const RealField& target, const RealField& pf) {
  if (target.grid().n == 1) return max_abs(log_residual(target, pf));
  RealField e(target.grid());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = target[i] - pf[i];
  return max_abs(nyquist_free(e));
}

/// One damped Newton update of the workspace toward the given target.
/// Solves the Jacobian system of the Pfaffian route (the log-derivative
/// trace formula scaled by Pf) and backtracks until the log-residual
/// decreases and the positivity margin stays above the configured floor.
inline qma::NewtonDiagnostics newton_step_inplace(NewtonWorkspace& ws, const RealField& target,
                                             const StandardModel& model,
                                             const SolverConfig& cfg) {
  NewtonDiagnostics diag;
  if (ws.min_pf <= 0.0)
    throw line_search_error("newton: Pfaffian not positive at current iterate");

  const double initial_residual = working_residual_norm(target, ws.pf);
  if (initial_residual <= cfg.newton_tol) {
    diag.residual_norm = initial_residual;  // already solved, nothing to do
    return diag;
  }

  RealField difference(target.grid());
  for (std::size_t i = 0; i < difference.size(); ++i) difference[i] = target[i] - ws.pf[i];
  const double discarded = mean(difference);
  diag.discarded_mean = std::abs(discarded);
  if (diag.discarded_mean > 1e-9)
    throw std::runtime_error("newton: residual mean exceeds compatibility bound");
  for (std::size_t i = 0; i < difference.size(); ++i) difference[i] -= discarded;

  const double old_residual = initial_residual;
  const bool restrict_nyquist = target.grid().n >= 2;
  if (restrict_nyquist) difference = nyquist_free(difference);

  const LinearizedOperator jac(ws.form, model, &ws.pf);
  const QuarterLaplacianInverse prec(target.grid());
  RealField psi(target.grid());
  auto apply = [&](const RealField& v) {
    RealField out = mean_zero(jac.apply(v));
    return restrict_nyquist ? nyquist_free(out) : out;
  };
  const KrylovStats krylov =
      gmres(apply, [&](const RealField& v) { return prec.apply(v); }, difference, psi,
            cfg.krylov_tol, cfg.krylov_max_iter);
  if (!krylov.converged)
    throw krylov_error("newton: linear solve stalled (relative residual " +
                       std::to_string(krylov.relative_residual) + ")");
  diag.krylov_iterations = krylov.iterations;

  double s = 1.0;
  for (int attempt = 0; attempt < 40; ++attempt, s *= cfg.damping) {
    NewtonWorkspace trial = NewtonWorkspace::at(ws.phi + s * psi, model);
    if (trial.min_pf <= 0.0) continue;
    const double trial_residual = working_residual_norm(target, trial.pf);
    if (trial_residual >= old_residual) continue;
    if (trial.ensure_margin() < cfg.positivity_margin) continue;
    ws = std::move(trial);
    diag.step_size = s;
    diag.residual_norm = trial_residual;
    return diag;
  }
  throw line_search_error("newton: line search exhausted (continuity step too large)");
}

} // namespace detail

/// Spec-facing single Newton step: returns the updated potential and the
/// achieved residual max-norm.
inline std::pair<RealField, NewtonDiagnostics> newton_step(const RealField& phi,
                                                                   const RealField& target,
                                                                   const SolverConfig& cfg) {
  cfg.validate();
  const StandardModel model(phi.grid().n);
  auto ws = detail::NewtonWorkspace::at(phi, model);
  const auto diag = detail::newton_step_inplace(ws, target, model, cfg);
  return {ws.phi, diag};
}

using StateCallback = std::function<void(const ContinuityState&)>;

/// Continuity-method solve of Pf(Omega_phi) = e^f on the flat torus.
///
/// The path target is t e^f + (1-t); t marches adaptively from 0 with
/// halving on Newton failure and capped doubling on fast success, warm
/// starting each Newton solve from the previous accepted potential.  The
/// working normalization is mean-zero; the report carries the sup-zero
/// copy as well.
inline SolveReport solve(const RealField& f, const SolverConfig& cfg,
                         const RealField* initial_guess = nullptr,
                         const StateCallback& on_state = {}) {
  cfg.validate();
  if (!(f.grid() == cfg.grid))
    throw std::invalid_argument("solve: field grid does not match config grid");
  const StandardModel model(cfg.grid.n);

  SolveReport report;
  report.phi_mean_zero = RealField(cfg.grid);
  report.phi_sup_zero = RealField(cfg.grid);

  const RealField rhs = build_rhs(f, &report.rhs_log_constant);
  report.rhs_was_rescaled = std::abs(report.rhs_log_constant) > 1e-12;

  RealField start = initial_guess ? mean_zero(*initial_guess) : RealField(cfg.grid);
  if (cfg.grid.n >= 2) start = detail::nyquist_free(start);
  auto ws = detail::NewtonWorkspace::at(start, model);
  if (ws.min_pf <= 0.0 || ws.ensure_margin() < cfg.positivity_margin) {
    report.failure_reason = "initial potential violates positivity";
    return report;
  }

  auto record_state = [&](double t, int iters, std::vector<double> residuals) {
    ContinuityState state;
    state.t = t;
    state.phi = ws.phi;
    state.residual_norm = residuals.empty() ? 0.0 : residuals.back();
    state.newton_iters = iters;
    state.newton_residuals = std::move(residuals);
    state.positivity_margin = ws.ensure_margin();
    state.mean_pf = mean(ws.pf);
    const RealField beta = beta_of(ws.phi);
    state.monitor.beta_sup = max_abs(beta);
    state.monitor.eta_sup = max_abs(eta_of(ws.phi));
    state.monitor.theta_sup = [&] {
      const RealField theta = theta_of(ws.phi);
      double sup = theta[0];
      for (std::size_t i = 1; i < theta.size(); ++i) sup = std::max(sup, theta[i]);
      return sup;
    }();
    const RealField beta_cross = beta_gradient_expression(ws.phi);
    report.beta_definition_discrepancy =
        std::max(report.beta_definition_discrepancy, max_abs(beta - beta_cross));
    report.path.push_back(state);
    if (on_state) on_state(report.path.back());
  };

  // Newton inner loop at fixed target; returns residual history, throws on failure.
  auto newton_solve = [&](detail::NewtonWorkspace& work, const RealField& target,
                          std::vector<double>& residuals) {
    residuals.clear();
    for (int iter = 0; iter <= cfg.max_newton; ++iter) {
      const double rn = detail::working_residual_norm(target, work.pf);
      residuals.push_back(rn);
      report.max_discarded_mean =
          std::max(report.max_discarded_mean, std::abs(mean(target) - mean(work.pf)));
      if (rn <= cfg.newton_tol) return;
      if (iter == cfg.max_newton) break;
      detail::newton_step_inplace(work, target, model, cfg);
    }
    throw line_search_error("newton: iteration budget exhausted");
  };

  // trivial shortcut: already solving the final target
  {
    const RealField final_target = continuity_rhs(rhs, 1.0);
    const double rn = detail::working_residual_norm(final_target, ws.pf);
    if (rn <= cfg.newton_tol) {
      record_state(1.0, 0, {rn});
      report.converged = true;
      report.final_residual = rn;
      report.phi_mean_zero = ws.phi;
      report.phi_sup_zero = ws.phi;
      const double sup = *std::max_element(report.phi_sup_zero.values().begin(),
                                           report.phi_sup_zero.values().end());
      for (std::size_t i = 0; i < report.phi_sup_zero.size(); ++i)
        report.phi_sup_zero[i] -= sup;
      return report;
    }
  }

  double t = 0.0;
  double step = cfg.t_step_init;
  while (t < 1.0) {
    const double t_try = std::min(1.0, t + step);
    detail::NewtonWorkspace attempt = ws;
    std::vector<double> residuals;
    bool ok = true;
    std::string why;
    try {
      newton_solve(attempt, continuity_rhs(rhs, t_try), residuals);
    } catch (const line_search_error& e) {
      ok = false;
      why = e.what();
    } catch (const krylov_error& e) {
      ok = false;
      why = e.what();
    }
    if (ok) {
      ws = std::move(attempt);
      t = t_try;
      const int iters = static_cast<int>(residuals.size()) - 1;
      record_state(t, iters, std::move(residuals));
      if (iters <= 5) step = std::min(step * 2.0, 1.0);
    } else {
      step *= 0.5;
      if (step < cfg.t_step_min) {
        report.failure_reason = "continuity step underflow at t = " + std::to_string(t) +
                                " (" + why + ")";
        report.final_residual =
            report.path.empty() ? std::numeric_limits<double>::infinity()
                                : report.path.back().residual_norm;
        return report;
      }
    }
  }

  report.converged = true;
  report.final_residual = report.path.back().residual_norm;
  report.phi_mean_zero = ws.phi;
  report.phi_sup_zero = ws.phi;
  const double sup = *std::max_element(report.phi_sup_zero.values().begin(),
                                       report.phi_sup_zero.values().end());
  for (std::size_t i = 0; i < report.phi_sup_zero.size(); ++i) report.phi_sup_zero[i] -= sup;
  return report;
}

} // namespace qma
