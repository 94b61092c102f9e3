#pragma once

#include <agpsto/core.hpp>

#include <functional>
#include <optional>

namespace agpsto {

struct SmoothProblem {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;
};

enum class StepRule { Accelerated, Leapfrog };

struct AgdConfig {
  double theta1 = 2.0;
  double theta2 = 0.25;
  double c_low = 1.25;
  double c_up = 0.15;
  int n_ag = 200;
  double f_tol = 1e-5;
  double step_tol = 1e-4;
  double grad_tol = 0.0;  // optional extra stop on the gradient norm, off when 0
  double phi_tol = -0.1;
  double l_tol = 1e2;
  int max_reestimates = 25;
  bool deterministic = false;
  bool acc_break = true;
  StepRule rule = StepRule::Accelerated;

  // Margin in the step-size bound; positive is required.
  double feasibility() const { return -theta2 * theta2 - theta2 + theta1 - 1.0; }

  void validate() const {
    require(theta1 >= 1.0, "AgdConfig: theta1 must be >= 1");
    require(theta2 >= 0.0, "AgdConfig: theta2 must be >= 0");
    require(feasibility() > 0.0, "AgdConfig: -theta2^2 - theta2 + theta1 - 1 must be positive");
    require(c_up > 0.0 && c_low > c_up, "AgdConfig: need c_low > c_up > 0");
    require(n_ag >= 1, "AgdConfig: n_ag must be positive");
    require(f_tol >= 0.0 && step_tol >= 0.0 && grad_tol >= 0.0, "AgdConfig: tolerances must be non-negative");
    require(l_tol > 1.0, "AgdConfig: l_tol must exceed 1");
    require(max_reestimates >= 1, "AgdConfig: max_reestimates must be positive");
  }
};

// Step-size schedule.
inline double agd_alpha(int k) { return 2.0 / (k + 1.0); }
inline double agd_beta(double lip, const AgdConfig& cfg) { return 1.0 / (cfg.theta1 * lip); }

inline double agd_gamma(int k) { return 2.0 / (static_cast<double>(k) * (k + 1.0)); }

// Gamma_1 = 1, Gamma_k = (1 - alpha_k) Gamma_{k-1}.
inline std::vector<double> agd_gamma_recurrence(int n) {
  std::vector<double> g(static_cast<std::size_t>(n + 1), 0.0);
  if (n >= 1) g[1] = 1.0;
  for (int k = 2; k <= n; ++k) g[static_cast<std::size_t>(k)] = (1.0 - agd_alpha(k)) * g[static_cast<std::size_t>(k - 1)];
  return g;
}

// sum_{tau=k}^{n} Gamma_tau, telescoped.
inline double agd_gamma_sum(int k, int n) { return 2.0 * (1.0 / k - 1.0 / (n + 1.0)); }

inline double agd_c_k(int k, int n, double lip, double lambda, double beta) {
  const double a = agd_alpha(k);
  const double d = lambda - beta;
  return 1.0 - lip * lambda - lip * d * d / (2.0 * agd_gamma(k) * a * lambda) * agd_gamma_sum(k, n);
}

// Upper bound on min_k |grad|^2 after n accelerated iterations.
inline double agd_gradient_bound(double lip, double f0_minus_fstar, int n, const AgdConfig& cfg) {
  return cfg.theta1 * cfg.theta1 * lip * f0_minus_fstar / (n * cfg.feasibility());
}

// Leapfrog rule: F_n - F* <= 2 theta1 L |x0 - x*|^2 / (n (n+1)).
inline double leapfrog_value_bound(double lip, double dist2, int n, const AgdConfig& cfg) {
  return 2.0 * cfg.theta1 * lip * dist2 / (static_cast<double>(n) * (n + 1.0));
}

inline double agd_lambda(int k, double beta, const AgdConfig& cfg, Rng& rng) {
  const double a = agd_alpha(k);
  if (cfg.rule == StepRule::Leapfrog) return beta / a;
  const double hi = (1.0 + cfg.theta2 * a) * beta;
  if (cfg.deterministic) return 0.5 * (beta + hi);
  return uniform(rng, beta, hi);
}

enum class BreakDecision { Continue, RestartLow, RestartUp };

// Effective curvature of the step must stay inside [c_up L, c_low L]:
// change = F_new - F_prev is compared with <g_prev, step> + (c L / 2)|step|^2.
inline BreakDecision acc_break(double f_prev, double f_new, const Vec& g_prev, const Vec& step, double lip,
                               const AgdConfig& cfg) {
  const double lin = g_prev.dot(step);
  const double s2 = step.squaredNorm();
  const double change = f_new - f_prev;
  if (change > lin + 0.5 * cfg.c_low * lip * s2) return BreakDecision::RestartLow;
  if (change < lin + 0.5 * cfg.c_up * lip * s2) return BreakDecision::RestartUp;
  return BreakDecision::Continue;
}

enum class AgdStop { Converged, Stationary, RestartLow, RestartUp, Budget };

inline const char* to_string(AgdStop s) {
  switch (s) {
    case AgdStop::Converged: return "converged";
    case AgdStop::Stationary: return "stationary";
    case AgdStop::RestartLow: return "restart_low";
    case AgdStop::RestartUp: return "restart_up";
    case AgdStop::Budget: return "budget";
  }
  return "?";
}

struct AgdReport {
  Vec x;  // returned md iterate
  double f = 0.0;
  Vec g;
  int iterations = 0;
  AgdStop stop = AgdStop::Budget;
  double lipschitz = 0.0;
  // Last tested md step (prev -> new), kept for re-estimation.
  bool has_step = false;
  Vec x_prev, g_prev, x_new, g_new;
  double f_prev = 0.0, f_new = 0.0;
  std::vector<double> f_trace, gnorm_trace;
};

// Accelerated gradient descent with fixed lip. With cfg.acc_break the run
// stops at the first md step whose curvature leaves the acceptance band.
inline AgdReport agd_run(const SmoothProblem& prob, const Vec& x0, double lip, const AgdConfig& cfg, Rng& rng) {
  require(lip > 0.0 && std::isfinite(lip), "agd_run: Lipschitz estimate must be positive");
  cfg.validate();
  AgdReport rep;
  rep.lipschitz = lip;
  Vec x = x0, x_ag = x0;
  Vec md_prev, g_prev;
  double f_prev = 0.0;
  const double beta = agd_beta(lip, cfg);

  for (int k = 1; k <= cfg.n_ag; ++k) {
    const double a = agd_alpha(k);
    const Vec md = (1.0 - a) * x_ag + a * x;
    const double f = prob.value(md);
    const Vec g = prob.gradient(md);
    require_finite(f, "cost in agd_run");
    if (!g.allFinite()) throw NumericalError("non-finite gradient in agd_run");
    rep.iterations = k;
    rep.f_trace.push_back(f);
    rep.gnorm_trace.push_back(g.norm());

    if (k > 1) {
      const Vec step = md - md_prev;
      rep.has_step = true;
      rep.x_prev = md_prev;
      rep.g_prev = g_prev;
      rep.f_prev = f_prev;
      rep.x_new = md;
      rep.g_new = g;
      rep.f_new = f;
      if (cfg.acc_break && step.squaredNorm() > 0.0) {
        const BreakDecision d = acc_break(f_prev, f, g_prev, step, lip, cfg);
        if (d == BreakDecision::RestartLow) {
          // reject the step
          rep.x = md_prev;
          rep.f = f_prev;
          rep.g = g_prev;
          rep.stop = AgdStop::RestartLow;
          return rep;
        }
        if (d == BreakDecision::RestartUp) {
          rep.x = md;
          rep.f = f;
          rep.g = g;
          rep.stop = AgdStop::RestartUp;
          return rep;
        }
      }
      if (std::abs(f - f_prev) < cfg.f_tol * (1.0 + std::abs(f)) || step.norm() < cfg.step_tol) {
        rep.x = md;
        rep.f = f;
        rep.g = g;
        rep.stop = AgdStop::Converged;
        return rep;
      }
    }
    const double gn = g.norm();
    if (gn == 0.0 || (cfg.grad_tol > 0.0 && gn < cfg.grad_tol)) {
      rep.x = md;
      rep.f = f;
      rep.g = g;
      rep.stop = AgdStop::Stationary;
      return rep;
    }
    const double lambda = agd_lambda(k, beta, cfg, rng);
    x = x - lambda * g;
    x_ag = md - beta * g;
    md_prev = md;
    g_prev = g;
    f_prev = f;
  }
  rep.x = md_prev;
  rep.f = f_prev;
  rep.g = g_prev;
  rep.stop = AgdStop::Budget;
  return rep;
}

// Sufficient-decrease weight of the restarted first step at iteration k.
inline double reestimate_varpi(int k, double gnorm2, const AgdConfig& cfg) {
  const double r = (2.0 * cfg.theta2 + k + 1.0) / (cfg.theta1 * (k + 1.0));
  return r * (1.0 - r - cfg.theta2 * cfg.theta2 / cfg.theta1) * gnorm2;
}

// phi(L) = F(x - (1+theta2)/(theta1 L) g) - F(x).
inline double reestimate_phi(const SmoothProblem& prob, const Vec& x, double fx, const Vec& g, double lip,
                             const AgdConfig& cfg) {
  const double c = (1.0 + cfg.theta2) / cfg.theta1;
  return prob.value(x - (c / lip) * g) - fx;
}

// Slope of phi as 1/L -> 0, by a one-sided difference.
inline double reestimate_phi_slope(const SmoothProblem& prob, const Vec& x, double fx, const Vec& g,
                                   const AgdConfig& cfg) {
  const double h = 1e-8 * (1.0 + cfg.theta2) / cfg.theta1;
  return (prob.value(x - h * g) - fx) / h;
}

// One quadratic-model update of L; the boundary rule is used when the slope
// is not negative. Non-positive results double L.
struct LowUpdate {
  double lip = 0.0;
  bool boundary_used = false;
  bool fallback_used = false;
};

inline LowUpdate reestimate_low_step(double lip, double phi, double phi_slope, double varpi, double boundary_lip,
                                     const AgdConfig& cfg) {
  const double c = (1.0 + cfg.theta2) / cfg.theta1;
  LowUpdate u;
  double next;
  if (phi_slope >= 0.0) {
    u.boundary_used = true;
    next = boundary_lip;
  } else {
    next = lip * (lip * phi - c * phi_slope) / (-0.5 * (c * phi_slope + varpi));
  }
  if (!(next > 0.0) || !std::isfinite(next)) {
    u.fallback_used = true;
    next = 2.0 * lip;
  }
  u.lip = next;
  return u;
}

// L that puts the observed step exactly on the low acceptance boundary.
inline double boundary_lipschitz(double change, const Vec& g_prev, const Vec& step, const AgdConfig& cfg) {
  const double s2 = step.squaredNorm();
  if (s2 <= 0.0) return 0.0;
  return (change - g_prev.dot(step)) / (0.5 * cfg.c_low * s2);
}

struct UpBounds {
  double lower = 0.0;
  double upper = 0.0;
};

inline UpBounds reestimate_up_bounds(const Vec& g_prev, const Vec& g_new, const Vec& step, double change,
                                     const AgdConfig& cfg) {
  const double sn = step.norm();
  require(sn > 0.0, "reestimate_up: zero step");
  UpBounds b;
  b.upper = (g_new - g_prev).norm() / (cfg.c_up * sn);
  b.lower = (change - g_prev.dot(step)) / (0.5 * cfg.c_low * sn * sn);
  return b;
}

// Draw from [lower, upper] until the stored step passes the up test.
inline double reestimate_up(const Vec& g_prev, const Vec& g_new, const Vec& step, double f_prev, double f_new,
                            double lip_prev, const AgdConfig& cfg, Rng& rng, bool* degenerate = nullptr) {
  const UpBounds b = reestimate_up_bounds(g_prev, g_new, step, f_new - f_prev, cfg);
  if (degenerate) *degenerate = false;
  if (!(b.upper > 0.0)) {
    if (degenerate) *degenerate = true;
    return lip_prev;
  }
  if (!(b.lower > 0.0) || b.lower >= b.upper) return b.upper;
  double lip = b.upper;
  for (int i = 0; i < cfg.max_reestimates; ++i) {
    lip = cfg.deterministic ? 0.5 * (b.lower + b.upper) : uniform(rng, b.lower, b.upper);
    if (acc_break(f_prev, f_new, g_prev, step, lip, cfg) != BreakDecision::RestartUp) return lip;
  }
  return b.lower;
}

inline bool min_approach(double phi_slope, double ared, double lip_first, double lip_current, int n_estimates,
                         const AgdConfig& cfg) {
  if (phi_slope >= std::abs(ared) * cfg.phi_tol) return true;
  return n_estimates > 1 && lip_current >= lip_first * cfg.l_tol;
}

// Per-LIter Lipschitz bookkeeping: picks L for the next AGD run from the way
// the previous one ended and reports local-minimum detection.
struct LipschitzChoice {
  double lip = 1.0;
  bool min_approach = false;
  int estimates = 0;
  bool budget_exhausted = false;
  bool warning = false;
};

inline double initial_lipschitz(const Vec& g) {
  const double n = g.norm();
  return n > 0.0 && std::isfinite(n) ? n : 1.0;
}

inline LipschitzChoice choose_lipschitz(const SmoothProblem& prob, const AgdReport* last, const Vec& x, double fx,
                                        const Vec& g, const AgdConfig& cfg, Rng& rng) {
  LipschitzChoice out;
  out.lip = initial_lipschitz(g);
  if (last == nullptr || !last->has_step ||
      (last->stop != AgdStop::RestartLow && last->stop != AgdStop::RestartUp)) {
    // fresh start: only the slope test applies
    out.min_approach = reestimate_phi_slope(prob, x, fx, g, cfg) >= 0.0;
    return out;
  }

  const Vec step = last->x_new - last->x_prev;
  const double change = last->f_new - last->f_prev;
  const double ared = -change;
  const double slope = g.squaredNorm() > 0.0 ? reestimate_phi_slope(prob, x, fx, g, cfg) : 0.0;

  if (last->stop == AgdStop::RestartUp) {
    bool degenerate = false;
    out.lip = reestimate_up(last->g_prev, last->g_new, step, last->f_prev, last->f_new, last->lipschitz, cfg, rng,
                            &degenerate);
    out.warning = degenerate;
    out.estimates = 1;
    out.min_approach = min_approach(slope, ared, out.lip, out.lip, 1, cfg);
    return out;
  }

  const double varpi = reestimate_varpi(1, g.squaredNorm(), cfg);
  const double c = (1.0 + cfg.theta2) / cfg.theta1;
  const double bnd = boundary_lipschitz(change, last->g_prev, step, cfg);
  double lip = out.lip;
  double lip_first = 0.0;
  bool accepted = false;
  for (int j = 1; j <= cfg.max_reestimates; ++j) {
    if (slope < 0.0 || j == 1) {
      const double phi = slope < 0.0 ? reestimate_phi(prob, x, fx, g, lip, cfg) : 0.0;
      const LowUpdate u = reestimate_low_step(lip, phi, slope, varpi, bnd, cfg);
      lip = u.lip;
      out.warning = out.warning || u.fallback_used;
    } else {
      // the boundary rule is one-shot; keep expanding from it
      lip *= 2.0;
    }
    out.estimates = j;
    if (j == 1) lip_first = lip;
    // trial step from x with the largest admissible first step size
    const Vec trial = -(c / lip) * g;
    const double f_trial = prob.value(x + trial);
    if (std::isfinite(f_trial) && acc_break(fx, f_trial, g, trial, lip, cfg) != BreakDecision::RestartLow) {
      accepted = true;
      break;
    }
  }
  out.lip = lip;
  out.budget_exhausted = !accepted;
  out.min_approach = !accepted || min_approach(slope, ared, lip_first, lip, out.estimates, cfg);
  return out;
}

}  // namespace agpsto
