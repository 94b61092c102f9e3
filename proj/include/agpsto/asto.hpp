#pragma once

#include <agpsto/agd.hpp>
#include <agpsto/core.hpp>
#include <agpsto/objective.hpp>
#include <agpsto/trajgp.hpp>

#include <algorithm>
#include <functional>
#include <numeric>

namespace agpsto {

enum class PolicyMode { AMA, EMA, QAdam };

inline const char* to_string(PolicyMode m) {
  switch (m) {
    case PolicyMode::AMA: return "ama";
    case PolicyMode::EMA: return "ema";
    case PolicyMode::QAdam: return "qadam";
  }
  return "?";
}

struct AstoConfig {
  int k_samples = 12;
  int m_star = 6;
  double h_p = 10.0;
  double l_r = 10.0;
  PolicyMode mode = PolicyMode::AMA;
  double alpha_mu = 0.3;
  double alpha_kappa = 0.3;
  double k_upper_tol = 0.0;  // 0 picks |hi - lo|^2 / 1.25 from the sampling box
  double k_lower_tol = 1e-2;
  int n_asto_min = 5;
  int n_asto_max = 15;
  double cf_tol = 0.0;
  double k_eps_scale = 0.25;  // return-conditioning noise as a multiple of the sampled prior block
  bool importance = true;     // density ratio on reused samples
  bool deterministic = false;
  bool allow_unit_alpha = false;  // EMA with alpha = 1, tests only

  void validate() const {
    require(k_samples >= 2, "AstoConfig: need at least two samples");
    require(m_star > 0 && m_star < k_samples, "AstoConfig: need 0 < m_star < k_samples");
    require(h_p >= 0.0, "AstoConfig: h_p must be non-negative");
    require(l_r > 0.0, "AstoConfig: l_r must be positive");
    require(k_lower_tol >= 0.0, "AstoConfig: k_lower_tol must be non-negative");
    require(k_upper_tol <= 0.0 || k_lower_tol < k_upper_tol, "AstoConfig: need k_lower_tol < k_upper_tol");
    require(n_asto_min >= 1 && n_asto_max >= n_asto_min, "AstoConfig: bad N_asto range");
    require(cf_tol >= 0.0, "AstoConfig: cf_tol must be non-negative");
    require(k_eps_scale >= 0.0, "AstoConfig: k_eps_scale must be non-negative");
    if (mode == PolicyMode::EMA) {
      const double hi = allow_unit_alpha ? 1.0 : std::nextafter(1.0, 0.0);
      require(alpha_mu > 0.0 && alpha_mu <= hi && alpha_kappa > 0.0 && alpha_kappa <= hi,
              "AstoConfig: EMA rates must lie in (0,1)");
    }
    if (mode == PolicyMode::QAdam) {
      const double hi = (3.0 - std::sqrt(5.0)) / 2.0;
      require(alpha_mu > 0.0 && alpha_mu < hi && alpha_kappa > 0.0 && alpha_kappa < hi,
              "AstoConfig: qAdam rates must lie in (0, (3 - sqrt 5)/2)");
    }
  }
};

struct Policy {
  Vec mu;
  Mat cov;
};

// md / ag / base iterates of the policy learner; n is the next AstoIter index.
struct PolicyIterates {
  Policy md, ag, base;
  int n = 1;
};

inline PolicyIterates init_policy(const Vec& mu0, const Mat& k0) {
  PolicyIterates s;
  s.md = s.ag = s.base = Policy{mu0, k0};
  return s;
}

struct StepCoeffs {
  double alpha = 0.0, beta = 0.0, lambda = 0.0;
};

// Per-mode schedule for the mean (kappa = false) or covariance (kappa = true).
inline StepCoeffs policy_coeffs(PolicyMode mode, int n, bool kappa, const AstoConfig& cfg, Rng& rng) {
  StepCoeffs c;
  switch (mode) {
    case PolicyMode::AMA: {
      c.alpha = agd_alpha(n);
      c.beta = 1.0 / cfg.l_r;
      c.lambda = cfg.deterministic ? c.beta : c.beta * uniform(rng, 1.0, 1.0 + c.alpha / 4.0);
      break;
    }
    case PolicyMode::EMA: {
      const double a = kappa ? cfg.alpha_kappa : cfg.alpha_mu;
      c.alpha = c.beta = c.lambda = a;
      break;
    }
    case PolicyMode::QAdam: {
      const double a = kappa ? cfg.alpha_kappa : cfg.alpha_mu;
      c.alpha = a;
      c.beta = std::pow(1.0 - a, n);
      c.lambda = 1.0 + c.beta;
      break;
    }
  }
  return c;
}

// One learner step with quasi-gradients mu_hat - mu_md and k_hat - k_md.
inline void policy_step(PolicyIterates& s, const Vec& mu_hat, const Mat& k_hat, const StepCoeffs& cm,
                        const StepCoeffs& ck) {
  const Vec dmu = mu_hat - s.md.mu;
  const Mat dk = k_hat - s.md.cov;
  s.ag.mu = s.md.mu + cm.beta * dmu;
  s.ag.cov = s.md.cov + ck.beta * dk;
  s.base.mu = s.base.mu + cm.lambda * dmu;
  s.base.cov = s.base.cov + ck.lambda * dk;
  s.md.mu = (1.0 - cm.alpha) * s.ag.mu + cm.alpha * s.base.mu;
  s.md.cov = detail::symmetrize((1.0 - ck.alpha) * s.ag.cov + ck.alpha * s.base.cov);
  ++s.n;
}

inline void policy_update(PolicyIterates& s, const Vec& mu_hat, const Mat& k_hat, const AstoConfig& cfg, Rng& rng) {
  const StepCoeffs cm = policy_coeffs(cfg.mode, s.n, false, cfg, rng);
  const StepCoeffs ck = cfg.mode == PolicyMode::AMA ? cm : policy_coeffs(cfg.mode, s.n, true, cfg, rng);
  policy_step(s, mu_hat, k_hat, cm, ck);
}

// E-step: p_k proportional to exp(-h_p (F_k - min F)/(max F - min F)) times the
// density ratio in log_ratio (empty means all samples are current-policy draws).
inline Vec sample_weights(const std::vector<double>& costs, double h_p, const std::vector<double>& log_ratio = {}) {
  require(costs.size() >= 2, "weights: need at least two samples");
  require(log_ratio.empty() || log_ratio.size() == costs.size(), "weights: log-ratio size mismatch");
  for (double c : costs) require_finite(c, "sample cost");
  const auto [lo_it, hi_it] = std::minmax_element(costs.begin(), costs.end());
  const double lo = *lo_it, span = *hi_it - *lo_it;
  const int k = static_cast<int>(costs.size());
  Vec logw(k);
  for (int i = 0; i < k; ++i) {
    const double e = span > 0.0 ? h_p * (costs[static_cast<std::size_t>(i)] - lo) / span : 0.0;
    logw(i) = -e + (log_ratio.empty() ? 0.0 : log_ratio[static_cast<std::size_t>(i)]);
  }
  const Vec w = (logw.array() - logw.maxCoeff()).exp();
  return w / w.sum();
}

// Indices of the m lowest costs, ties by index.
inline std::vector<int> select_important(const std::vector<double>& costs, int m) {
  std::vector<int> idx(costs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return costs[static_cast<std::size_t>(a)] < costs[static_cast<std::size_t>(b)];
  });
  idx.resize(static_cast<std::size_t>(std::min<int>(m, static_cast<int>(idx.size()))));
  return idx;
}

struct EmResult {
  Vec mu;
  Mat cov;
  bool degenerate = false;
};

// M-step over the given samples (columns) with renormalized weights.
inline EmResult em_policy(const Mat& samples, const Vec& weights) {
  require(samples.cols() == weights.size() && samples.cols() >= 1, "em_policy: size mismatch");
  require(weights.minCoeff() >= 0.0 && weights.sum() > 0.0, "em_policy: weights must be non-negative");
  const Vec w = weights / weights.sum();
  EmResult r;
  r.mu = samples * w;
  const Mat c = samples.colwise() - r.mu;
  r.cov = detail::symmetrize(c * w.asDiagonal() * c.transpose());
  int distinct = 0;
  for (int i = 0; i < samples.cols(); ++i)
    if (w(i) > 0.0 && (samples.col(i) - samples.col(0)).norm() > 0.0) ++distinct;
  r.degenerate = distinct == 0;
  return r;
}

// Symmetric square-root factor with negative eigenvalues clipped to zero.
struct CovFactor {
  Mat factor;
  Vec eig;
  bool clipped = false;
};

inline CovFactor factor_covariance(const Mat& k) {
  Eigen::SelfAdjointEigenSolver<Mat> es(detail::symmetrize(k));
  if (es.info() != Eigen::Success) throw NumericalError("eigen decomposition of sampling covariance failed");
  CovFactor f;
  f.eig = es.eigenvalues();
  f.clipped = f.eig.minCoeff() < -1e-12 * std::max(1.0, f.eig.cwiseAbs().maxCoeff());
  f.factor = es.eigenvectors() * f.eig.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return f;
}

struct SampleBox {
  Vec lo, hi;
  double upper_tol(const AstoConfig& cfg) const {
    return cfg.k_upper_tol > 0.0 ? cfg.k_upper_tol : (hi - lo).squaredNorm() / 1.25;
  }
};

inline bool uses_uniform(const Policy& p, const SampleBox& box, const AstoConfig& cfg) {
  return p.cov.norm() >= box.upper_tol(cfg);
}

// Log density under the sampling law of a policy; factorized once.
class PolicyDensity {
 public:
  PolicyDensity(const Policy& p, const SampleBox& box, const AstoConfig& cfg) : mu_(p.mu) {
    uniform_ = uses_uniform(p, box, cfg);
    if (uniform_) {
      const_ = -(box.hi - box.lo).array().log().sum();
      return;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(detail::symmetrize(p.cov));
    const double floor = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    ev_ = es.eigenvalues().cwiseMax(floor);
    vecs_ = es.eigenvectors();
    const_ = -0.5 * (ev_.array().log().sum() + static_cast<double>(mu_.size()) * std::log(2.0 * M_PI));
  }

  double operator()(const Vec& z) const {
    if (uniform_) return const_;
    const Vec y = vecs_.transpose() * (z - mu_);
    return const_ - 0.5 * (y.array().square() / ev_.array()).sum();
  }

 private:
  bool uniform_ = false;
  Vec mu_, ev_;
  Mat vecs_;
  double const_ = 0.0;
};

inline double policy_log_density(const Policy& p, const SampleBox& box, const AstoConfig& cfg, const Vec& z) {
  return PolicyDensity(p, box, cfg)(z);
}

struct SampleBatch {
  std::vector<Vec> samples;
  bool uniform = false;
  bool clipped = false;
};

// Sample i uses its own stream derived from seed, so batches are reproducible
// regardless of evaluation order.
inline SampleBatch sample_batch(const Policy& p, int count, const SampleBox& box, const AstoConfig& cfg,
                                std::uint64_t seed) {
  require(box.lo.size() == p.mu.size() && box.hi.size() == p.mu.size(), "sample_batch: box size mismatch");
  SampleBatch b;
  b.uniform = uses_uniform(p, box, cfg);
  CovFactor f;
  if (!b.uniform) {
    f = factor_covariance(p.cov);
    b.clipped = f.clipped;
  }
  const int n = static_cast<int>(p.mu.size());
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    Vec z(n);
    if (b.uniform) {
      for (int j = 0; j < n; ++j) z(j) = uniform(rng, box.lo(j), box.hi(j));
    } else {
      Vec xi(n);
      for (int j = 0; j < n; ++j) xi(j) = standard_normal(rng);
      z = p.mu + f.factor * xi;
    }
    b.samples.push_back(z.cwiseMax(box.lo).cwiseMin(box.hi));
  }
  return b;
}

enum class AstoExit { CollisionFree, FeasibleMean, Budget, CovarianceSmall, CovarianceIndefinite };

inline const char* to_string(AstoExit e) {
  switch (e) {
    case AstoExit::CollisionFree: return "collision_free";
    case AstoExit::FeasibleMean: return "feasible_mean";
    case AstoExit::Budget: return "budget";
    case AstoExit::CovarianceSmall: return "covariance_small";
    case AstoExit::CovarianceIndefinite: return "covariance_indefinite";
  }
  return "?";
}

struct AstoReport {
  AstoExit exit = AstoExit::Budget;
  bool accepted = false;
  int rounds = 0;
  int evaluations = 0;
  int n_asto = 0;
  int uniform_rounds = 0;
  int clip_warnings = 0;
  double f0 = 0.0;
  double f_best = 0.0;
  std::vector<double> best_trace;  // lowest cost seen per round
};

// Sampling problem over a flat coordinate vector.
struct AstoProblem {
  std::function<double(const Vec&)> cost;
  std::function<bool(const Vec&)> feasible;
  SampleBox box;
};

struct AstoOutcome {
  Vec z;
  double f = 0.0;
  AstoReport report;
  PolicyIterates policy;
};

inline AstoOutcome asto_optimize(const AstoProblem& prob, const Vec& mu0, const Mat& k0, const AstoConfig& cfg,
                                 Rng& rng) {
  cfg.validate();
  require(k0.rows() == mu0.size() && k0.cols() == mu0.size(), "asto: covariance size mismatch");
  AstoOutcome out;
  AstoReport& rep = out.report;
  rep.n_asto = cfg.n_asto_min == cfg.n_asto_max ? cfg.n_asto_min : uniform_int(rng, cfg.n_asto_min, cfg.n_asto_max);
  const std::uint64_t base_seed = rng();

  auto eval = [&](const Vec& z) {
    const double f = prob.cost(z);
    ++rep.evaluations;
    if (!std::isfinite(f)) throw NumericalError("non-finite cost during ASTO");
    return f;
  };
  const double f0 = eval(mu0);
  rep.f0 = f0;
  rep.f_best = f0;
  const double accept_level = f0 + std::abs(f0) * cfg.cf_tol;
  auto finish = [&](const Vec& z, double f, AstoExit e, bool accept) {
    rep.exit = e;
    rep.accepted = accept;
    out.z = accept ? z : mu0;
    out.f = accept ? f : f0;
    rep.f_best = out.f;
    return out;
  };

  PolicyIterates& s = out.policy;
  s = init_policy(mu0, k0);
  std::vector<Vec> kept;
  std::vector<double> kept_cost, kept_logq;

  for (int n = 1; n <= rep.n_asto; ++n) {
    rep.rounds = n;
    // current mean first, so a feasible policy returns without sampling
    const double f_md = n == 1 ? f0 : eval(s.md.mu);
    if (prob.feasible(s.md.mu) && f_md <= accept_level) return finish(s.md.mu, f_md, AstoExit::FeasibleMean, true);

    std::vector<Vec> pool = kept;
    std::vector<double> costs = kept_cost, logq = kept_logq;
    const int fresh = n == 1 ? cfg.k_samples : cfg.k_samples - static_cast<int>(kept.size());
    const SampleBatch batch = sample_batch(s.md, fresh, prob.box, cfg, derive_seed(base_seed, static_cast<std::uint64_t>(n)));
    if (batch.uniform) ++rep.uniform_rounds;
    if (batch.clipped) ++rep.clip_warnings;
    double round_best = f_md;
    const PolicyDensity q_gen(s.md, prob.box, cfg);
    for (const Vec& z : batch.samples) {
      const double f = eval(z);
      round_best = std::min(round_best, f);
      if (prob.feasible(z) && f <= accept_level) return finish(z, f, AstoExit::CollisionFree, true);
      pool.push_back(z);
      costs.push_back(f);
      logq.push_back(cfg.importance ? q_gen(z) : 0.0);
    }
    rep.best_trace.push_back(round_best);

    std::vector<double> ratio;
    if (cfg.importance) {
      ratio.resize(pool.size());
      for (std::size_t i = 0; i < pool.size(); ++i) {
        const double r = q_gen(pool[i]) - logq[i];
        ratio[i] = std::clamp(r, -30.0, 30.0);
      }
    }
    const Vec p = sample_weights(costs, cfg.h_p, ratio);
    const std::vector<int> sel = select_important(costs, cfg.m_star);
    Mat zs(mu0.size(), static_cast<int>(sel.size()));
    Vec ws(static_cast<int>(sel.size()));
    kept.clear();
    kept_cost.clear();
    kept_logq.clear();
    for (std::size_t i = 0; i < sel.size(); ++i) {
      const auto j = static_cast<std::size_t>(sel[i]);
      zs.col(static_cast<int>(i)) = pool[j];
      ws(static_cast<int>(i)) = p(sel[i]);
      kept.push_back(pool[j]);
      kept_cost.push_back(costs[j]);
      kept_logq.push_back(logq[j]);
    }
    if (ws.sum() <= 0.0) ws.setOnes();
    const EmResult em = em_policy(zs, ws);
    policy_update(s, em.mu, em.cov, cfg, rng);

    const double kn = s.md.cov.norm();
    const double min_eig = Eigen::SelfAdjointEigenSolver<Mat>(s.md.cov, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    AstoExit exit = AstoExit::Budget;
    bool stop = n >= rep.n_asto;
    if (kn <= cfg.k_lower_tol) {
      exit = AstoExit::CovarianceSmall;
      stop = true;
    } else if (min_eig <= 0.0) {
      exit = AstoExit::CovarianceIndefinite;
      stop = true;
    }
    if (stop) {
      const double f_new = eval(s.md.mu);
      Vec best = s.md.mu;
      double fb = f_new;
      for (std::size_t i = 0; i < pool.size(); ++i)
        if (costs[i] < fb) {
          fb = costs[i];
          best = pool[i];
        }
      return finish(best, fb, exit, fb <= accept_level);
    }
  }
  return finish(mu0, f0, AstoExit::Budget, false);
}

// Interior-waypoint positions as flat sampling coordinates.
inline std::vector<int> interior_position_indices(int n_states, int dof) {
  std::vector<int> idx;
  for (int t = 1; t + 1 < n_states; ++t)
    for (int j = 0; j < dof; ++j) idx.push_back(t * 2 * dof + j);
  return idx;
}

inline Mat index_selector(int dim, const std::vector<int>& idx) {
  Mat c = Mat::Zero(static_cast<int>(idx.size()), dim);
  for (std::size_t i = 0; i < idx.size(); ++i) c(static_cast<int>(i), idx[i]) = 1.0;
  return c;
}

// Writes sampled positions into a copy of base and rebuilds interior
// velocities by central differences.
inline Vec positions_to_theta(const Trajectory& base, const Vec& z) {
  Trajectory tr = base;
  const int n = tr.size(), d = tr.dof;
  require(z.size() == (n - 2) * d, "positions_to_theta: size mismatch");
  for (int t = 1; t + 1 < n; ++t) tr.position(t) = z.segment((t - 1) * d, d);
  for (int t = 1; t + 1 < n; ++t)
    tr.velocity(t) = (tr.position(t + 1) - tr.position(t - 1)) / (tr.times(t + 1) - tr.times(t - 1));
  return tr.theta;
}

// Conditions gp0 on the interior positions of theta_star with noise k_eps.
inline GPModel modify_gp_on_return(const GPModel& gp0, const Vec& theta_star, const Mat& k_eps) {
  require(theta_star.size() == gp0.dim(), "modify_gp_on_return: dimension mismatch");
  const int n = static_cast<int>(gp0.times.size());
  const std::vector<int> idx = interior_position_indices(n, gp0.dof);
  if (idx.empty()) return gp0;
  ConditioningSpec spec;
  spec.C = index_selector(gp0.dim(), idx);
  spec.obs = spec.C * theta_star;
  require(k_eps.rows() == spec.C.rows() && k_eps.cols() == spec.C.rows(), "modify_gp_on_return: noise size mismatch");
  spec.noise = k_eps;
  return condition(gp0, spec);
}

struct AstoTrajResult {
  Vec theta;
  GPModel gp;
  AstoReport report;
};

// Samples interior positions around theta0 with the objective's prior
// covariance; feasibility is an unweighted obstacle cost at most g_tol.
inline AstoTrajResult asto_run(const Objective& obj, const Vec& theta0, const AstoConfig& cfg, double g_tol, Rng& rng) {
  const Trajectory base = obj.trajectory(theta0);
  const int n = base.size(), d = base.dof;
  AstoTrajResult res;
  res.theta = theta0;
  res.gp = obj.gp();
  if (n < 3) return res;
  const std::vector<int> idx = interior_position_indices(n, d);
  const Mat c = index_selector(obj.dim(), idx);
  const Mat k0 = detail::symmetrize(c * obj.gp().cov * c.transpose());
  const Vec mu0 = c * theta0;

  const RobotModel& robot = obj.world().robot;
  AstoProblem prob;
  prob.box.lo.resize(mu0.size());
  prob.box.hi.resize(mu0.size());
  for (int t = 0; t < n - 2; ++t) {
    prob.box.lo.segment(t * d, d) = robot.qmin;
    prob.box.hi.segment(t * d, d) = robot.qmax;
  }
  // the unsampled start keeps its own velocities
  auto decode = [&](const Vec& z) { return z == mu0 ? theta0 : positions_to_theta(base, z); };
  prob.cost = [&](const Vec& z) { return obj.value(decode(z)); };
  prob.feasible = [&](const Vec& z) { return obj.obstacle_unweighted(decode(z)) <= g_tol; };

  AstoOutcome o = asto_optimize(prob, mu0, k0, cfg, rng);
  res.report = o.report;
  if (!o.report.accepted) return res;
  res.theta = decode(o.z);
  GPModel gp0 = obj.gp();
  gp0.mean = theta0;
  res.gp = modify_gp_on_return(gp0, res.theta, cfg.k_eps_scale * k0);
  return res;
}

}  // namespace agpsto
