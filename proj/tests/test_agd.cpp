#include <agpsto/agd.hpp>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace agpsto;
using namespace agpsto::testing;

namespace {

SmoothProblem quadratic(const Mat& h) {
  return SmoothProblem{[h](const Vec& x) { return 0.5 * x.dot(h * x); }, [h](const Vec& x) { return Vec(h * x); }};
}

SmoothProblem quad1d(double lip) { return quadratic(Mat::Constant(1, 1, lip)); }

// Runs LIter restarts until convergence; counts restarts and MinAprch hits.
struct LoopResult {
  Vec x;
  int iterations = 0;
  int restarts = 0;
  bool min_approach = false;
};

LoopResult restart_loop(const SmoothProblem& p, Vec x, const AgdConfig& cfg, int max_liters, Rng& rng) {
  LoopResult out;
  std::optional<AgdReport> last;
  for (int j = 0; j < max_liters; ++j) {
    const double f = p.value(x);
    const Vec g = p.gradient(x);
    const LipschitzChoice ch = choose_lipschitz(p, last ? &*last : nullptr, x, f, g, cfg, rng);
    if (ch.min_approach) {
      out.min_approach = true;
      break;
    }
    AgdReport rep = agd_run(p, x, ch.lip, cfg, rng);
    out.iterations += rep.iterations;
    x = rep.x;
    if (rep.stop == AgdStop::RestartLow || rep.stop == AgdStop::RestartUp) ++out.restarts;
    if (rep.stop == AgdStop::Converged || rep.stop == AgdStop::Stationary) break;
    last = rep;
  }
  out.x = x;
  return out;
}

}  // namespace

TEST(Agd, GammaRecurrenceMatchesClosedForm) {
  const auto g = agd_gamma_recurrence(10000);
  for (int k = 1; k <= 10000; ++k) {
    const double closed = 2.0 / (static_cast<double>(k) * (k + 1.0));
    EXPECT_NEAR(g[static_cast<std::size_t>(k)], closed, 1e-14 * closed);
  }
  // telescoped sum against direct summation
  double direct = 0.0;
  for (int k = 7; k <= 50; ++k) direct += agd_gamma(k);
  EXPECT_NEAR(agd_gamma_sum(7, 50), direct, 1e-14);
}

TEST(Agd, CkPositiveWhenFeasible) {
  for (double t1 : {1.414, 2.0, 2.828, 4.0}) {
    for (double t2 : {0.0, 0.125, 0.25, 0.375}) {
      AgdConfig cfg;
      cfg.theta1 = t1;
      cfg.theta2 = t2;
      if (cfg.feasibility() <= 0.0) continue;
      const double lip = 3.0;
      const double beta = agd_beta(lip, cfg);
      for (int n : {1, 10, 1000})
        for (int k = 1; k <= n; ++k) {
          const double hi = (1.0 + t2 * agd_alpha(k)) * beta;
          for (double lam : {beta, 0.5 * (beta + hi), hi}) EXPECT_GT(agd_c_k(k, n, lip, lam, beta), 0.0);
        }
    }
  }
}

TEST(Agd, ConfigValidation) {
  AgdConfig c;
  EXPECT_NO_THROW(c.validate());
  c.theta1 = 1.0;
  c.theta2 = 0.25;
  EXPECT_THROW(c.validate(), ParameterError);
  c = AgdConfig{};
  c.c_up = 2.0;
  EXPECT_THROW(c.validate(), ParameterError);
  EXPECT_NEAR(AgdConfig{}.feasibility(), 0.6875, 1e-15);
}

TEST(Agd, LambdaStaysInAdmissibleInterval) {
  AgdConfig cfg;
  Rng rng(1);
  for (int k = 1; k < 500; ++k) {
    const double beta = 0.37;
    const double lam = agd_lambda(k, beta, cfg, rng);
    EXPECT_GE(lam, beta);
    EXPECT_LE(lam, (1 + cfg.theta2 * agd_alpha(k)) * beta);
  }
  cfg.rule = StepRule::Leapfrog;
  EXPECT_DOUBLE_EQ(agd_lambda(3, 0.4, cfg, rng), 0.4 / 0.5);
}

TEST(Agd, AccBreakBandOnExactQuadratic) {
  AgdConfig cfg;
  const double lip = 3.0;
  const SmoothProblem p = quad1d(lip);
  Vec x0(1), x1(1);
  x0 << 1.0;
  x1 << 0.4;
  const Vec g0 = p.gradient(x0);
  const Vec step = x1 - x0;
  EXPECT_EQ(acc_break(p.value(x0), p.value(x1), g0, step, lip, cfg), BreakDecision::Continue);
  EXPECT_EQ(acc_break(p.value(x0), p.value(x1), g0, step, lip * 1e6, cfg), BreakDecision::RestartUp);
  EXPECT_EQ(acc_break(p.value(x0), p.value(x1), g0, step, lip * 1e-6, cfg), BreakDecision::RestartLow);
}

TEST(Agd, ZeroGradientReturnsStartAfterOneIteration) {
  Rng rng(0);
  const AgdReport r = agd_run(quad1d(2.0), Vec::Zero(1), 2.0, AgdConfig{}, rng);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_EQ(r.x(0), 0.0);
}

TEST(Agd, NoRestartOnIsotropicQuadraticWithExactLipschitz) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const double lip = 0.5 + trial;
    const SmoothProblem p = quadratic(lip * Mat::Identity(4, 4));
    AgdConfig cfg;
    cfg.f_tol = 0.0;
    cfg.step_tol = 1e-10;
    const AgdReport r = agd_run(p, random_vec(4, rng), lip, cfg, rng);
    EXPECT_TRUE(r.stop == AgdStop::Converged || r.stop == AgdStop::Budget || r.stop == AgdStop::Stationary)
        << to_string(r.stop);
  }
}

TEST(Agd, GradientNormBoundOneDimensional) {
  for (double lip : {0.5, 2.0, 10.0}) {
    AgdConfig cfg;
    cfg.acc_break = false;
    cfg.f_tol = 0.0;
    cfg.step_tol = 0.0;
    const int n = 100;
    cfg.n_ag = n;
    Rng rng(5);
    Vec x0(1);
    x0 << 1.0;
    const SmoothProblem p = quad1d(lip);
    const AgdReport r = agd_run(p, x0, lip, cfg, rng);
    double best = std::numeric_limits<double>::infinity();
    for (double g : r.gnorm_trace) best = std::min(best, g * g);
    const double bound = agd_gradient_bound(lip, p.value(x0), n, cfg);
    EXPECT_NEAR(bound, 4 * lip * (0.5 * lip) / (0.6875 * n), 1e-12);
    EXPECT_LE(best, bound);
  }
}

TEST(Agd, LeapfrogValueBound) {
  const double lip = 4.0;
  AgdConfig cfg;
  cfg.rule = StepRule::Leapfrog;
  cfg.acc_break = false;
  cfg.f_tol = 0.0;
  cfg.step_tol = 0.0;
  Rng rng(8);
  Mat h = Mat::Zero(3, 3);
  h.diagonal() << 4.0, 1.0, 0.1;
  const SmoothProblem p = quadratic(h);
  Vec x0(3);
  x0 << 1.0, -2.0, 0.5;
  for (int n : {5, 20, 80}) {
    cfg.n_ag = n;
    const AgdReport r = agd_run(p, x0, lip, cfg, rng);
    EXPECT_LE(r.f_trace.back(), leapfrog_value_bound(lip, x0.squaredNorm(), n, cfg) + 1e-12);
  }
}

TEST(Agd, VarpiConstants) {
  AgdConfig cfg;
  EXPECT_NEAR(reestimate_varpi(1, 1.0, cfg), 0.625 * 0.34375, 1e-15);
  EXPECT_NEAR(reestimate_varpi(1, 4.0, cfg), 4 * 0.625 * 0.34375, 1e-14);
}

TEST(Agd, LowReestimateRecoversQuadraticCurvature) {
  const double lstar = 7.0;
  const SmoothProblem p = quad1d(lstar);
  AgdConfig cfg;
  Vec x(1);
  x << 1.0;
  const double f = p.value(x);
  const Vec g = p.gradient(x);
  const double slope = reestimate_phi_slope(p, x, f, g, cfg);
  const double varpi = reestimate_varpi(1, g.squaredNorm(), cfg);
  double lip = lstar / 100;
  int updates = 0;
  while (updates < 5 && !(lip >= lstar / 2 && lip <= 2 * lstar)) {
    lip = reestimate_low_step(lip, reestimate_phi(p, x, f, g, lip, cfg), slope, varpi, 0.0, cfg).lip;
    ++updates;
  }
  EXPECT_GE(lip, lstar / 2);
  EXPECT_LE(lip, 2 * lstar);
  EXPECT_LE(updates, 5);
}

TEST(Agd, LowReestimateBoundaryPathAndFallback) {
  AgdConfig cfg;
  const LowUpdate u = reestimate_low_step(1.0, 0.5, 0.0, 0.1, 3.0, cfg);
  EXPECT_TRUE(u.boundary_used);
  EXPECT_EQ(u.lip, 3.0);
  const LowUpdate f = reestimate_low_step(1.0, 0.5, 0.0, 0.1, -1.0, cfg);
  EXPECT_TRUE(f.fallback_used);
  EXPECT_EQ(f.lip, 2.0);
}

TEST(Agd, UpBoundsOnQuadratic) {
  const double lstar = 5.0;
  const SmoothProblem p = quad1d(lstar);
  AgdConfig cfg;
  Vec x0(1), x1(1);
  x0 << 1.0;
  x1 << 0.7;
  const UpBounds b = reestimate_up_bounds(p.gradient(x0), p.gradient(x1), x1 - x0, p.value(x1) - p.value(x0), cfg);
  EXPECT_NEAR(b.upper, lstar / cfg.c_up, 1e-12);
  EXPECT_LE(b.lower, b.upper);
  Rng rng(1);
  bool degenerate = false;
  const double same = reestimate_up(p.gradient(x0), p.gradient(x0), x1 - x0, 1.0, 1.0, 42.0, cfg, rng, &degenerate);
  EXPECT_TRUE(degenerate);
  EXPECT_EQ(same, 42.0);
  EXPECT_THROW(reestimate_up_bounds(p.gradient(x0), p.gradient(x1), Vec::Zero(1), 0.0, cfg), ParameterError);
}

TEST(Agd, MinApproachThresholds) {
  AgdConfig cfg;
  EXPECT_FALSE(min_approach(-1.0, 0.5, 2.0, 2.0, 0, cfg));
  EXPECT_TRUE(min_approach(-1.0, 0.5, 2.0, 300.0, 3, cfg));
  EXPECT_FALSE(min_approach(-1.0, 0.5, 2.0, 300.0, 1, cfg));
  EXPECT_TRUE(min_approach(-0.01, 0.5, 2.0, 2.0, 0, cfg));
}

TEST(Agd, MinApproachFiresAtDoubleWellBarrier) {
  const SmoothProblem p{[](const Vec& x) { return std::pow(x(0) * x(0) - 1.0, 2) + 0.3 * x(0); },
                        [](const Vec& x) { return Vec::Constant(1, 4.0 * x(0) * (x(0) * x(0) - 1.0) + 0.3); }};
  // locate the barrier top by Newton on the derivative
  double xb = 0.0;
  for (int i = 0; i < 50; ++i) xb -= (4 * xb * xb * xb - 4 * xb + 0.3) / (12 * xb * xb - 4);
  AgdConfig cfg;
  Rng rng(2);
  const LoopResult r = restart_loop(p, Vec::Constant(1, xb), cfg, 20, rng);
  EXPECT_TRUE(r.min_approach);
  EXPECT_LE(r.restarts, 20);
}

TEST(Agd, RosenbrockWithRestarts) {
  const SmoothProblem p{
      [](const Vec& x) { return 100 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1 - x(0), 2); },
      [](const Vec& x) {
        Vec g(2);
        g(0) = -400 * x(0) * (x(1) - x(0) * x(0)) - 2 * (1 - x(0));
        g(1) = 200 * (x(1) - x(0) * x(0));
        return g;
      }};
  AgdConfig cfg;
  cfg.f_tol = 0.0;
  cfg.step_tol = 0.0;
  cfg.grad_tol = 1e-4;
  cfg.n_ag = 5000;
  Rng rng(6);
  Vec x(2);
  x << -1.2, 1.0;
  std::optional<AgdReport> last;
  int total = 0;
  double best = std::numeric_limits<double>::infinity();
  while (total < 5000) {
    const LipschitzChoice ch = choose_lipschitz(p, last ? &*last : nullptr, x, p.value(x), p.gradient(x), cfg, rng);
    AgdReport rep = agd_run(p, x, ch.lip, cfg, rng);
    total += rep.iterations;
    x = rep.x;
    for (double g : rep.gnorm_trace) best = std::min(best, g);
    if (rep.stop == AgdStop::Stationary) break;
    last = rep;
  }
  EXPECT_LT(best, 1e-4);
  EXPECT_LE(total, 5000);
}

TEST(Agd, NonFiniteCostAborts) {
  const SmoothProblem p{[](const Vec&) { return std::nan(""); }, [](const Vec& x) { return x; }};
  Rng rng(0);
  EXPECT_THROW(agd_run(p, Vec::Ones(2), 1.0, AgdConfig{}, rng), NumericalError);
  EXPECT_THROW(agd_run(p, Vec::Ones(2), 0.0, AgdConfig{}, rng), ParameterError);
}
