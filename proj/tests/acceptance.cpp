// One PASS/FAIL line per acceptance criterion. Tolerances are fixed here.
#include <agpsto/bench.hpp>
#include <agpsto/scenario.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "test_util.hpp"

using namespace agpsto;
using namespace agpsto::testing;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1. min_k |grad|^2 after 200 accelerated steps on a convex quadratic.
Verdict gradient_norm_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(11);
  const int n = 10, iters = 200;
  Mat q = Mat::Zero(n, n);
  {
    Mat a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = standard_normal(rng);
    const Eigen::HouseholderQR<Mat> qr(a);
    q = qr.householderQ();
  }
  Vec eig(n);
  for (int i = 0; i < n; ++i) eig(i) = std::pow(10.0, -2.0 + 3.0 * i / (n - 1.0));
  const Mat h = q * eig.asDiagonal() * q.transpose();
  const double lip = eig.maxCoeff();
  const SmoothProblem p{[h](const Vec& x) { return 0.5 * x.dot(h * x); }, [h](const Vec& x) { return Vec(h * x); }};
  AgdConfig cfg;
  cfg.theta1 = 2.0;
  cfg.theta2 = 0.25;
  cfg.n_ag = iters;
  cfg.acc_break = false;
  cfg.f_tol = 0.0;
  cfg.step_tol = 0.0;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Vec x0 = random_vec(n, rng);
    const AgdReport r = agd_run(p, x0, lip, cfg, rng);
    double best = std::numeric_limits<double>::infinity();
    for (double g : r.gnorm_trace) best = std::min(best, g * g);
    const double bound = 4.0 * lip * p.value(x0) / (0.6875 * iters);
    worst = std::max(worst, best / bound);
  }
  const double t = seconds_since(t0);
  return {worst <= 1.0 && t < 1.0, fmt("worst min|g|^2 / bound = %.3g over 20 starts, %.3f s", worst, t)};
}

// 2. Gamma recurrence against 2/(k(k+1)).
Verdict gamma_closed_form() {
  const auto g = agd_gamma_recurrence(10000);
  double worst = 0.0;
  for (int k = 1; k <= 10000; ++k) {
    const double closed = 2.0 / (static_cast<double>(k) * (k + 1.0));
    worst = std::max(worst, std::abs(g[static_cast<std::size_t>(k)] - closed) / closed);
  }
  return {worst <= 1e-14, fmt("max relative error %.3g for k <= 1e4", worst)};
}

// 3. one-sided difference quotients of the collision cost agree at 0 and eps.
Verdict collision_c2() {
  double worst = 0.0;
  for (double eps : {0.05, 0.25, 1.0}) {
    const auto f = [eps](double d) { return collision_cost(d, eps); };
    const auto df = [eps](double d) { return collision_cost_derivative(d, eps); };
    const double h1 = 1e-7 * eps, h2 = 1e-6 * eps;
    for (double d0 : {0.0, eps}) {
      const double l1 = (f(d0) - f(d0 - h1)) / h1, r1 = (f(d0 + h1) - f(d0)) / h1;
      const double l2 = (df(d0) - df(d0 - h2)) / h2, r2 = (df(d0 + h2) - df(d0)) / h2;
      worst = std::max({worst, std::abs(l1 - r1) * eps / 1e-4, std::abs(l2 - r2) * eps / 1e-4});
    }
  }
  return {worst < 1.0, fmt("worst one-sided jump / (1e-4/eps) = %.3g", worst)};
}

// 4. full planner objective gradient on random arm trajectories.
Verdict gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  WorldSpec spec;
  spec.lo = Vec2(-1.0, -1.0);
  spec.hi = Vec2(1.0, 1.0);
  spec.boxes.push_back(Box{Vec2(0.55, 0.1), Vec2(0.08, 0.12)});
  spec.discs.push_back(Disc{Vec2(-0.3, 0.45), 0.15});
  spec.capsules.push_back(Capsule{Vec2(0.1, -0.6), Vec2(0.5, -0.3), 0.06});
  auto w = arm_world(spec);
  PlannerConfig pc;
  Rng rng(4);
  double worst = 0.0;
  int with_obstacle = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec q0 = random_vec(3, rng, 1.0), qg = random_vec(3, rng, 1.0);
    const LineSetup s = line_setup(q0, qg, 5, 0.3);
    Objective obj = detail::make_objective(w, s.gp, pc);
    obj.set_rho(random_vec(6, rng).cwiseAbs() + Vec::Constant(6, 0.5));
    Vec th = s.traj.theta;
    for (int t = 1; t < 5; ++t) th.segment(t * 6, 6) += random_vec(6, rng, 0.15);
    if (obj.obstacle_unweighted(th) > 0.0) ++with_obstacle;
    const Vec g = obj.gradient(th);
    Vec fd = Vec::Zero(th.size());
    for (int i = 6; i < th.size() - 6; ++i) {
      Vec p = th, m = th;
      p(i) += 1e-6;
      m(i) -= 1e-6;
      fd(i) = (obj.value(p) - obj.value(m)) / 2e-6;
    }
    worst = std::max(worst, (g - fd).norm() / std::max(1e-12, fd.norm()));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-4 && t < 5.0,
          fmt("max relative error %.3g, %.0f/100 touching obstacles, %.2f s", worst, with_obstacle, t)};
}

// 5. reward gradient vanishes at the EM solution.
Verdict em_stationarity() {
  Rng rng(21);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + trial % 4, m = d + 3 + trial % 5;
    Mat s(d, m);
    for (int i = 0; i < m; ++i) s.col(i) = random_vec(d, rng);
    Vec w(m);
    for (int i = 0; i < m; ++i) w(i) = uniform(rng, 0.05, 1.0);
    const EmResult r = em_policy(s, w);
    const Mat kinv = r.cov.inverse();
    Vec gmu = Vec::Zero(d);
    Mat gk = Mat::Zero(d, d);
    for (int i = 0; i < m; ++i) {
      const Vec e = s.col(i) - r.mu;
      gmu += w(i) * kinv * e;
      gk += 0.5 * w(i) * (kinv * e * e.transpose() * kinv - kinv);
    }
    const double scale = w.sum() * std::max(1.0, kinv.norm() * kinv.norm());
    worst = std::max({worst, gmu.norm() / scale, gk.norm() / scale});
  }
  return {worst <= 1e-10, fmt("max scaled |grad R| = %.3g over 100 sample sets", worst)};
}

// 6. condition() against explicit-inverse conditioning of the joint Gaussian.
Verdict conditioning_oracle() {
  Rng rng(7);
  double worst = 0.0, min_eig = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 12;
    const int m = 1 + (trial / 12) % n;
    GPModel gp;
    gp.mean = random_vec(n, rng);
    gp.cov = random_spd(n, rng);
    ConditioningSpec spec;
    spec.C = Mat(m, n);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) spec.C(i, j) = standard_normal(rng);
    spec.obs = random_vec(m, rng);
    spec.noise = random_spd(m, rng, 0.05);
    const GPModel post = condition(gp, spec);
    // joint [x; y] with y = Cx + v, then x | y by block formulas
    Mat joint(n + m, n + m);
    joint << gp.cov, gp.cov * spec.C.transpose(), spec.C * gp.cov, spec.C * gp.cov * spec.C.transpose() + spec.noise;
    const Mat syy_inv = joint.bottomRightCorner(m, m).inverse();
    const Vec mu = gp.mean + joint.topRightCorner(n, m) * syy_inv * (spec.obs - spec.C * gp.mean);
    const Mat k = joint.topLeftCorner(n, n) - joint.topRightCorner(n, m) * syy_inv * joint.bottomLeftCorner(m, n);
    worst = std::max({worst, (post.mean - mu).cwiseAbs().maxCoeff(), (post.cov - k).cwiseAbs().maxCoeff()});
    const Eigen::SelfAdjointEigenSolver<Mat> es(post.cov);
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }
  return {worst <= 1e-10 && min_eig >= -1e-12, fmt("max abs error %.3g, min posterior eigenvalue %.3g", worst, min_eig)};
}

// 7. three-step scalar unrolls of the three policy updates.
Verdict policy_unrolls() {
  double worst = 0.0;
  const double targets[] = {1.0, 3.0, -2.0};
  {
    AstoConfig cfg;
    cfg.deterministic = true;
    Rng rng(9);
    PolicyIterates s = init_policy(Vec::Constant(1, 0.0), Mat::Constant(1, 1, 1.0));
    const double beta = 1.0 / cfg.l_r;
    std::vector<double> dh, lh;
    for (int n = 1; n <= 3; ++n) {
      const double md = s.md.mu(0), dn = targets[n - 1] - md;
      const StepCoeffs c = policy_coeffs(PolicyMode::AMA, n, false, cfg, rng);
      policy_step(s, Vec::Constant(1, targets[n - 1]), Mat::Constant(1, 1, 1.0), c, c);
      double oracle = md + (beta + agd_alpha(n) * (c.lambda - beta)) * dn;
      for (int i = 1; i < n; ++i) {
        double prod = 1.0;
        for (int j = i; j < n; ++j) prod *= 1.0 - agd_alpha(j);
        oracle += agd_alpha(n) * prod * (lh[static_cast<std::size_t>(i - 1)] - beta) * dh[static_cast<std::size_t>(i - 1)];
      }
      dh.push_back(dn);
      lh.push_back(c.lambda);
      worst = std::max(worst, std::abs(s.md.mu(0) - oracle));
    }
  }
  {
    AstoConfig cfg;
    cfg.mode = PolicyMode::EMA;
    cfg.alpha_mu = cfg.alpha_kappa = 0.3;
    Rng rng(0);
    PolicyIterates s = init_policy(Vec::Constant(1, 0.0), Mat::Constant(1, 1, 1.0));
    for (int n = 1; n <= 12; ++n) {
      policy_update(s, Vec::Constant(1, 2.0), Mat::Constant(1, 1, 1.0), cfg, rng);
      worst = std::max(worst, std::abs((2.0 - s.md.mu(0)) - 2.0 * std::pow(0.7, n)));
    }
  }
  {
    AstoConfig cfg;
    cfg.mode = PolicyMode::QAdam;
    cfg.alpha_mu = cfg.alpha_kappa = 0.2;
    Rng rng(6);
    PolicyIterates s = init_policy(Vec::Constant(1, 0.5), Mat::Constant(1, 1, 1.0));
    std::vector<double> dh;
    for (int n = 1; n <= 3; ++n) {
      const double t = targets[n - 1], dn = t - s.md.mu(0);
      policy_update(s, Vec::Constant(1, t), Mat::Constant(1, 1, 1.0), cfg, rng);
      double oracle = t;
      for (int i = 1; i < n; ++i) oracle += 0.2 * std::pow(0.8, n - i) * (dh[static_cast<std::size_t>(i - 1)] - dn);
      dh.push_back(dn);
      worst = std::max(worst, std::abs(s.md.mu(0) - oracle));
    }
  }
  return {worst <= 1e-12, fmt("max abs deviation %.3g across AMA, EMA, qAdam", worst)};
}

struct SweepOutcome {
  Verdict trend, safety;
};

// 8 and 10 share one sweep over the shipped suite.
SweepOutcome suite_sweep(const std::vector<Scenario>& scen) {
  const PlannerConfig base;
  const auto t0 = std::chrono::steady_clock::now();
  const auto jobs = make_jobs(scen, all_algorithms(), 1, 5);
  const auto outs = run_jobs(jobs, base, thread_count());
  const double total = seconds_since(t0);

  std::map<std::pair<Algorithm, char>, std::vector<const RunOutput*>> by;
  for (const auto& o : outs) by[{o.record.algo, o.record.cls}].push_back(&o);
  auto rate = [&](Algorithm a, char c) {
    const auto& v = by[{a, c}];
    int ok = 0;
    for (const auto* o : v) ok += o->record.success;
    return v.empty() ? 0.0 : 100.0 * ok / v.size();
  };
  auto med = [&](Algorithm a, std::initializer_list<char> cls, bool time) {
    std::vector<double> v;
    for (char c : cls)
      for (const auto* o : by[{a, c}]) v.push_back(time ? o->record.wall_time : o->record.iterations);
    return median(v);
  };
  const double i_c = rate(Algorithm::IAgpsto, 'C'), l_c = rate(Algorithm::LReAgd, 'C');
  const double it_l = med(Algorithm::LReAgd, {'A', 'B'}, false), it_f = med(Algorithm::AgdFixed, {'A', 'B'}, false);
  const double tm_i = med(Algorithm::IAgpsto, {'C'}, true), tm_a = med(Algorithm::Agpsto, {'C'}, true);
  const bool a = i_c >= 90.0 && l_c <= 40.0;
  const bool b = it_l <= 0.5 * it_f;
  const bool c = tm_i <= tm_a;
  const bool fast = total < 300.0;
  SweepOutcome out;
  out.trend.pass = a && b && c && fast;
  out.trend.detail = fmt("(a) C success iagpsto %.1f%% vs lreagd %.1f%%; (b) A/B median iterations lreagd %.0f vs agd-fixed %.0f;",
                         i_c, l_c, it_l, it_f) +
                     fmt(" (c) C median time iagpsto %.4f s vs agpsto %.4f s; sweep %.1f s", tm_i, tm_a, total);

  // re-check every success independently of the planner's own flags
  int successes = 0, violations = 0;
  std::map<std::string, const Scenario*> by_id;
  for (const auto& s : scen) by_id[s.id] = &s;
  for (const auto& o : outs) {
    if (!o.record.success) continue;
    ++successes;
    const Scenario& s = *by_id.at(o.record.scenario);
    const PlannerConfig cfg = scenario_config(base, s);
    const auto world = s.build_world();
    const Mat qc = cfg.qc * Mat::Identity(world->robot.dof(), world->robot.dof());
    const bool ok = o.record.final_fobs <= 1e-4 && obstacle_cost(*world, o.traj, 1.0) <= 1e-4 &&
                    continuous_safe(*world, qc, o.traj, 1e-4, 8);
    violations += !ok;
  }
  out.safety.pass = violations == 0 && successes > 0;
  out.safety.detail = fmt("%.0f violations among %.0f successful runs", violations, successes);
  return out;
}

// 9. step-constant grid on the class A/B problems.
Verdict tuning_grid(const std::vector<Scenario>& scen) {
  std::vector<Scenario> ab;
  for (const auto& s : scen)
    if (s.class_hint == 'A' || s.class_hint == 'B') ab.push_back(s);
  const auto t0 = std::chrono::steady_clock::now();
  const GridResult g = run_grid(ab, Algorithm::LReAgd, PlannerConfig{}, reference_theta1(), reference_theta2(), 1, 1,
                                thread_count());
  const auto b = g.best();
  const auto idx = [](const std::vector<double>& v, double x) {
    return static_cast<long>(std::find_if(v.begin(), v.end(), [x](double y) { return std::abs(x - y) < 1e-9; }) - v.begin());
  };
  const long i0 = idx(g.theta1, 2.0), j0 = idx(g.theta2, 0.25);
  const bool shape = g.theta1.size() == 6 && g.theta2.size() == 7 && g.cells.size() == 42;
  const bool near = std::abs(static_cast<long>(b.first) - i0) <= 1 && std::abs(static_cast<long>(b.second) - j0) <= 1;
  const GridCell& c = g.at(b.first, b.second);
  return {shape && near, fmt("best cell (%.3f, %.3f) at %.0f%% success, %.1f mean iterations", g.theta1[b.first],
                             g.theta2[b.second], c.success_pct(), c.mean_iterations) +
                             fmt("; grid %.1f s", seconds_since(t0))};
}

}  // namespace

int main() {
  std::vector<std::pair<int, Verdict>> results;
  auto report = [&](int id, const Verdict& v) {
    std::printf("criterion %d: %s  %s\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
    results.emplace_back(id, v);
  };
  report(1, gradient_norm_bound());
  report(2, gamma_closed_form());
  report(3, collision_c2());
  report(4, gradient_check());
  report(5, em_stationarity());
  report(6, conditioning_oracle());
  report(7, policy_unrolls());
  const std::vector<Scenario> scen = load_scenario_dir(AGPSTO_SCENARIO_DIR);
  const SweepOutcome sw = suite_sweep(scen);
  report(8, sw.trend);
  report(9, tuning_grid(scen));
  report(10, sw.safety);
  int failed = 0;
  for (const auto& r : results) failed += !r.second.pass;
  std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  return failed == 0 ? 0 : 1;
}
