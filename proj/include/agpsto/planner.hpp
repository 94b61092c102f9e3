#pragma once

#include <agpsto/agd.hpp>
#include <agpsto/asto.hpp>
#include <agpsto/core.hpp>
#include <agpsto/objective.hpp>
#include <agpsto/trajgp.hpp>
#include <agpsto/world.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace agpsto {

struct PlannerConfig {
  int n_pen = 12;
  int n_lip = 60;
  double kappa = 0.4;
  double g_tol = 1e-4;
  double rho0 = 0.01;
  double rho_max = 1e3;  // escalation stops here; iOMP carries rho across refinements
  double limit_weight = 1.0;
  double qc = 20.0;         // Qc = qc * I
  double total_time = 1.0;  // fixed horizon; dt follows from the support count
  int n_iti = 5;
  double tau_ip = 2.0;
  int n_p0 = 0;  // 0 picks the count from the start-goal distance
  int n_intervals = 8;
  int obs_intervals = 2;  // interpolated states per gap inside the obstacle cost
  int n_uf = 10;
  double noisy_z = 1.0;
  int dense_gaps = 16;  // support gaps for the non-incremental planners
  int max_asto = 40;    // ASTO phases per agpsto_plan call
  int max_iterations = 8000;  // per agpsto_plan call
  double fixed_lip = 1e3;     // 1e2 diverges against the GP curvature at dt ~ 0.3
  bool use_asto = true;
  bool force_no_min_approach = false;
  bool fixed_lipschitz = false;
  AgdConfig agd;
  AstoConfig asto;

  void validate() const {
    require(kappa > 0.0 && kappa < 1.0, "PlannerConfig: kappa must lie in (0,1)");
    require(tau_ip > 1.0, "PlannerConfig: tau_ip must exceed 1");
    require(n_pen >= 1 && n_lip >= 1 && n_iti >= 1 && n_uf >= 1, "PlannerConfig: budgets must be positive");
    require(max_iterations >= 1 && max_asto >= 0, "PlannerConfig: iteration caps must be positive");
    require(g_tol > 0.0 && rho0 > 0.0 && qc > 0.0 && total_time > 0.0, "PlannerConfig: scales must be positive");
    require(n_p0 >= 0 && n_intervals >= 0 && obs_intervals >= 0 && dense_gaps >= 1, "PlannerConfig: bad discretization");
    require(fixed_lip > 0.0, "PlannerConfig: fixed_lip must be positive");
    require(rho_max >= rho0, "PlannerConfig: rho_max below rho0");
    agd.validate();
    asto.validate();
  }
};

struct PhaseEvent {
  std::string kind;
  int pen = 0;
  int liter = 0;
  double f = 0.0;
  double lip = 0.0;
  int iterations = 0;
};

struct PlanReport {
  bool success = false;
  bool continuous_safe = false;
  int iterations = 0;
  int restarts = 0;
  int asto_phases = 0;
  int asto_accepted = 0;
  int min_approach_hits = 0;
  int pen_rounds = 0;
  int liters = 0;
  int iti_rounds = 0;
  int refinements = 0;
  int n_support = 0;
  double final_f = 0.0;
  double final_fobs = 0.0;
  std::string error;
  std::vector<PhaseEvent> phases;
  std::vector<double> f_trace;
  std::vector<double> lip_trace;
  std::vector<Vec> rho_history;

  // Folds a nested call's counters and traces into this report.
  void absorb(const PlanReport& o) {
    iterations += o.iterations;
    restarts += o.restarts;
    asto_phases += o.asto_phases;
    asto_accepted += o.asto_accepted;
    min_approach_hits += o.min_approach_hits;
    pen_rounds += o.pen_rounds;
    liters += o.liters;
    phases.insert(phases.end(), o.phases.begin(), o.phases.end());
    f_trace.insert(f_trace.end(), o.f_trace.begin(), o.f_trace.end());
    lip_trace.insert(lip_trace.end(), o.lip_trace.begin(), o.lip_trace.end());
  }
};

struct AgpstoResult {
  Trajectory traj;
  GPModel gp;
  Vec rho;
  PlanReport report;
};

// Nested penalty and Lipschitz loops. ASTO replaces the AGD run whenever the
// Lipschitz bookkeeping flags a strong local minimum.
inline AgpstoResult agpsto_plan(const Objective& obj0, const Vec& theta0, const PlannerConfig& cfg, Rng& rng) {
  cfg.validate();
  require(theta0.size() == obj0.dim(), "agpsto_plan: theta0 size mismatch");
  Objective obj = obj0;
  Vec theta = theta0;
  PlanReport rep;
  const SmoothProblem prob{[&obj](const Vec& x) { return obj.value(x); },
                           [&obj](const Vec& x) { return obj.gradient(x); }};
  AgdConfig acfg = cfg.agd;
  if (cfg.fixed_lipschitz) acfg.acc_break = false;

  for (int pen = 1; pen <= cfg.n_pen; ++pen) {
    rep.pen_rounds = pen;
    rep.rho_history.push_back(obj.rho());
    std::optional<AgdReport> last;
    bool stuck = false;  // previous run converged while still in collision
    for (int li = 1; li <= cfg.n_lip && rep.iterations < cfg.max_iterations; ++li) {
      ++rep.liters;
      double f = obj.value(theta);
      Vec g = obj.gradient(theta);
      if (g.squaredNorm() == 0.0 && !stuck) break;

      LipschitzChoice ch;
      if (stuck) {
        ch.min_approach = true;
        stuck = false;
      } else if (cfg.fixed_lipschitz) {
        ch.lip = cfg.fixed_lip;
      } else {
        ch = choose_lipschitz(prob, last ? &*last : nullptr, theta, f, g, acfg, rng);
      }
      if (cfg.force_no_min_approach) ch.min_approach = false;
      if (ch.min_approach) ++rep.min_approach_hits;

      if (ch.min_approach && cfg.use_asto && rep.asto_phases < cfg.max_asto) {
        const AstoTrajResult a = asto_run(obj, theta, cfg.asto, cfg.g_tol, rng);
        ++rep.asto_phases;
        if (a.report.accepted) {
          ++rep.asto_accepted;
          theta = a.theta;
          obj.set_gp(a.gp);
        }
        f = obj.value(theta);
        rep.phases.push_back({std::string("asto_") + to_string(a.report.exit), pen, li, f, 0.0, 0});
        // a rejected sample round means this penalty level cannot be left by sampling
        if (!a.report.accepted) break;
        g = obj.gradient(theta);
        if (g.squaredNorm() == 0.0) break;
        ch.lip = initial_lipschitz(g);
        last.reset();
      }

      const AgdReport r = agd_run(prob, theta, ch.lip, acfg, rng);
      rep.iterations += r.iterations;
      rep.f_trace.insert(rep.f_trace.end(), r.f_trace.begin(), r.f_trace.end());
      rep.lip_trace.push_back(ch.lip);
      if (r.stop == AgdStop::RestartLow || r.stop == AgdStop::RestartUp) ++rep.restarts;
      theta = r.x;
      rep.phases.push_back({to_string(r.stop), pen, li, r.f, ch.lip, r.iterations});
      if (r.stop == AgdStop::Converged || r.stop == AgdStop::Stationary) {
        // a local minimum in collision is left to the sampler
        if (!cfg.use_asto || cfg.force_no_min_approach || rep.asto_phases >= cfg.max_asto ||
            obj.obstacle_unweighted(theta) < cfg.g_tol)
          break;
        stuck = true;
        last.reset();
        continue;
      }
      last = r;
    }
    const double fobs = obj.obstacle_unweighted(theta);
    if (fobs < cfg.g_tol) {
      rep.success = true;
      break;
    }
    if (pen < cfg.n_pen) obj.set_rho(scale_penalty(obj.rho(), cfg.kappa).cwiseMin(cfg.rho_max));
  }

  AgpstoResult out;
  out.traj = obj.trajectory(theta);
  out.gp = obj.gp();
  out.rho = obj.rho();
  rep.final_f = obj.value(theta);
  rep.final_fobs = obj.obstacle_unweighted(theta);
  rep.n_support = obj.n_waypoints();
  out.report = std::move(rep);
  return out;
}

// Sampling-only baseline: repeated ASTO rounds on a fixed prior under the
// same penalty schedule.
inline AgpstoResult asto_only_plan(const Objective& obj0, const Vec& theta0, const PlannerConfig& cfg, Rng& rng) {
  cfg.validate();
  Objective obj = obj0;
  Vec theta = theta0;
  PlanReport rep;
  for (int pen = 1; pen <= cfg.n_pen; ++pen) {
    rep.pen_rounds = pen;
    rep.rho_history.push_back(obj.rho());
    for (int li = 1; li <= cfg.n_lip; ++li) {
      ++rep.liters;
      const AstoTrajResult a = asto_run(obj, theta, cfg.asto, cfg.g_tol, rng);
      ++rep.asto_phases;
      rep.iterations += a.report.rounds;
      if (!a.report.accepted) break;
      ++rep.asto_accepted;
      theta = a.theta;
      rep.f_trace.push_back(obj.value(theta));
      if (obj.obstacle_unweighted(theta) < cfg.g_tol) break;
    }
    if (obj.obstacle_unweighted(theta) < cfg.g_tol) {
      rep.success = true;
      break;
    }
    if (pen < cfg.n_pen) obj.set_rho(scale_penalty(obj.rho(), cfg.kappa).cwiseMin(cfg.rho_max));
  }
  AgpstoResult out;
  out.traj = obj.trajectory(theta);
  out.gp = obj.gp();
  out.rho = obj.rho();
  rep.final_f = obj.value(theta);
  rep.final_fobs = obj.obstacle_unweighted(theta);
  rep.n_support = obj.n_waypoints();
  out.report = std::move(rep);
  return out;
}

// ---------------------------------------------------------------------------
// Incremental planning
// ---------------------------------------------------------------------------

// Initial interior waypoint count from the start-goal distance relative to
// the joint range.
inline int initial_waypoints(double ratio) {
  require(ratio >= 0.0, "initial_waypoints: ratio must be non-negative");
  if (ratio <= 1.0 / 3.0) return 2;
  if (ratio <= 2.0 / 3.0) return 3;
  return 4;
}

// Kinetic energy proxy per gap, 0.5 * dq' M dq with M the diagonal effective
// joint inertia at the GP midpoint.
inline Vec gap_kinetic_energy(const Trajectory& traj, const Mat& qc, const RobotModel& robot) {
  const int gaps = traj.size() - 1;
  Vec e(gaps);
  for (int a = 0; a < gaps; ++a) {
    const Mat mid = interpolate_states(qc, traj.times(a), traj.times(a + 1), traj.state(a), traj.state(a + 1), {0.5});
    const Vec m = joint_inertia(robot, mid.col(0).head(traj.dof));
    const Vec dq = traj.position(a) - traj.position(a + 1);
    e(a) = 0.5 * dq.dot(m.cwiseProduct(dq));
  }
  return e;
}

inline std::vector<int> allocate_from_energy(const Vec& energy, int n_p) {
  require(n_p >= 0, "allocate_waypoints: negative count");
  const int gaps = static_cast<int>(energy.size());
  require(gaps >= 1, "allocate_waypoints: need at least one gap");
  std::vector<int> counts(static_cast<std::size_t>(gaps), 0);
  const double total = energy.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    for (int i = 0; i < n_p; ++i) ++counts[static_cast<std::size_t>(i % gaps)];
    return counts;
  }
  for (int a = 0; a < gaps; ++a)
    counts[static_cast<std::size_t>(a)] = static_cast<int>(std::lround(n_p * energy(a) / total));
  return counts;
}

inline std::vector<int> allocate_waypoints(const Trajectory& traj, const Mat& qc, const RobotModel& robot, int n_p) {
  return allocate_from_energy(gap_kinetic_energy(traj, qc, robot), n_p);
}

// Inserts counts[a] GP-interpolated states evenly in time inside gap a.
inline Trajectory insert_waypoints(const Trajectory& traj, const Mat& qc, const std::vector<int>& counts) {
  require(static_cast<int>(counts.size()) == traj.size() - 1, "insert_waypoints: one count per gap");
  const int s = traj.state_dim();
  std::vector<double> times;
  std::vector<Vec> states;
  for (int a = 0; a < traj.size(); ++a) {
    times.push_back(traj.times(a));
    states.emplace_back(traj.state(a));
    if (a + 1 == traj.size()) break;
    const int c = counts[static_cast<std::size_t>(a)];
    if (c <= 0) continue;
    const auto taus = interval_fractions(c);
    const Mat mid = interpolate_states(qc, traj.times(a), traj.times(a + 1), traj.state(a), traj.state(a + 1), taus);
    for (int k = 0; k < c; ++k) {
      times.push_back(traj.times(a) + taus[static_cast<std::size_t>(k)] * (traj.times(a + 1) - traj.times(a)));
      states.emplace_back(mid.col(k));
    }
  }
  const int n = static_cast<int>(times.size());
  Vec t(n), th(n * s);
  for (int i = 0; i < n; ++i) {
    t(i) = times[static_cast<std::size_t>(i)];
    th.segment(i * s, s) = states[static_cast<std::size_t>(i)];
  }
  return Trajectory(t, th, traj.dof);
}

// Per-waypoint share of the unweighted obstacle and limit costs.
inline Vec waypoint_costs(const Objective& obj, const Vec& theta) {
  const Trajectory traj = obj.trajectory(theta);
  Vec c = obstacle_terms(obj.world(), traj);
  if (obj.limit_weight() > 0.0) {
    for (int t = 0; t < traj.size(); ++t) {
      const Trajectory one(traj.times.segment(t, 1), traj.state(t), traj.dof);
      c(t) += obj.limit_weight() * limit_cost(obj.world().robot, obj.world().params, one);
    }
  }
  return c;
}

using IndexRange = std::pair<int, int>;

// Runs of waypoints whose cost exceeds mean + z * std, padded by one neighbour
// and merged when they overlap. Ranges without an interior are dropped.
inline std::vector<IndexRange> noisy_ranges(const Vec& costs, double z) {
  const int n = static_cast<int>(costs.size());
  std::vector<IndexRange> out;
  if (n == 0) return out;
  const double mu = costs.mean();
  const double sd = std::sqrt((costs.array() - mu).square().mean());
  const double thr = mu + z * sd;
  int t = 0;
  while (t < n) {
    if (!(costs(t) > thr)) {
      ++t;
      continue;
    }
    int e = t;
    while (e + 1 < n && costs(e + 1) > thr) ++e;
    IndexRange r{std::max(0, t - 1), std::min(n - 1, e + 1)};
    if (!out.empty() && r.first <= out.back().second)
      out.back().second = std::max(out.back().second, r.second);
    else
      out.push_back(r);
    t = e + 1;
  }
  std::vector<IndexRange> kept;
  for (const auto& r : out)
    if (r.second - r.first >= 2) kept.push_back(r);
  return kept;
}

inline std::vector<IndexRange> select_noisy_subtrajectories(const Objective& obj, const Vec& theta, double z) {
  return noisy_ranges(waypoint_costs(obj, theta), z);
}

struct IompResult {
  Trajectory traj;
  GPModel gp;
  Vec rho;
  PlanReport report;
};

namespace detail {

inline Mat qc_matrix(const PlannerConfig& cfg, int dof) { return cfg.qc * Mat::Identity(dof, dof); }

inline Objective make_objective(const std::shared_ptr<const World>& world, const GPModel& gp, const PlannerConfig& cfg) {
  Objective obj(world, gp, cfg.rho0, cfg.limit_weight);
  obj.set_interval_states(cfg.obs_intervals);
  return obj;
}

inline GPModel endpoint_prior(const Vec& times, const Mat& qc, const Vec& s0, const Vec& sg) {
  return build_prior(times, qc, s0, sg, Mat::Identity(s0.size(), s0.size()));
}

// agpsto_plan on waypoints [a, b] with both boundary states clamped. Only the
// interior of the range is written back.
inline void refine_range(const std::shared_ptr<const World>& world, const Mat& qc, Trajectory& traj, Vec& rho, int a,
                         int b, const PlannerConfig& cfg, Rng& rng, PlanReport& rep) {
  const int s = traj.state_dim();
  const int len = b - a + 1;
  // prior centred on the current stretch, boundary states clamped
  GPModel gp = endpoint_prior(traj.times.segment(a, len), qc, traj.state(a), traj.state(b));
  gp.mean = traj.theta.segment(a * s, len * s);
  Objective sub = detail::make_objective(world, gp, cfg);
  sub.set_rho(rho.segment(a, len));
  const AgpstoResult r = agpsto_plan(sub, traj.theta.segment(a * s, len * s), cfg, rng);
  traj.theta.segment((a + 1) * s, (len - 2) * s) = r.traj.theta.segment(s, (len - 2) * s);
  rho.segment(a, len) = rho.segment(a, len).cwiseMax(r.rho);
  rep.absorb(r.report);
  ++rep.refinements;
}

}  // namespace detail

// Incremental planner: few waypoints first, refine the noisy stretches, and
// insert waypoints by kinetic energy until the continuous-time check passes.
inline IompResult iomp_plan(const std::shared_ptr<const World>& world, const Vec& start, const Vec& goal,
                            const PlannerConfig& cfg, Rng& rng) {
  cfg.validate();
  require(world != nullptr, "iomp_plan: world is null");
  const RobotModel& robot = world->robot;
  const int d = robot.dof();
  require(start.size() == d && goal.size() == d, "iomp_plan: start/goal dimension mismatch");
  for (const Vec* q : {&start, &goal}) {
    require(((q->array() >= robot.qmin.array()) && (q->array() <= robot.qmax.array())).all(),
            "iomp_plan: endpoint outside joint limits");
    require(!in_collision(*world, *q), "iomp_plan: endpoint in collision");
  }
  const Mat qc = detail::qc_matrix(cfg, d);
  const double ratio = (goal - start).norm() / (robot.qmax - robot.qmin).norm();
  int n_p = cfg.n_p0 > 0 ? cfg.n_p0 : initial_waypoints(ratio);
  const Vec v = (goal - start) / cfg.total_time;
  Vec s0(2 * d), sg(2 * d);
  s0 << start, v;
  sg << goal, v;

  Trajectory traj = straight_line(start, goal, uniform_times(n_p + 1, cfg.total_time / (n_p + 1)));
  Vec rho = Vec::Constant(traj.size(), cfg.rho0);
  GPModel gp = detail::endpoint_prior(traj.times, qc, s0, sg);
  IompResult out;
  PlanReport& rep = out.report;

  for (int iti = 1; iti <= cfg.n_iti; ++iti) {
    rep.iti_rounds = iti;
    if (iti > 1) {
      n_p = static_cast<int>(std::ceil(cfg.tau_ip * n_p));
      const int have = traj.size() - 2;
      const std::vector<int> counts = allocate_waypoints(traj, qc, robot, std::max(1, n_p - have));
      const Trajectory finer = insert_waypoints(traj, qc, counts);
      Vec rho_f(finer.size());
      int k = 0;
      for (int a = 0; a < traj.size(); ++a) {
        rho_f(k++) = rho(a);
        if (a + 1 == traj.size()) break;
        for (int c = 0; c < counts[static_cast<std::size_t>(a)]; ++c) rho_f(k++) = std::max(rho(a), rho(a + 1));
      }
      traj = finer;
      rho = rho_f;
      gp = detail::endpoint_prior(traj.times, qc, s0, sg);
      gp.mean = traj.theta;
      rep.phases.push_back({"insert", 0, iti, 0.0, 0.0, traj.size()});
    }

    // settle the whole path once before hunting for outlier stretches
    {
      Objective w0 = detail::make_objective(world, gp, cfg);
      w0.set_rho(rho);
      if (w0.obstacle_unweighted(traj.theta) >= cfg.g_tol)
        detail::refine_range(world, qc, traj, rho, 0, traj.size() - 1, cfg, rng, rep);
    }

    std::vector<IndexRange> excluded;
    for (int k = 1; k <= cfg.n_uf; ++k) {
      Objective obj = detail::make_objective(world, gp, cfg);
      obj.set_rho(rho);
      std::vector<IndexRange> ranges;
      for (const auto& r : select_noisy_subtrajectories(obj, traj.theta, cfg.noisy_z))
        if (std::find(excluded.begin(), excluded.end(), r) == excluded.end()) ranges.push_back(r);
      if (ranges.empty()) break;
      for (const auto& r : ranges) detail::refine_range(world, qc, traj, rho, r.first, r.second, cfg, rng, rep);
      excluded = ranges;
    }

    // evenly spread collisions leave no outlier; treat the whole path as one range
    Objective whole = detail::make_objective(world, gp, cfg);
    whole.set_rho(rho);
    if (whole.obstacle_unweighted(traj.theta) >= cfg.g_tol)
      detail::refine_range(world, qc, traj, rho, 0, traj.size() - 1, cfg, rng, rep);

    const double fobs = whole.obstacle_unweighted(traj.theta);
    rep.continuous_safe = fobs < cfg.g_tol && continuous_safe(*world, qc, traj, cfg.g_tol, cfg.n_intervals);
    if (rep.continuous_safe) {
      rep.success = true;
      break;
    }
  }

  Objective fin = detail::make_objective(world, gp, cfg);
  fin.set_rho(rho);
  rep.final_f = fin.value(traj.theta);
  rep.final_fobs = fin.obstacle_unweighted(traj.theta);
  rep.n_support = traj.size();
  out.traj = traj;
  out.gp = gp;
  out.rho = rho;
  return out;
}

// ---------------------------------------------------------------------------
// Algorithm matrix
// ---------------------------------------------------------------------------

enum class Algorithm { IAgpsto, Agpsto, LReAgd, AgdFixed, Leapfrog, AstoOnly };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::IAgpsto: return "iagpsto";
    case Algorithm::Agpsto: return "agpsto";
    case Algorithm::LReAgd: return "lreagd";
    case Algorithm::AgdFixed: return "agd-fixed";
    case Algorithm::Leapfrog: return "leapfrog";
    case Algorithm::AstoOnly: return "asto-only";
  }
  return "?";
}

inline const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> all{Algorithm::IAgpsto, Algorithm::Agpsto,   Algorithm::LReAgd,
                                          Algorithm::AgdFixed, Algorithm::Leapfrog, Algorithm::AstoOnly};
  return all;
}

inline Algorithm parse_algorithm(const std::string& s) {
  for (Algorithm a : all_algorithms())
    if (s == to_string(a)) return a;
  throw ParameterError("unknown algorithm: " + s);
}

struct PlanOutcome {
  Trajectory traj;
  PlanReport report;
};

// Straight-line initial guess on a uniform dense grid.
inline AgpstoResult plan_dense(const std::shared_ptr<const World>& world, const Vec& start, const Vec& goal,
                               Algorithm algo, PlannerConfig cfg, Rng& rng) {
  const int d = world->robot.dof();
  const Mat qc = detail::qc_matrix(cfg, d);
  const Vec times = uniform_times(cfg.dense_gaps, cfg.total_time / cfg.dense_gaps);
  const Trajectory line = straight_line(start, goal, times);
  const GPModel gp = detail::endpoint_prior(times, qc, line.state(0), line.state(line.size() - 1));
  const Objective obj = detail::make_objective(world, gp, cfg);
  switch (algo) {
    case Algorithm::Agpsto: break;
    case Algorithm::LReAgd: cfg.use_asto = false; break;
    case Algorithm::AgdFixed:
      cfg.use_asto = false;
      cfg.fixed_lipschitz = true;
      break;
    case Algorithm::Leapfrog:
      cfg.use_asto = false;
      cfg.agd.rule = StepRule::Leapfrog;
      break;
    case Algorithm::AstoOnly: return asto_only_plan(obj, line.theta, cfg, rng);
    case Algorithm::IAgpsto: throw ParameterError("plan_dense: iagpsto is incremental");
  }
  return agpsto_plan(obj, line.theta, cfg, rng);
}

// One planning problem end to end. Success requires the collision cost below
// g_tol and the interval-state check; numerical failures become failed runs.
inline PlanOutcome plan_problem(const std::shared_ptr<const World>& world, const Vec& start, const Vec& goal,
                                Algorithm algo, const PlannerConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  PlanOutcome out;
  const Mat qc = detail::qc_matrix(cfg, world->robot.dof());
  try {
    if (algo == Algorithm::IAgpsto) {
      IompResult r = iomp_plan(world, start, goal, cfg, rng);
      out.traj = std::move(r.traj);
      out.report = std::move(r.report);
    } else {
      AgpstoResult r = plan_dense(world, start, goal, algo, cfg, rng);
      out.traj = std::move(r.traj);
      out.report = std::move(r.report);
      out.report.continuous_safe = continuous_safe(*world, qc, out.traj, cfg.g_tol, cfg.n_intervals);
    }
  } catch (const NumericalError& e) {
    out.report.error = e.what();
    out.report.success = false;
    out.report.continuous_safe = false;
    return out;
  }
  out.report.success = out.report.final_fobs < cfg.g_tol && out.report.continuous_safe;
  return out;
}

}  // namespace agpsto
