#pragma once

#include <agpsto/planner.hpp>
#include <agpsto/scenario.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace agpsto {

struct RunRecord {
  std::string scenario;
  char cls = 'A';
  Algorithm algo = Algorithm::IAgpsto;
  std::uint64_t seed = 0;
  bool success = false;
  bool continuous_safe = false;
  double wall_time = 0.0;
  int iterations = 0;
  int restarts = 0;
  int asto_phases = 0;
  int n_support = 0;
  double final_f = 0.0;
  double final_fobs = 0.0;
  std::string error;
};

struct RunOutput {
  RunRecord record;
  Trajectory traj;
  PlanReport report;
};

inline std::uint64_t string_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Seed for repetition rep of a scenario, shared by all algorithms.
inline std::uint64_t run_seed(std::uint64_t master, const std::string& scenario, int rep) {
  return derive_seed(master, string_hash(scenario), static_cast<std::uint64_t>(rep));
}

inline RunOutput run_one(const Scenario& s, Algorithm algo, const PlannerConfig& base, std::uint64_t seed) {
  const PlannerConfig cfg = scenario_config(base, s);
  const auto world = s.build_world();
  RunOutput out;
  const auto t0 = std::chrono::steady_clock::now();
  PlanOutcome po = plan_problem(world, s.start, s.goal, algo, cfg, seed);
  const auto t1 = std::chrono::steady_clock::now();
  RunRecord& r = out.record;
  r.scenario = s.id;
  r.cls = s.class_hint;
  r.algo = algo;
  r.seed = seed;
  r.wall_time = std::chrono::duration<double>(t1 - t0).count();
  r.success = po.report.success;
  r.continuous_safe = po.report.continuous_safe;
  r.iterations = po.report.iterations;
  r.restarts = po.report.restarts;
  r.asto_phases = po.report.asto_phases;
  r.n_support = po.report.n_support;
  r.final_f = po.report.final_f;
  r.final_fobs = po.report.final_fobs;
  r.error = po.report.error;
  out.traj = std::move(po.traj);
  out.report = std::move(po.report);
  return out;
}

inline int thread_count() {
  if (const char* env = std::getenv("AGPSTO_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

// Runs fn(i) for i in [0, n) on up to threads workers. Results are written by
// index, so output order never depends on scheduling.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

struct SweepJob {
  const Scenario* scenario = nullptr;
  Algorithm algo = Algorithm::IAgpsto;
  std::uint64_t seed = 0;
};

inline std::vector<SweepJob> make_jobs(const std::vector<Scenario>& scenarios, const std::vector<Algorithm>& algos,
                                       std::uint64_t master, int seeds_override = 0) {
  std::vector<SweepJob> jobs;
  for (const auto& s : scenarios)
    for (Algorithm a : algos) {
      const int reps = seeds_override > 0 ? seeds_override : s.repeat;
      for (int k = 0; k < reps; ++k) jobs.push_back({&s, a, run_seed(master, s.id, k)});
    }
  return jobs;
}

// Never aborts: a planner exception becomes a failed record.
inline std::vector<RunOutput> run_jobs(const std::vector<SweepJob>& jobs, const PlannerConfig& cfg, int threads) {
  std::vector<RunOutput> out(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), threads, [&](int i) {
    const SweepJob& j = jobs[static_cast<std::size_t>(i)];
    try {
      out[static_cast<std::size_t>(i)] = run_one(*j.scenario, j.algo, cfg, j.seed);
    } catch (const std::exception& e) {
      RunRecord& r = out[static_cast<std::size_t>(i)].record;
      r.scenario = j.scenario->id;
      r.cls = j.scenario->class_hint;
      r.algo = j.algo;
      r.seed = j.seed;
      r.error = e.what();
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string o = "\"";
  for (char c : s) {
    if (c == '"') o += '"';
    o += c;
  }
  return o + "\"";
}

inline void write_csv_header(std::ostream& os, bool with_time) {
  os << "scenario,class,algo,seed,success,continuous_safe,";
  if (with_time) os << "time_s,";
  os << "iterations,restarts,asto_phases,n_support,final_f,final_fobs,error\n";
}

inline void write_csv_row(std::ostream& os, const RunRecord& r, bool with_time) {
  os << csv_escape(r.scenario) << ',' << r.cls << ',' << to_string(r.algo) << ',' << r.seed << ','
     << (r.success ? 1 : 0) << ',' << (r.continuous_safe ? 1 : 0) << ',';
  if (with_time) os << fmt_double(r.wall_time) << ',';
  os << r.iterations << ',' << r.restarts << ',' << r.asto_phases << ',' << r.n_support << ','
     << fmt_double(r.final_f) << ',' << fmt_double(r.final_fobs) << ',' << csv_escape(r.error) << '\n';
}

struct SummaryRow {
  Algorithm algo = Algorithm::IAgpsto;
  char cls = 'A';
  int runs = 0;
  int successes = 0;
  double mean_time = 0.0;  // over successful runs
  double std_time = 0.0;
  double success_pct() const { return runs > 0 ? 100.0 * successes / runs : 0.0; }
};

inline std::vector<SummaryRow> summarize(const std::vector<RunRecord>& recs) {
  std::map<std::pair<int, char>, std::vector<const RunRecord*>> groups;
  for (const auto& r : recs) groups[{static_cast<int>(r.algo), r.cls}].push_back(&r);
  std::vector<SummaryRow> out;
  for (const auto& [key, rs] : groups) {
    SummaryRow row;
    row.algo = static_cast<Algorithm>(key.first);
    row.cls = key.second;
    row.runs = static_cast<int>(rs.size());
    std::vector<double> times;
    for (const RunRecord* r : rs)
      if (r->success) {
        ++row.successes;
        times.push_back(r->wall_time);
      }
    if (!times.empty()) {
      double m = 0.0;
      for (double t : times) m += t;
      m /= times.size();
      double v = 0.0;
      for (double t : times) v += (t - m) * (t - m);
      row.mean_time = m;
      row.std_time = times.size() > 1 ? std::sqrt(v / (times.size() - 1)) : 0.0;
    }
    out.push_back(row);
  }
  return out;
}

inline void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows, bool with_time) {
  os << "algo,class,runs,successes,success_pct";
  if (with_time) os << ",mean_time_s,std_time_s";
  os << '\n';
  for (const auto& r : rows) {
    os << to_string(r.algo) << ',' << r.cls << ',' << r.runs << ',' << r.successes << ',' << fmt_double(r.success_pct());
    if (with_time) os << ',' << fmt_double(r.mean_time) << ',' << fmt_double(r.std_time);
    os << '\n';
  }
}

inline Json trace_json(const RunOutput& o) {
  Json j;
  j["scenario"] = o.record.scenario;
  j["algo"] = to_string(o.record.algo);
  j["seed"] = o.record.seed;
  j["success"] = o.record.success;
  j["f_trace"] = o.report.f_trace;
  j["lip_trace"] = o.report.lip_trace;
  Json phases = Json::array();
  for (const auto& p : o.report.phases)
    phases.push_back({{"kind", p.kind}, {"pen", p.pen}, {"liter", p.liter}, {"f", p.f}, {"lip", p.lip},
                      {"iterations", p.iterations}});
  j["phases"] = phases;
  return j;
}

inline Json trajectory_json(const Trajectory& t) {
  Json j;
  j["dof"] = t.dof;
  j["times"] = std::vector<double>(t.times.data(), t.times.data() + t.times.size());
  Json states = Json::array();
  for (int i = 0; i < t.size(); ++i) {
    const Vec s = t.state(i);
    states.push_back(std::vector<double>(s.data(), s.data() + s.size()));
  }
  j["states"] = states;
  return j;
}

// ---------------------------------------------------------------------------
// Tuning grid over the AGD step-size constants
// ---------------------------------------------------------------------------

struct GridCell {
  double theta1 = 0.0;
  double theta2 = 0.0;
  bool feasible = false;
  int runs = 0;
  int successes = 0;
  double mean_time = 0.0;        // over successful runs
  double mean_iterations = 0.0;  // over successful runs
  double success_pct() const { return runs > 0 ? 100.0 * successes / runs : 0.0; }
};

struct GridResult {
  std::vector<double> theta1, theta2;
  std::vector<GridCell> cells;  // row-major over theta1, then theta2
  std::vector<RunRecord> records;

  const GridCell& at(std::size_t i, std::size_t j) const { return cells[i * theta2.size() + j]; }

  // Highest success rate; ties go to fewer mean iterations, which unlike
  // wall time is reproducible.
  std::pair<std::size_t, std::size_t> best() const {
    std::pair<std::size_t, std::size_t> b{0, 0};
    const GridCell* bc = nullptr;
    for (std::size_t i = 0; i < theta1.size(); ++i)
      for (std::size_t j = 0; j < theta2.size(); ++j) {
        const GridCell& c = at(i, j);
        if (!c.feasible || c.successes == 0) continue;
        if (!bc || c.successes > bc->successes ||
            (c.successes == bc->successes && c.mean_iterations < bc->mean_iterations)) {
          bc = &c;
          b = {i, j};
        }
      }
    return b;
  }
};

inline GridResult run_grid(const std::vector<Scenario>& scenarios, Algorithm algo, const PlannerConfig& base,
                           const std::vector<double>& t1s, const std::vector<double>& t2s, std::uint64_t master,
                           int seeds, int threads) {
  GridResult g;
  g.theta1 = t1s;
  g.theta2 = t2s;
  struct Job {
    std::size_t cell;
    const Scenario* s;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::vector<PlannerConfig> cfgs;
  for (double t1 : t1s)
    for (double t2 : t2s) {
      GridCell c;
      c.theta1 = t1;
      c.theta2 = t2;
      PlannerConfig cfg = base;
      cfg.agd.theta1 = t1;
      cfg.agd.theta2 = t2;
      c.feasible = t1 >= 1.0 && t2 >= 0.0 && cfg.agd.feasibility() > 0.0;
      g.cells.push_back(c);
      cfgs.push_back(cfg);
      if (!c.feasible) continue;
      for (const auto& s : scenarios)
        for (int k = 0; k < (seeds > 0 ? seeds : s.repeat); ++k)
          jobs.push_back({g.cells.size() - 1, &s, run_seed(master, s.id, k)});
    }
  std::vector<RunOutput> outs(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), threads, [&](int i) {
    const Job& j = jobs[static_cast<std::size_t>(i)];
    outs[static_cast<std::size_t>(i)] = run_one(*j.s, algo, cfgs[j.cell], j.seed);
  });
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    GridCell& c = g.cells[jobs[i].cell];
    const RunRecord& r = outs[i].record;
    ++c.runs;
    if (r.success) {
      ++c.successes;
      c.mean_time += r.wall_time;
      c.mean_iterations += r.iterations;
    }
    g.records.push_back(r);
  }
  for (auto& c : g.cells)
    if (c.successes > 0) {
      c.mean_time /= c.successes;
      c.mean_iterations /= c.successes;
    }
  return g;
}

// success%|mean time matrix; infeasible cells print "-".
inline void write_grid(std::ostream& os, const GridResult& g, bool with_time) {
  os << "theta1\\theta2";
  for (double t2 : g.theta2) os << ',' << fmt_double(t2);
  os << '\n';
  for (std::size_t i = 0; i < g.theta1.size(); ++i) {
    os << fmt_double(g.theta1[i]);
    for (std::size_t j = 0; j < g.theta2.size(); ++j) {
      const GridCell& c = g.at(i, j);
      os << ',';
      if (!c.feasible) {
        os << '-';
        continue;
      }
      char buf[64];
      if (with_time)
        std::snprintf(buf, sizeof buf, "%.0f|%.3f", c.success_pct(), c.mean_time);
      else
        std::snprintf(buf, sizeof buf, "%.0f|%.1f", c.success_pct(), c.mean_iterations);
      os << buf;
    }
    os << '\n';
  }
}

inline const std::vector<double>& reference_theta1() {
  static const std::vector<double> v{1.0, 1.414, 2.0, 2.828, 4.0, 5.657};
  return v;
}

inline const std::vector<double>& reference_theta2() {
  static const std::vector<double> v{0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.875};
  return v;
}

}  // namespace agpsto
