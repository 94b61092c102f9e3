#include <agpsto/bench.hpp>
#include <agpsto/scenario.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace agpsto;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 1;
constexpr int kExitFailed = 2;

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw ParameterError("bad number in list: " + item);
    out.push_back(v);
  }
  if (out.empty()) throw ParameterError("empty list: " + s);
  return out;
}

PlannerConfig base_config(const std::string& path) { return path.empty() ? PlannerConfig{} : load_config(path); }

int cmd_plan(const std::string& scenario_path, const std::string& algo_name, std::uint64_t seed,
             const std::string& out_path, const std::string& config_path, const std::string& trace_path) {
  Scenario s;
  PlannerConfig cfg;
  Algorithm algo;
  try {
    s = load_scenario(scenario_path);
    cfg = base_config(config_path);
    algo = parse_algorithm(algo_name);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  }
  const RunOutput o = run_one(s, algo, cfg, seed);
  const RunRecord& r = o.record;
  write_csv_header(std::cout, true);
  write_csv_row(std::cout, r, true);
  if (!out_path.empty()) {
    Json j;
    j["record"] = {{"scenario", r.scenario}, {"class", std::string(1, r.cls)}, {"algo", to_string(r.algo)},
                   {"seed", r.seed},         {"success", r.success},           {"continuous_safe", r.continuous_safe},
                   {"time_s", r.wall_time},  {"iterations", r.iterations},     {"restarts", r.restarts},
                   {"asto_phases", r.asto_phases}, {"n_support", r.n_support}, {"final_f", r.final_f},
                   {"final_fobs", r.final_fobs},   {"error", r.error}};
    if (o.traj.size() > 0) j["trajectory"] = trajectory_json(o.traj);
    std::ofstream f(out_path);
    if (!f) {
      std::cerr << "error: cannot write " << out_path << '\n';
      return kExitParse;
    }
    f << j.dump(2) << '\n';
  }
  if (!trace_path.empty()) {
    std::ofstream f(trace_path);
    f << trace_json(o).dump() << '\n';
  }
  return r.success ? kExitOk : kExitFailed;
}

struct BenchArgs {
  std::string dir;
  std::vector<std::string> algos;
  std::vector<std::string> scenario_ids;
  std::vector<std::string> classes;
  int seeds = 0;
  std::uint64_t master = 1;
  std::string csv, summary, config, trace_dir;
  std::vector<std::string> grid;
  bool omit_timing = false;
};

int cmd_bench(const BenchArgs& a) {
  std::vector<Scenario> all;
  PlannerConfig cfg;
  std::vector<Algorithm> algos;
  std::vector<double> t1 = reference_theta1(), t2 = reference_theta2();
  try {
    all = load_scenario_dir(a.dir);
    cfg = base_config(a.config);
    for (const auto& n : a.algos) algos.push_back(parse_algorithm(n));
    if (algos.empty()) algos = all_algorithms();
    for (const auto& g : a.grid) {
      const auto eq = g.find('=');
      if (eq == std::string::npos) throw ParameterError("grid entries look like theta1=1,2");
      const std::string key = g.substr(0, eq);
      if (key == "theta1") t1 = parse_list(g.substr(eq + 1));
      else if (key == "theta2") t2 = parse_list(g.substr(eq + 1));
      else throw ParameterError("unknown grid key: " + key);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  }
  std::vector<Scenario> scen;
  for (const auto& s : all) {
    if (!a.scenario_ids.empty() &&
        std::find(a.scenario_ids.begin(), a.scenario_ids.end(), s.id) == a.scenario_ids.end())
      continue;
    if (!a.classes.empty() &&
        std::find(a.classes.begin(), a.classes.end(), std::string(1, s.class_hint)) == a.classes.end())
      continue;
    scen.push_back(s);
  }
  const bool with_time = !a.omit_timing;
  const int threads = thread_count();

  auto open_or_stdout = [](const std::string& path, std::ofstream& f) -> std::ostream& {
    if (path.empty()) return std::cout;
    f.open(path);
    if (!f) throw ParameterError("cannot write " + path);
    return f;
  };

  try {
    if (!a.grid.empty()) {
      const Algorithm algo = a.algos.empty() ? Algorithm::LReAgd : algos.front();
      const GridResult g = run_grid(scen, algo, cfg, t1, t2, a.master, a.seeds, threads);
      std::ofstream cf, sf;
      std::ostream& cs = open_or_stdout(a.csv, cf);
      write_csv_header(cs, with_time);
      for (const auto& r : g.records) write_csv_row(cs, r, with_time);
      std::ostream& ss = open_or_stdout(a.summary, sf);
      write_grid(ss, g, with_time);
      const auto b = g.best();
      ss << "best," << fmt_double(g.theta1[b.first]) << ',' << fmt_double(g.theta2[b.second]) << '\n';
      return kExitOk;
    }
    const auto jobs = make_jobs(scen, algos, a.master, a.seeds);
    const auto outs = run_jobs(jobs, cfg, threads);
    std::vector<RunRecord> recs;
    for (const auto& o : outs) recs.push_back(o.record);
    std::ofstream cf, sf;
    std::ostream& cs = open_or_stdout(a.csv, cf);
    write_csv_header(cs, with_time);
    for (const auto& r : recs) write_csv_row(cs, r, with_time);
    std::ostream& ss = open_or_stdout(a.summary, sf);
    write_summary(ss, summarize(recs), with_time);
    if (!a.trace_dir.empty()) {
      std::filesystem::create_directories(a.trace_dir);
      for (const auto& o : outs) {
        const std::string name = o.record.scenario + "_" + to_string(o.record.algo) + "_" +
                                 std::to_string(o.record.seed) + ".json";
        std::ofstream f(std::filesystem::path(a.trace_dir) / name);
        f << trace_json(o).dump() << '\n';
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  }
  return kExitOk;
}

int cmd_classify(const std::string& scenario_path, const std::string& config_path) {
  try {
    const Scenario s = load_scenario(scenario_path);
    const PlannerConfig cfg = scenario_config(base_config(config_path), s);
    const Classification c = classify_scenario(s, cfg);
    std::printf("%s %.2f | %.2f %c (hint %c)\n", s.id.c_str(), c.fbar, c.stuck, class_letter(c.label), s.class_hint);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AGP-STO trajectory planner and benchmark harness"};
  app.require_subcommand(1);

  auto* plan = app.add_subcommand("plan", "Run one algorithm on one scenario");
  std::string p_scenario, p_algo = "iagpsto", p_out, p_config, p_trace;
  std::uint64_t p_seed = 1;
  plan->add_option("--scenario", p_scenario, "Scenario JSON file")->required();
  plan->add_option("--algo", p_algo, "iagpsto|agpsto|lreagd|agd-fixed|leapfrog|asto-only");
  plan->add_option("--seed", p_seed, "RNG seed");
  plan->add_option("--out", p_out, "Write trajectory and run record as JSON");
  plan->add_option("--config", p_config, "JSON config overriding defaults");
  plan->add_option("--trace", p_trace, "Write the per-run trace as JSON");

  auto* bench = app.add_subcommand("bench", "Algorithm x scenario x seed sweep");
  BenchArgs b;
  bench->add_option("--scenarios", b.dir, "Scenario directory")->required();
  bench->add_option("--algos", b.algos, "Algorithms (default: all)")->delimiter(',');
  bench->add_option("--only", b.scenario_ids, "Restrict to these scenario ids")->delimiter(',');
  bench->add_option("--classes", b.classes, "Restrict to these class hints")->delimiter(',');
  bench->add_option("--seeds", b.seeds, "Seeds per scenario (default: scenario repeat count)");
  bench->add_option("--master-seed", b.master, "Master seed");
  bench->add_option("--csv", b.csv, "Run records CSV (default stdout)");
  bench->add_option("--summary", b.summary, "Summary CSV (default stdout)");
  bench->add_option("--config", b.config, "JSON config overriding defaults");
  bench->add_option("--trace-dir", b.trace_dir, "Directory for per-run JSON traces");
  bench->add_option("--grid", b.grid, "Tuning grid, e.g. theta1=1,2 theta2=0,0.25");
  bench->add_flag("--omit-timing", b.omit_timing, "Drop wall-time columns for byte-stable output");

  auto* cls = app.add_subcommand("classify", "Print Fbar | stuck ratio and class label");
  std::string c_scenario, c_config;
  cls->add_option("--scenario", c_scenario, "Scenario JSON file")->required();
  cls->add_option("--config", c_config, "JSON config overriding defaults");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitParse;
  }

  if (*plan) return cmd_plan(p_scenario, p_algo, p_seed, p_out, p_config, p_trace);
  if (*bench) return cmd_bench(b);
  if (*cls) return cmd_classify(c_scenario, c_config);
  return kExitParse;
}
