#pragma once

#include <agpsto/objective.hpp>
#include <agpsto/planner.hpp>
#include <agpsto/world.hpp>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace agpsto {

using Json = nlohmann::json;

inline constexpr int kScenarioSchemaVersion = 1;

struct Scenario {
  std::string id;
  std::string path;
  WorldSpec world;
  RobotModel robot;
  CollisionParams params;
  Vec start, goal;
  char class_hint = 'A';
  int repeat = 5;
  Json config = Json::object();  // per-scenario overrides, applied after the global config

  std::shared_ptr<const World> build_world() const {
    auto w = std::make_shared<World>();
    w->robot = robot;
    w->grid = build_sdf(world);
    w->params = params;
    return w;
  }
};

namespace detail {

inline Vec2 read_vec2(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw ParameterError(std::string(what) + ": expected [x, y]");
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

inline Vec read_vec(const Json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw ParameterError(std::string(what) + ": expected a number array");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
  return v;
}

inline std::vector<double> read_list(const Json& j, const char* what) {
  if (!j.is_array()) throw ParameterError(std::string(what) + ": expected an array");
  return j.get<std::vector<double>>();
}

template <class T>
void set_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline void check_keys(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ParameterError(where + ": unknown key '" + it.key() + "'");
  }
}

inline RobotModel read_robot(const Json& j, const WorldSpec& w) {
  const std::string type = j.at("type").get<std::string>();
  RobotModel r;
  if (type == "point") {
    check_keys(j, {"type", "radius", "qmin", "qmax"}, "robot");
    r = RobotModel::point(j.value("radius", 0.05), w.lo, w.hi);
  } else if (type == "planar_arm") {
    check_keys(j, {"type", "base", "links", "balls_per_link", "radius", "qmin", "qmax", "masses", "com_frac", "izz"},
               "robot");
    const Vec2 base = j.contains("base") ? read_vec2(j.at("base"), "robot.base") : Vec2::Zero();
    r = RobotModel::planar_arm(base, read_list(j.at("links"), "robot.links"), j.value("balls_per_link", 3),
                               j.value("radius", 0.04));
    if (j.contains("masses")) r.masses = read_list(j.at("masses"), "robot.masses");
    if (j.contains("com_frac")) r.com_frac = read_list(j.at("com_frac"), "robot.com_frac");
    if (j.contains("izz")) r.izz = read_list(j.at("izz"), "robot.izz");
  } else {
    throw ParameterError("robot.type must be 'point' or 'planar_arm'");
  }
  if (j.contains("qmin")) r.qmin = read_vec(j.at("qmin"), "robot.qmin");
  if (j.contains("qmax")) r.qmax = read_vec(j.at("qmax"), "robot.qmax");
  r.validate();
  return r;
}

inline WorldSpec read_world(const Json& j) {
  check_keys(j, {"lo", "hi", "resolution", "discs", "boxes", "capsules"}, "world");
  WorldSpec w;
  if (j.contains("lo")) w.lo = read_vec2(j.at("lo"), "world.lo");
  if (j.contains("hi")) w.hi = read_vec2(j.at("hi"), "world.hi");
  set_if(j, "resolution", w.resolution);
  for (const auto& d : j.value("discs", Json::array()))
    w.discs.push_back(Disc{read_vec2(d.at("center"), "disc.center"), d.at("radius").get<double>()});
  for (const auto& b : j.value("boxes", Json::array()))
    w.boxes.push_back(Box{read_vec2(b.at("center"), "box.center"), read_vec2(b.at("half"), "box.half")});
  for (const auto& c : j.value("capsules", Json::array()))
    w.capsules.push_back(
        Capsule{read_vec2(c.at("a"), "capsule.a"), read_vec2(c.at("b"), "capsule.b"), c.at("radius").get<double>()});
  require(w.resolution > 0.0 && (w.hi - w.lo).minCoeff() > 0.0, "world: bad bounds or resolution");
  return w;
}

}  // namespace detail

// Applies a JSON object of overrides to cfg. Unknown keys are errors.
inline void apply_config(PlannerConfig& cfg, const Json& j) {
  using detail::set_if;
  if (j.is_null()) return;
  if (!j.is_object()) throw ParameterError("config must be an object");
  detail::check_keys(j,
                     {"n_pen", "n_lip", "kappa", "g_tol", "rho0", "rho_max", "limit_weight", "qc", "total_time", "n_iti",
                      "tau_ip", "n_p0", "obs_intervals", "n_intervals", "n_uf", "noisy_z", "dense_gaps", "max_asto", "max_iterations",
                      "fixed_lip", "agd", "asto", "schema_version"},
                     "config");
  set_if(j, "n_pen", cfg.n_pen);
  set_if(j, "n_lip", cfg.n_lip);
  set_if(j, "kappa", cfg.kappa);
  set_if(j, "g_tol", cfg.g_tol);
  set_if(j, "rho0", cfg.rho0);
  set_if(j, "rho_max", cfg.rho_max);
  set_if(j, "obs_intervals", cfg.obs_intervals);
  set_if(j, "limit_weight", cfg.limit_weight);
  set_if(j, "qc", cfg.qc);
  set_if(j, "total_time", cfg.total_time);
  set_if(j, "n_iti", cfg.n_iti);
  set_if(j, "tau_ip", cfg.tau_ip);
  set_if(j, "n_p0", cfg.n_p0);
  set_if(j, "n_intervals", cfg.n_intervals);
  set_if(j, "n_uf", cfg.n_uf);
  set_if(j, "noisy_z", cfg.noisy_z);
  set_if(j, "dense_gaps", cfg.dense_gaps);
  set_if(j, "max_asto", cfg.max_asto);
  set_if(j, "max_iterations", cfg.max_iterations);
  set_if(j, "fixed_lip", cfg.fixed_lip);
  if (j.contains("agd")) {
    const Json& a = j.at("agd");
    detail::check_keys(a,
                       {"theta1", "theta2", "c_low", "c_up", "n_ag", "f_tol", "step_tol", "grad_tol", "phi_tol",
                        "l_tol", "max_reestimates", "deterministic"},
                       "config.agd");
    set_if(a, "theta1", cfg.agd.theta1);
    set_if(a, "theta2", cfg.agd.theta2);
    set_if(a, "c_low", cfg.agd.c_low);
    set_if(a, "c_up", cfg.agd.c_up);
    set_if(a, "n_ag", cfg.agd.n_ag);
    set_if(a, "f_tol", cfg.agd.f_tol);
    set_if(a, "step_tol", cfg.agd.step_tol);
    set_if(a, "grad_tol", cfg.agd.grad_tol);
    set_if(a, "phi_tol", cfg.agd.phi_tol);
    set_if(a, "l_tol", cfg.agd.l_tol);
    set_if(a, "max_reestimates", cfg.agd.max_reestimates);
    set_if(a, "deterministic", cfg.agd.deterministic);
  }
  if (j.contains("asto")) {
    const Json& a = j.at("asto");
    detail::check_keys(a,
                       {"k_samples", "m_star", "h_p", "l_r", "mode", "alpha_mu", "alpha_kappa", "k_upper_tol",
                        "k_lower_tol", "n_asto_min", "n_asto_max", "cf_tol", "k_eps_scale", "importance",
                        "deterministic"},
                       "config.asto");
    set_if(a, "k_samples", cfg.asto.k_samples);
    set_if(a, "m_star", cfg.asto.m_star);
    set_if(a, "h_p", cfg.asto.h_p);
    set_if(a, "l_r", cfg.asto.l_r);
    if (a.contains("mode")) {
      const std::string m = a.at("mode").get<std::string>();
      if (m == "ama") cfg.asto.mode = PolicyMode::AMA;
      else if (m == "ema") cfg.asto.mode = PolicyMode::EMA;
      else if (m == "qadam") cfg.asto.mode = PolicyMode::QAdam;
      else throw ParameterError("config.asto.mode must be ama, ema or qadam");
    }
    set_if(a, "alpha_mu", cfg.asto.alpha_mu);
    set_if(a, "alpha_kappa", cfg.asto.alpha_kappa);
    set_if(a, "k_upper_tol", cfg.asto.k_upper_tol);
    set_if(a, "k_lower_tol", cfg.asto.k_lower_tol);
    set_if(a, "n_asto_min", cfg.asto.n_asto_min);
    set_if(a, "n_asto_max", cfg.asto.n_asto_max);
    set_if(a, "cf_tol", cfg.asto.cf_tol);
    set_if(a, "k_eps_scale", cfg.asto.k_eps_scale);
    set_if(a, "importance", cfg.asto.importance);
    set_if(a, "deterministic", cfg.asto.deterministic);
  }
  cfg.validate();
}

inline PlannerConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParameterError("config parse error in " + path + ": " + e.what());
  }
  PlannerConfig cfg;
  apply_config(cfg, j);
  return cfg;
}

inline Scenario parse_scenario(const Json& j) {
  try {
    detail::check_keys(j,
                       {"schema_version", "id", "class_hint", "repeat", "world", "robot", "collision", "start", "goal",
                        "config", "note"},
                       "scenario");
    const int ver = j.at("schema_version").get<int>();
    if (ver != kScenarioSchemaVersion)
      throw ParameterError("unsupported scenario schema_version " + std::to_string(ver));
    Scenario s;
    s.id = j.at("id").get<std::string>();
    const std::string hint = j.value("class_hint", std::string("A"));
    if (hint.size() != 1 || hint[0] < 'A' || hint[0] > 'C') throw ParameterError("class_hint must be A, B or C");
    s.class_hint = hint[0];
    s.repeat = j.value("repeat", 5);
    require(s.repeat >= 1, "scenario: repeat must be positive");
    s.world = detail::read_world(j.at("world"));
    s.robot = detail::read_robot(j.at("robot"), s.world);
    if (j.contains("collision")) {
      detail::check_keys(j.at("collision"), {"eps", "eps_d"}, "collision");
      detail::set_if(j.at("collision"), "eps", s.params.eps);
      detail::set_if(j.at("collision"), "eps_d", s.params.eps_d);
      s.params.validate();
    }
    s.start = detail::read_vec(j.at("start"), "start");
    s.goal = detail::read_vec(j.at("goal"), "goal");
    require(s.start.size() == s.robot.dof() && s.goal.size() == s.robot.dof(), "scenario: start/goal dof mismatch");
    if (j.contains("config")) {
      s.config = j.at("config");
      PlannerConfig probe;
      apply_config(probe, s.config);
    }
    return s;
  } catch (const Json::exception& e) {
    throw ParameterError(std::string("scenario: ") + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open scenario: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParameterError("scenario parse error in " + path + ": " + e.what());
  }
  Scenario s = parse_scenario(j);
  s.path = path;
  return s;
}

// All *.json files in dir, sorted by file name.
inline std::vector<Scenario> load_scenario_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ParameterError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path().string());
  std::sort(files.begin(), files.end());
  std::vector<Scenario> out;
  for (const auto& f : files) out.push_back(load_scenario(f));
  return out;
}

inline PlannerConfig scenario_config(const PlannerConfig& base, const Scenario& s) {
  PlannerConfig cfg = base;
  apply_config(cfg, s.config);
  return cfg;
}

// Classification of the straight-line initial guess on the incremental
// planner's first support grid.
inline Classification classify_scenario(const Scenario& s, const PlannerConfig& cfg) {
  const auto world = s.build_world();
  const int d = s.robot.dof();
  const double ratio = (s.goal - s.start).norm() / (s.robot.qmax - s.robot.qmin).norm();
  const int n_p = cfg.n_p0 > 0 ? cfg.n_p0 : initial_waypoints(ratio);
  const Vec times = uniform_times(n_p + 1, cfg.total_time / (n_p + 1));
  const Trajectory line = straight_line(s.start, s.goal, times);
  const GPModel gp = build_prior(times, cfg.qc * Mat::Identity(d, d), line.state(0), line.state(line.size() - 1),
                                 Mat::Identity(2 * d, 2 * d));
  const Objective obj(world, gp, 1.0, cfg.limit_weight);
  return classify(obj, line.theta, cfg.n_intervals > 0 ? cfg.n_intervals : 8);
}

}  // namespace agpsto
