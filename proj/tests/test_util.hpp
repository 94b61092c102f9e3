#pragma once

#include <agpsto/objective.hpp>

#include <memory>

namespace agpsto::testing {

inline std::shared_ptr<World> point_world(const WorldSpec& spec, double radius = 0.05) {
  auto w = std::make_shared<World>();
  w->robot = RobotModel::point(radius, spec.lo, spec.hi);
  w->grid = build_sdf(spec);
  return w;
}

inline std::shared_ptr<World> arm_world(const WorldSpec& spec) {
  auto w = std::make_shared<World>();
  w->robot = RobotModel::planar_arm(Vec2(0.0, 0.0), {0.4, 0.3, 0.2}, 3, 0.04);
  w->grid = build_sdf(spec);
  return w;
}

inline Vec state_of(const Vec& q, const Vec& v) {
  Vec s(q.size() + v.size());
  s << q, v;
  return s;
}

// Straight-line support trajectory plus the matching endpoint-conditioned GP.
struct LineSetup {
  Trajectory traj;
  GPModel gp;
};

inline LineSetup line_setup(const Vec& q0, const Vec& qg, int n_gaps, double dt) {
  const Vec times = uniform_times(n_gaps, dt);
  LineSetup s;
  s.traj = straight_line(q0, qg, times);
  const int d = static_cast<int>(q0.size());
  s.gp = build_prior(times, Mat::Identity(d, d), s.traj.state(0), s.traj.state(n_gaps), Mat::Identity(2 * d, 2 * d));
  return s;
}

inline Mat random_spd(int n, Rng& rng, double floor = 0.1) {
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = standard_normal(rng);
  return a * a.transpose() + floor * Mat::Identity(n, n);
}

inline Vec random_vec(int n, Rng& rng, double scale = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * standard_normal(rng);
  return v;
}

}  // namespace agpsto::testing
