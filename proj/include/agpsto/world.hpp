#pragma once

#include <agpsto/core.hpp>
#include <agpsto/trajgp.hpp>

#include <algorithm>
#include <limits>

namespace agpsto {

// ---------------------------------------------------------------------------
// Obstacles and signed distance grid
// ---------------------------------------------------------------------------

struct Disc {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
};

// Axis-aligned box given by center and half extents.
struct Box {
  Vec2 center = Vec2::Zero();
  Vec2 half = Vec2::Zero();
};

struct Capsule {
  Vec2 a = Vec2::Zero();
  Vec2 b = Vec2::Zero();
  double radius = 0.0;
};

struct WorldSpec {
  Vec2 lo = Vec2(-1.0, -1.0);
  Vec2 hi = Vec2(1.0, 1.0);
  double resolution = 0.01;
  std::vector<Disc> discs;
  std::vector<Box> boxes;
  std::vector<Capsule> capsules;

  bool empty() const { return discs.empty() && boxes.empty() && capsules.empty(); }
};

inline double sdf_disc(const Disc& o, const Vec2& p) { return (p - o.center).norm() - o.radius; }

inline double sdf_box(const Box& o, const Vec2& p) {
  const Vec2 q = (p - o.center).cwiseAbs() - o.half;
  return q.cwiseMax(0.0).norm() + std::min(std::max(q.x(), q.y()), 0.0);
}

inline double sdf_capsule(const Capsule& o, const Vec2& p) {
  const Vec2 ab = o.b - o.a;
  const double len2 = ab.squaredNorm();
  const double h = len2 > 0.0 ? std::clamp((p - o.a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - o.a - h * ab).norm() - o.radius;
}

// Union of all primitives; +inf-free large value for an empty world.
inline double analytic_sdf(const WorldSpec& w, const Vec2& p) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& o : w.discs) d = std::min(d, sdf_disc(o, p));
  for (const auto& o : w.boxes) d = std::min(d, sdf_box(o, p));
  for (const auto& o : w.capsules) d = std::min(d, sdf_capsule(o, p));
  if (!std::isfinite(d)) d = 1e3;
  return d;
}

// Samples at cell centers, bilinear in between. Outside the sampled hull the
// query is clamped to the hull and the Euclidean distance to it is added.
class SdfGrid {
 public:
  SdfGrid() = default;

  SdfGrid(Vec2 lo, double cell, int nx, int ny, std::vector<double> values)
      : lo_(lo), cell_(cell), nx_(nx), ny_(ny), v_(std::move(values)) {
    require(cell_ > 0.0, "SdfGrid: cell size must be positive");
    require(nx_ >= 2 && ny_ >= 2, "SdfGrid: need at least 2x2 cells");
    require(v_.size() == static_cast<std::size_t>(nx_) * ny_, "SdfGrid: value count mismatch");
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double cell() const { return cell_; }
  Vec2 center(int i, int j) const { return lo_ + Vec2((i + 0.5) * cell_, (j + 0.5) * cell_); }
  double at(int i, int j) const { return v_[static_cast<std::size_t>(j) * nx_ + i]; }

  double query(const Vec2& p) const {
    const Vec2 c0 = center(0, 0);
    const Vec2 c1 = center(nx_ - 1, ny_ - 1);
    const Vec2 pc = p.cwiseMax(c0).cwiseMin(c1);
    const double extra = (p - pc).norm();
    const double fx = (pc.x() - c0.x()) / cell_;
    const double fy = (pc.y() - c0.y()) / cell_;
    int i = std::min(static_cast<int>(fx), nx_ - 2);
    int j = std::min(static_cast<int>(fy), ny_ - 2);
    i = std::max(i, 0);
    j = std::max(j, 0);
    const double tx = fx - i;
    const double ty = fy - j;
    const double v00 = at(i, j), v10 = at(i + 1, j), v01 = at(i, j + 1), v11 = at(i + 1, j + 1);
    return (1 - ty) * ((1 - tx) * v00 + tx * v10) + ty * ((1 - tx) * v01 + tx * v11) + extra;
  }

 private:
  Vec2 lo_ = Vec2::Zero();
  double cell_ = 0.01;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<double> v_;
};

inline SdfGrid build_sdf(const WorldSpec& w) {
  require(w.resolution > 0.0, "build_sdf: resolution must be positive");
  require((w.hi - w.lo).minCoeff() > 0.0, "build_sdf: empty workspace");
  const int nx = std::max(2, static_cast<int>(std::ceil((w.hi.x() - w.lo.x()) / w.resolution)));
  const int ny = std::max(2, static_cast<int>(std::ceil((w.hi.y() - w.lo.y()) / w.resolution)));
  std::vector<double> v(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      v[static_cast<std::size_t>(j) * nx + i] =
          analytic_sdf(w, w.lo + Vec2((i + 0.5) * w.resolution, (j + 0.5) * w.resolution));
  return SdfGrid(w.lo, w.resolution, nx, ny, std::move(v));
}

// ---------------------------------------------------------------------------
// Robots
// ---------------------------------------------------------------------------

// Collision-check ball on a link, at a fraction of the link length.
struct Ccb {
  int link = 0;
  double frac = 0.0;
  double radius = 0.05;
};

struct RobotModel {
  enum class Kind { Point, PlanarArm };

  Kind kind = Kind::Point;
  Vec2 base = Vec2::Zero();
  std::vector<double> link_lengths;
  std::vector<Ccb> ccbs;
  Vec qmin;
  Vec qmax;
  // Inertial data per link (arm) used for waypoint allocation.
  std::vector<double> masses;
  std::vector<double> com_frac;
  std::vector<double> izz;

  int dof() const { return kind == Kind::Point ? 2 : static_cast<int>(link_lengths.size()); }
  int n_bodies() const { return static_cast<int>(ccbs.size()); }

  void validate() const {
    require(dof() > 0, "RobotModel: no degrees of freedom");
    require(!ccbs.empty(), "RobotModel: needs at least one collision ball");
    require(qmin.size() == dof() && qmax.size() == dof(), "RobotModel: limit size mismatch");
    require((qmax - qmin).minCoeff() > 0.0, "RobotModel: qmax must exceed qmin");
    for (const auto& b : ccbs) {
      require(b.radius >= 0.0, "RobotModel: negative ball radius");
      if (kind == Kind::PlanarArm) require(b.link >= 0 && b.link < dof(), "RobotModel: ball link out of range");
    }
    if (kind == Kind::PlanarArm) {
      for (double l : link_lengths) require(l > 0.0, "RobotModel: link lengths must be positive");
      const auto n = link_lengths.size();
      require(masses.empty() || masses.size() == n, "RobotModel: masses size mismatch");
      require(com_frac.empty() || com_frac.size() == n, "RobotModel: com_frac size mismatch");
      require(izz.empty() || izz.size() == n, "RobotModel: izz size mismatch");
    }
  }

  static RobotModel point(double radius, Vec2 lo, Vec2 hi) {
    RobotModel r;
    r.kind = Kind::Point;
    r.ccbs = {Ccb{0, 0.0, radius}};
    r.qmin = lo;
    r.qmax = hi;
    return r;
  }

  // Planar arm with uniform links and balls_per_link balls spread along each.
  static RobotModel planar_arm(Vec2 base, std::vector<double> lengths, int balls_per_link, double radius) {
    RobotModel r;
    r.kind = Kind::PlanarArm;
    r.base = base;
    r.link_lengths = std::move(lengths);
    const int n = static_cast<int>(r.link_lengths.size());
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < balls_per_link; ++k)
        r.ccbs.push_back(Ccb{i, (k + 1.0) / balls_per_link, radius});
    r.qmin = Vec::Constant(n, -M_PI);
    r.qmax = Vec::Constant(n, M_PI);
    r.masses.assign(static_cast<std::size_t>(n), 1.0);
    r.com_frac.assign(static_cast<std::size_t>(n), 0.5);
    r.izz.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) r.izz[static_cast<std::size_t>(i)] = r.link_lengths[i] * r.link_lengths[i] / 12.0;
    return r;
  }
};

// Joint positions p_0 = base ... p_n (arm) as 2 x (n+1).
inline Eigen::Matrix2Xd joint_positions(const RobotModel& robot, const Eigen::Ref<const Vec>& q) {
  const int n = robot.dof();
  Eigen::Matrix2Xd p(2, n + 1);
  p.col(0) = robot.base;
  double phi = 0.0;
  for (int i = 0; i < n; ++i) {
    phi += q(i);
    p.col(i + 1) = p.col(i) + robot.link_lengths[static_cast<std::size_t>(i)] * Vec2(std::cos(phi), std::sin(phi));
  }
  return p;
}

// Workspace centers of the collision balls, 2 x n_bodies.
inline Eigen::Matrix2Xd forward_kinematics(const RobotModel& robot, const Eigen::Ref<const Vec>& q) {
  require(q.size() == robot.dof(), "forward_kinematics: configuration size mismatch");
  Eigen::Matrix2Xd x(2, robot.n_bodies());
  if (robot.kind == RobotModel::Kind::Point) {
    for (int b = 0; b < robot.n_bodies(); ++b) x.col(b) = q.head<2>();
    return x;
  }
  const Eigen::Matrix2Xd p = joint_positions(robot, q);
  for (int b = 0; b < robot.n_bodies(); ++b) {
    const Ccb& c = robot.ccbs[static_cast<std::size_t>(b)];
    x.col(b) = p.col(c.link) + c.frac * (p.col(c.link + 1) - p.col(c.link));
  }
  return x;
}

// Diagonal inertia weights M_i at configuration q (identity for a point).
inline Vec joint_inertia(const RobotModel& robot, const Eigen::Ref<const Vec>& q) {
  const int n = robot.dof();
  if (robot.kind == RobotModel::Kind::Point) return Vec::Ones(n);
  const Eigen::Matrix2Xd p = joint_positions(robot, q);
  Vec m(n);
  for (int i = 0; i < n; ++i) {
    double acc = robot.izz.empty() ? 0.0 : robot.izz[static_cast<std::size_t>(i)];
    for (int j = i; j < n; ++j) {
      const double mj = robot.masses.empty() ? 1.0 : robot.masses[static_cast<std::size_t>(j)];
      const double cf = robot.com_frac.empty() ? 0.5 : robot.com_frac[static_cast<std::size_t>(j)];
      const Vec2 com = p.col(j) + cf * (p.col(j + 1) - p.col(j));
      acc += mj * (com - p.col(i)).squaredNorm();
    }
    m(i) = acc;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Costs
// ---------------------------------------------------------------------------

struct CollisionParams {
  double eps = 0.05;
  double eps_d = 1e-2;

  void validate() const {
    require(eps > 0.0, "CollisionParams: eps must be positive");
    require(eps_d >= 0.0, "CollisionParams: eps_d must be non-negative");
  }
};

// Penetration D < 0 is linear; the smooth shoulder vanishes beyond eps.
inline double collision_cost(double d, double eps) {
  if (d < 0.0) return eps / 2.0 - d;
  if (d <= eps) {
    const double r = eps - d;
    return r * r * r / (eps * eps) - r * r * r * r / (2.0 * eps * eps * eps);
  }
  return 0.0;
}

inline double collision_cost_derivative(double d, double eps) {
  if (d < 0.0) return -1.0;
  if (d <= eps) {
    const double r = eps - d;
    return -3.0 * r * r / (eps * eps) + 2.0 * r * r * r / (eps * eps * eps);
  }
  return 0.0;
}

struct World {
  RobotModel robot;
  SdfGrid grid;
  CollisionParams params;
};

// Sum over balls of c(D) * |xdot| for one support state, with xdot from the
// ball centers at this state and at the neighbouring state dt away.
inline double waypoint_obstacle_term(const World& w, const Eigen::Matrix2Xd& x_here, const Eigen::Matrix2Xd& x_other,
                                     double signed_dt) {
  double acc = 0.0;
  const double inv = 1.0 / signed_dt;
  for (int b = 0; b < x_here.cols(); ++b) {
    const double d = w.grid.query(x_here.col(b)) - w.robot.ccbs[static_cast<std::size_t>(b)].radius;
    const double c = collision_cost(d, w.params.eps);
    if (c == 0.0) continue;
    acc += c * ((x_other.col(b) - x_here.col(b)) * inv).norm();
  }
  return acc;
}

// Per-waypoint obstacle terms (unweighted). Forward difference, last backward.
inline Vec obstacle_terms(const World& w, const Trajectory& traj) {
  const int n = traj.size();
  std::vector<Eigen::Matrix2Xd> x(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) x[static_cast<std::size_t>(t)] = forward_kinematics(w.robot, traj.position(t));
  Vec terms(n);
  for (int t = 0; t < n; ++t) {
    const int o = t + 1 < n ? t + 1 : t - 1;
    terms(t) = waypoint_obstacle_term(w, x[static_cast<std::size_t>(t)], x[static_cast<std::size_t>(o)],
                                      traj.times(o) - traj.times(t));
  }
  return terms;
}

inline double obstacle_cost(const World& w, const Trajectory& traj, const Vec& rho) {
  require(rho.size() == traj.size(), "obstacle_cost: rho must have one entry per waypoint");
  return rho.dot(obstacle_terms(w, traj));
}

inline double obstacle_cost(const World& w, const Trajectory& traj, double rho = 1.0) {
  return rho * obstacle_terms(w, traj).sum();
}

// Central differences in configuration space over free waypoints; only the
// terms a waypoint touches are re-evaluated. Velocity entries get zero.
inline Vec obstacle_cost_gradient(const World& w, const Trajectory& traj, const Vec& rho,
                                  const std::vector<bool>& free_mask, double h = 1e-6) {
  const int n = traj.size();
  const int d = traj.dof;
  const int s = traj.state_dim();
  require(rho.size() == n, "obstacle_cost_gradient: rho size mismatch");
  require(static_cast<int>(free_mask.size()) == n, "obstacle_cost_gradient: mask size mismatch");
  require(n >= 2, "obstacle_cost_gradient: need at least two waypoints");
  std::vector<Eigen::Matrix2Xd> x(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) x[static_cast<std::size_t>(t)] = forward_kinematics(w.robot, traj.position(t));
  auto X = [&](int t) -> const Eigen::Matrix2Xd& { return x[static_cast<std::size_t>(t)]; };

  // weighted term u with ball centers of waypoint t replaced by xt
  auto term_with = [&](int u, int t, const Eigen::Matrix2Xd& xt) {
    if (rho(u) == 0.0) return 0.0;
    const int o = u + 1 < n ? u + 1 : u - 1;
    const Eigen::Matrix2Xd& xu = (u == t) ? xt : X(u);
    const Eigen::Matrix2Xd& xo = (o == t) ? xt : X(o);
    return rho(u) * waypoint_obstacle_term(w, xu, xo, traj.times(o) - traj.times(u));
  };

  Vec g = Vec::Zero(traj.theta.size());
  Vec q(d);
  for (int t = 0; t < n; ++t) {
    if (!free_mask[static_cast<std::size_t>(t)]) continue;
    int touched[3];
    int nt = 0;
    if (t - 1 >= 0) touched[nt++] = t - 1;
    touched[nt++] = t;
    if (t == n - 2) touched[nt++] = n - 1;
    for (int j = 0; j < d; ++j) {
      q = traj.position(t);
      q(j) += h;
      const Eigen::Matrix2Xd xp = forward_kinematics(w.robot, q);
      q(j) -= 2.0 * h;
      const Eigen::Matrix2Xd xm = forward_kinematics(w.robot, q);
      double fp = 0.0, fm = 0.0;
      for (int k = 0; k < nt; ++k) {
        fp += term_with(touched[k], t, xp);
        fm += term_with(touched[k], t, xm);
      }
      g(t * s + j) = (fp - fm) / (2.0 * h);
    }
  }
  return g;
}

// Hinge on joint limits with margin eps_d, applied to every position entry.
inline double limit_cost(const RobotModel& robot, const CollisionParams& p, const Trajectory& traj) {
  double acc = 0.0;
  for (int t = 0; t < traj.size(); ++t) {
    const auto q = traj.position(t);
    for (int j = 0; j < traj.dof; ++j) {
      const double hi = robot.qmax(j) - p.eps_d;
      const double lo = robot.qmin(j) + p.eps_d;
      if (q(j) > hi) acc += q(j) - hi;
      if (q(j) < lo) acc += lo - q(j);
    }
  }
  return acc;
}

inline Vec limit_cost_gradient(const RobotModel& robot, const CollisionParams& p, const Trajectory& traj) {
  Vec g = Vec::Zero(traj.theta.size());
  const int s = traj.state_dim();
  for (int t = 0; t < traj.size(); ++t) {
    const auto q = traj.position(t);
    for (int j = 0; j < traj.dof; ++j) {
      if (q(j) > robot.qmax(j) - p.eps_d) g(t * s + j) = 1.0;
      if (q(j) < robot.qmin(j) + p.eps_d) g(t * s + j) = -1.0;
    }
  }
  return g;
}

// True when any ball penetrates an obstacle at configuration q.
inline bool in_collision(const World& w, const Eigen::Ref<const Vec>& q) {
  const Eigen::Matrix2Xd x = forward_kinematics(w.robot, q);
  for (int b = 0; b < x.cols(); ++b)
    if (w.grid.query(x.col(b)) - w.robot.ccbs[static_cast<std::size_t>(b)].radius < 0.0) return true;
  return false;
}

// Smallest ball clearance D over the configuration.
inline double min_clearance(const World& w, const Eigen::Ref<const Vec>& q) {
  const Eigen::Matrix2Xd x = forward_kinematics(w.robot, q);
  double m = std::numeric_limits<double>::infinity();
  for (int b = 0; b < x.cols(); ++b)
    m = std::min(m, w.grid.query(x.col(b)) - w.robot.ccbs[static_cast<std::size_t>(b)].radius);
  return m;
}

// Every support and interpolated interval state must have an unweighted
// collision cost at or below gtol.
inline bool continuous_safe(const World& w, const Mat& qc, const Trajectory& traj, double gtol, int n_intervals = 8) {
  require(n_intervals >= 0, "continuous_safe: negative interval count");
  const Trajectory dense = upsample(qc, traj, n_intervals);
  const Vec terms = obstacle_terms(w, dense);
  return terms.maxCoeff() <= gtol;
}

}  // namespace agpsto
