#pragma once

#include <agpsto/core.hpp>
#include <agpsto/trajgp.hpp>
#include <agpsto/world.hpp>

#include <memory>

namespace agpsto {

// F = F_gp + rho-weighted obstacle cost + limit_weight * limit cost, over a
// stacked trajectory on fixed support times. Endpoints are clamped.
class Objective {
 public:
  struct Parts {
    double total = 0.0;
    double gp = 0.0;
    double obstacle = 0.0;
    double limit = 0.0;
  };

  Objective(std::shared_ptr<const World> world, GPModel gp, double rho0, double limit_weight = 1.0)
      : world_(std::move(world)), limit_weight_(limit_weight) {
    require(world_ != nullptr, "Objective: world is null");
    require(rho0 > 0.0, "Objective: rho must be positive");
    require(limit_weight >= 0.0, "Objective: limit weight must be non-negative");
    set_gp(std::move(gp));
    rho_ = Vec::Constant(static_cast<int>(gp_.times.size()), rho0);
  }

  const World& world() const { return *world_; }
  std::shared_ptr<const World> world_ptr() const { return world_; }
  const GPModel& gp() const { return gp_; }
  const Vec& times() const { return gp_.times; }
  int dof() const { return gp_.dof; }
  int n_waypoints() const { return static_cast<int>(gp_.times.size()); }
  int dim() const { return gp_.dim(); }
  const Vec& rho() const { return rho_; }
  double limit_weight() const { return limit_weight_; }
  bool pseudo_inverse_used() const { return pseudo_; }
  const std::vector<bool>& free_mask() const { return free_; }
  int interval_states() const { return n_inter_; }

  void set_gp(GPModel gp) {
    require(gp.has_sde(), "Objective: GP must carry support times and qc");
    require(gp.dim() == static_cast<int>(gp.times.size()) * 2 * gp.dof, "Objective: GP dimension mismatch");
    require(gp.dof == world_->robot.dof(), "Objective: GP dof does not match robot");
    gp_ = std::move(gp);
    const PrecisionInfo pi = precision_of(gp_);
    precision_ = pi.p;
    pseudo_ = pi.pseudo_inverse;
    free_.assign(static_cast<std::size_t>(n_waypoints()), true);
    free_.front() = false;
    free_.back() = false;
    if (rho_.size() != n_waypoints()) rho_ = Vec::Constant(n_waypoints(), rho_.size() > 0 ? rho_(0) : 1.0);
    build_maps();
  }

  // GP-interpolated states per gap that also enter the obstacle cost; 0 keeps
  // the support states only.
  void set_interval_states(int m) {
    require(m >= 0, "Objective: interval state count must be non-negative");
    n_inter_ = m;
    build_maps();
  }

  void set_rho(const Vec& rho) {
    require(rho.size() == n_waypoints(), "Objective: rho size mismatch");
    require(rho.minCoeff() > 0.0, "Objective: rho must be positive");
    rho_ = rho;
  }
  void set_rho(double rho) { set_rho(Vec::Constant(n_waypoints(), rho)); }

  Trajectory trajectory(const Vec& theta) const { return Trajectory(gp_.times, theta, gp_.dof); }

  Parts parts(const Vec& theta) const { return parts(theta, rho_); }

  Parts parts(const Vec& theta, const Vec& rho) const {
    require(theta.size() == dim(), "Objective: theta size mismatch");
    const Trajectory traj = trajectory(theta);
    Parts p;
    p.gp = gp_cost(precision_, gp_.mean, theta);
    p.obstacle = n_inter_ > 0 ? dense_rho(rho).dot(obstacle_terms(*world_, dense(theta))) : obstacle_cost(*world_, traj, rho);
    p.limit = limit_weight_ * limit_cost(world_->robot, world_->params, traj);
    p.total = p.gp + p.obstacle + p.limit;
    return p;
  }

  double value(const Vec& theta) const { return parts(theta).total; }

  // Unweighted collision cost, the feasibility measure.
  double obstacle_unweighted(const Vec& theta) const {
    return n_inter_ > 0 ? obstacle_terms(*world_, dense(theta)).sum() : obstacle_cost(*world_, trajectory(theta), 1.0);
  }

  // Support and interval states on their own time grid.
  Trajectory dense(const Vec& theta) const {
    const int s = 2 * dof(), n = n_waypoints(), m = n_inter_;
    const int total = n + (n - 1) * m;
    Vec times(total), th(total * s);
    int row = 0;
    for (int a = 0; a < n; ++a) {
      times(row) = gp_.times(a);
      th.segment(row * s, s) = theta.segment(a * s, s);
      ++row;
      if (a + 1 == n) break;
      const double span = gp_.times(a + 1) - gp_.times(a);
      for (int k = 0; k < m; ++k) {
        const InterpMap& mp = maps_[static_cast<std::size_t>(a * m + k)];
        times(row) = gp_.times(a) + taus_[static_cast<std::size_t>(k)] * span;
        th.segment(row * s, s) = mp.lambda * theta.segment(a * s, s) + mp.psi * theta.segment((a + 1) * s, s);
        ++row;
      }
    }
    return Trajectory(times, th, dof());
  }

  Vec gradient(const Vec& theta) const {
    require(theta.size() == dim(), "Objective: theta size mismatch");
    const Trajectory traj = trajectory(theta);
    Vec g = gp_cost_gradient(precision_, gp_.mean, theta);
    if (n_inter_ > 0) {
      g += dense_obstacle_gradient(theta);
    } else {
      g += obstacle_cost_gradient(*world_, traj, rho_, free_);
    }
    if (limit_weight_ > 0.0) g += limit_weight_ * limit_cost_gradient(world_->robot, world_->params, traj);
    mask(g);
    return g;
  }

  void mask(Vec& g) const {
    const int s = 2 * dof();
    for (int t = 0; t < n_waypoints(); ++t)
      if (!free_[static_cast<std::size_t>(t)]) g.segment(t * s, s).setZero();
  }

 private:
  void build_maps() {
    maps_.clear();
    if (n_inter_ == 0) return;
    taus_ = interval_fractions(n_inter_);
    for (int a = 0; a + 1 < n_waypoints(); ++a) {
      auto mp = interpolation_maps(gp_.qc, gp_.times(a), gp_.times(a + 1), taus_);
      maps_.insert(maps_.end(), mp.begin(), mp.end());
    }
  }

  // interval states in a gap take the mean penalty of its two ends
  Vec dense_rho(const Vec& rho) const {
    const int n = n_waypoints(), m = n_inter_;
    Vec r(n + (n - 1) * m);
    int row = 0;
    for (int a = 0; a < n; ++a) {
      r(row++) = rho(a);
      if (a + 1 == n) break;
      for (int k = 0; k < m; ++k) r(row++) = 0.5 * (rho(a) + rho(a + 1));
    }
    return r;
  }

  // Gradient on the dense grid, pulled back through the interpolation maps.
  Vec dense_obstacle_gradient(const Vec& theta) const {
    const int s = 2 * dof(), n = n_waypoints(), m = n_inter_;
    std::vector<bool> free_dense;
    for (int a = 0; a < n; ++a) {
      free_dense.push_back(free_[static_cast<std::size_t>(a)]);
      if (a + 1 == n) break;
      for (int k = 0; k < m; ++k) free_dense.push_back(true);
    }
    const Vec gd = obstacle_cost_gradient(*world_, dense(theta), dense_rho(rho_), free_dense);
    Vec g = Vec::Zero(theta.size());
    int row = 0;
    for (int a = 0; a < n; ++a) {
      g.segment(a * s, s) += gd.segment(row * s, s);
      ++row;
      if (a + 1 == n) break;
      for (int k = 0; k < m; ++k) {
        const InterpMap& mp = maps_[static_cast<std::size_t>(a * m + k)];
        const Vec gr = gd.segment(row * s, s);
        g.segment(a * s, s) += mp.lambda.transpose() * gr;
        g.segment((a + 1) * s, s) += mp.psi.transpose() * gr;
        ++row;
      }
    }
    return g;
  }

  std::shared_ptr<const World> world_;
  GPModel gp_;
  Mat precision_;
  bool pseudo_ = false;
  Vec rho_;
  double limit_weight_ = 1.0;
  std::vector<bool> free_;
  int n_inter_ = 0;
  std::vector<InterpMap> maps_;
  std::vector<double> taus_;
};

inline Vec scale_penalty(const Vec& rho, double kappa) {
  require(kappa > 0.0 && kappa < 1.0, "scale_penalty: kappa must lie in (0,1)");
  return rho / kappa;
}

enum class ProblemClass { A = 0, B = 1, C = 2 };

inline char class_letter(ProblemClass c) { return static_cast<char>('A' + static_cast<int>(c)); }

// Each axis resolves overlapping ranges to the harder class; the label is the
// easier of the two.
inline ProblemClass class_from_fbar(double fbar) {
  if (fbar <= 0.18) return ProblemClass::A;
  if (fbar > 0.60) return ProblemClass::C;
  return ProblemClass::B;
}

inline ProblemClass class_from_stuck(double stuck) {
  if (stuck <= 0.41) return ProblemClass::A;
  if (stuck <= 0.88) return ProblemClass::B;
  return ProblemClass::C;
}

inline ProblemClass class_label(double fbar, double stuck) {
  return std::min(class_from_fbar(fbar), class_from_stuck(stuck));
}

struct Classification {
  double fbar = 0.0;
  double stuck = 0.0;
  ProblemClass label = ProblemClass::A;
};

// Fbar is the unit-penalty objective per support waypoint; the stuck ratio is
// the worst count of penetrating states among a waypoint and the n interval
// states on either side, over 2n+1.
inline Classification classify(const Objective& obj, const Vec& theta, int n_intervals = 8) {
  require(n_intervals >= 1, "classify: need at least one interval state");
  const Trajectory traj = obj.trajectory(theta);
  const int n = traj.size();
  Classification out;
  out.fbar = obj.parts(theta, Vec::Ones(n)).total / n;

  const auto taus = interval_fractions(n_intervals);
  std::vector<std::vector<bool>> gap_hits(static_cast<std::size_t>(std::max(n - 1, 0)));
  for (int a = 0; a + 1 < n; ++a) {
    const Mat mid = interpolate_states(obj.gp(), traj, a, taus);
    auto& hits = gap_hits[static_cast<std::size_t>(a)];
    for (int k = 0; k < n_intervals; ++k) hits.push_back(in_collision(obj.world(), mid.col(k).head(traj.dof)));
  }
  int worst = 0;
  for (int t = 0; t < n; ++t) {
    int c = in_collision(obj.world(), traj.position(t)) ? 1 : 0;
    if (t > 0)
      for (bool h : gap_hits[static_cast<std::size_t>(t - 1)]) c += h ? 1 : 0;
    if (t + 1 < n)
      for (bool h : gap_hits[static_cast<std::size_t>(t)]) c += h ? 1 : 0;
    worst = std::max(worst, c);
  }
  out.stuck = static_cast<double>(worst) / (2 * n_intervals + 1);
  out.label = class_label(out.fbar, out.stuck);
  return out;
}

}  // namespace agpsto
