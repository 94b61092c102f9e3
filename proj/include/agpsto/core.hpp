#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace agpsto {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;

// Malformed input: wrong sizes, out-of-range settings, bad files.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Factorization failures, non-finite values.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ParameterError(msg);
}

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite ") + what);
}

inline bool all_finite(const Eigen::Ref<const Mat>& m) { return m.allFinite(); }

// SplitMix64 finalizer, used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(base ^ mix_seed(a)) ^ mix_seed(b + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  // Explicit mapping keeps streams identical across standard libraries.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  return lo + static_cast<int>(rng() % span);
}

inline double standard_normal(Rng& rng) {
  // Box-Muller on the explicit uniform mapping above.
  double u1 = uniform(rng, 0.0, 1.0);
  while (u1 <= 0.0) u1 = uniform(rng, 0.0, 1.0);
  const double u2 = uniform(rng, 0.0, 1.0);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Support-waypoint trajectory. theta stacks per-waypoint states [q_t; v_t].
struct Trajectory {
  Vec times;
  Vec theta;
  int dof = 0;

  Trajectory() = default;
  Trajectory(Vec t, Vec th, int d) : times(std::move(t)), theta(std::move(th)), dof(d) {
    require(dof > 0, "trajectory dof must be positive");
    require(theta.size() == times.size() * 2 * dof, "trajectory state size mismatch");
  }

  int state_dim() const { return 2 * dof; }
  int size() const { return static_cast<int>(times.size()); }
  auto state(int t) { return theta.segment(t * state_dim(), state_dim()); }
  auto state(int t) const { return theta.segment(t * state_dim(), state_dim()); }
  auto position(int t) { return theta.segment(t * state_dim(), dof); }
  auto position(int t) const { return theta.segment(t * state_dim(), dof); }
  auto velocity(int t) { return theta.segment(t * state_dim() + dof, dof); }
  auto velocity(int t) const { return theta.segment(t * state_dim() + dof, dof); }

  Mat positions() const {
    Mat p(size(), dof);
    for (int t = 0; t < size(); ++t) p.row(t) = position(t).transpose();
    return p;
  }
};

// Uniform support times 0, dt, ..., n*dt.
inline Vec uniform_times(int n_gaps, double dt) {
  require(n_gaps >= 1, "need at least one gap");
  require(dt > 0.0, "dt must be positive");
  Vec t(n_gaps + 1);
  for (int i = 0; i <= n_gaps; ++i) t(i) = i * dt;
  return t;
}

// Straight line in configuration space at constant velocity.
inline Trajectory straight_line(const Vec& q0, const Vec& qg, const Vec& times) {
  const int d = static_cast<int>(q0.size());
  require(qg.size() == d, "start/goal size mismatch");
  const double T = times(times.size() - 1) - times(0);
  require(T > 0.0, "trajectory duration must be positive");
  const Vec v = (qg - q0) / T;
  Vec th(times.size() * 2 * d);
  for (int t = 0; t < times.size(); ++t) {
    const double s = (times(t) - times(0)) / T;
    th.segment(t * 2 * d, d) = q0 + s * (qg - q0);
    th.segment(t * 2 * d + d, d) = v;
  }
  return Trajectory(times, th, d);
}

}  // namespace agpsto
