#pragma once

#include <agpsto/core.hpp>

#include <limits>
#include <sstream>

namespace agpsto {

// Constant-velocity LTV-SDE: state [q; v], white-noise acceleration with PSD qc.
struct LtvSdeModel {
  int dof = 0;
  double dt = 1.0;
  Mat qc;

  LtvSdeModel() = default;
  LtvSdeModel(int d, double step, Mat q = Mat()) : dof(d), dt(step), qc(std::move(q)) {
    if (qc.size() == 0) qc = Mat::Identity(d, d);
    validate();
  }

  void validate() const {
    require(dof > 0, "LtvSdeModel: dof must be positive");
    require(dt > 0.0, "LtvSdeModel: dt must be positive");
    require(qc.rows() == dof && qc.cols() == dof, "LtvSdeModel: qc must be dof x dof");
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (qc + qc.transpose()));
    require(es.eigenvalues().minCoeff() >= -1e-12, "LtvSdeModel: qc must be PSD");
  }
};

// Phi(t, s) for dt = t - s.
inline Mat transition_matrix(int dof, double dt) {
  Mat phi = Mat::Identity(2 * dof, 2 * dof);
  phi.topRightCorner(dof, dof) = dt * Mat::Identity(dof, dof);
  return phi;
}

// Q over one interval of length dt.
inline Mat process_noise(const Mat& qc, double dt) {
  const int d = static_cast<int>(qc.rows());
  Mat q(2 * d, 2 * d);
  const double dt2 = dt * dt;
  q.topLeftCorner(d, d) = (dt2 * dt / 3.0) * qc;
  q.topRightCorner(d, d) = (dt2 / 2.0) * qc;
  q.bottomLeftCorner(d, d) = (dt2 / 2.0) * qc;
  q.bottomRightCorner(d, d) = dt * qc;
  return q;
}

// Gaussian over a stacked trajectory. precision is kept when it can be
// carried exactly (information-form updates); otherwise it is empty and is
// recovered from cov on demand. times/qc describe the underlying SDE when the
// model was built from one.
struct GPModel {
  Vec mean;
  Mat cov;
  Mat precision;
  Vec times;
  Mat qc;
  int dof = 0;

  int dim() const { return static_cast<int>(mean.size()); }
  bool has_sde() const { return dof > 0 && times.size() > 0; }
};

// Observation model C*theta + noise(R) = obs.
struct ConditioningSpec {
  Mat C;
  Vec obs;
  Mat noise;
};

namespace detail {

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

inline double ldlt_condition(const Eigen::LDLT<Mat>& f) {
  const double r = f.rcond();
  return r > 0.0 ? 1.0 / r : std::numeric_limits<double>::infinity();
}

}  // namespace detail

// Unconditioned Gauss-Markov prior started from N(mu0, k0) at times(0).
inline GPModel markov_prior(const Vec& times, const Mat& qc, const Vec& mu0, const Mat& k0) {
  const int d = static_cast<int>(qc.rows());
  const int s = 2 * d;
  const int n = static_cast<int>(times.size());
  require(n >= 2, "prior needs at least two support times");
  require(mu0.size() == s, "prior mean size must be 2*dof");
  require(k0.rows() == s && k0.cols() == s, "k0 must be 2*dof square");
  for (int i = 1; i < n; ++i) require(times(i) > times(i - 1), "support times must increase");

  GPModel gp;
  gp.dof = d;
  gp.times = times;
  gp.qc = qc;
  gp.mean.resize(n * s);
  gp.cov.resize(n * s, n * s);

  std::vector<Mat> phi(n), q(n);
  Mat p = k0;
  gp.mean.segment(0, s) = mu0;
  gp.cov.block(0, 0, s, s) = k0;
  for (int i = 1; i < n; ++i) {
    const double dt = times(i) - times(i - 1);
    phi[i] = transition_matrix(d, dt);
    q[i] = process_noise(qc, dt);
    gp.mean.segment(i * s, s) = phi[i] * gp.mean.segment((i - 1) * s, s);
    // cross-covariance with every earlier state propagates through phi
    for (int j = 0; j < i; ++j) gp.cov.block(i * s, j * s, s, s) = phi[i] * gp.cov.block((i - 1) * s, j * s, s, s);
    p = phi[i] * p * phi[i].transpose() + q[i];
    gp.cov.block(i * s, i * s, s, s) = p;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) gp.cov.block(i * s, j * s, s, s) = gp.cov.block(j * s, i * s, s, s).transpose();

  // precision = B^T D^{-1} B with B the lifted difference operator
  Eigen::LDLT<Mat> k0f(k0);
  if (k0f.info() == Eigen::Success && k0f.rcond() > 1e-14) {
    Mat prec = Mat::Zero(n * s, n * s);
    prec.block(0, 0, s, s) += k0f.solve(Mat::Identity(s, s));
    for (int i = 1; i < n; ++i) {
      Eigen::LDLT<Mat> qf(q[i]);
      if (qf.info() != Eigen::Success || qf.rcond() <= 1e-14) {
        prec.resize(0, 0);
        break;
      }
      const Mat qi = qf.solve(Mat::Identity(s, s));
      const Mat qphi = qi * phi[i];
      prec.block(i * s, i * s, s, s) += qi;
      prec.block(i * s, (i - 1) * s, s, s) -= qphi;
      prec.block((i - 1) * s, i * s, s, s) -= qphi.transpose();
      prec.block((i - 1) * s, (i - 1) * s, s, s) += phi[i].transpose() * qphi;
    }
    gp.precision = prec;
  }
  return gp;
}

// Posterior of gp given spec. Singular innovation raises NumericalError.
inline GPModel condition(const GPModel& gp, const ConditioningSpec& spec) {
  const int n = gp.dim();
  const int m = static_cast<int>(spec.obs.size());
  require(gp.cov.rows() == n && gp.cov.cols() == n, "condition: covariance size mismatch");
  require(spec.C.rows() == m && spec.C.cols() == n, "condition: C has wrong shape");
  require(spec.noise.rows() == m && spec.noise.cols() == m, "condition: noise has wrong shape");

  const Mat kct = gp.cov * spec.C.transpose();
  const Mat innov = detail::symmetrize(spec.C * kct + spec.noise);
  Eigen::LDLT<Mat> sf(innov);
  const double cond = detail::ldlt_condition(sf);
  if (sf.info() != Eigen::Success || !(cond < 1e14)) {
    std::ostringstream os;
    os << "condition: innovation matrix is singular (condition number ~ " << cond << ")";
    throw NumericalError(os.str());
  }
  const Mat gain = sf.solve(kct.transpose()).transpose();  // n x m

  GPModel out;
  out.dof = gp.dof;
  out.times = gp.times;
  out.qc = gp.qc;
  out.mean = gp.mean + gain * (spec.obs - spec.C * gp.mean);
  // Joseph form keeps the result PSD under rounding.
  const Mat ikc = Mat::Identity(n, n) - gain * spec.C;
  out.cov = detail::symmetrize(ikc * gp.cov * ikc.transpose() + gain * spec.noise * gain.transpose());

  if (gp.precision.size() > 0) {
    Eigen::LDLT<Mat> rf(spec.noise);
    if (rf.info() == Eigen::Success && rf.rcond() > 1e-14 && spec.noise.norm() > 0.0) {
      out.precision = gp.precision + spec.C.transpose() * rf.solve(spec.C);
    }
  }
  if (!out.mean.allFinite() || !out.cov.allFinite()) throw NumericalError("condition: non-finite posterior");
  return out;
}

// Selector rows picking the full states at the given support indices.
inline Mat state_selector(int n_states, int state_dim, const std::vector<int>& idx) {
  Mat c = Mat::Zero(static_cast<Eigen::Index>(idx.size()) * state_dim, n_states * state_dim);
  for (std::size_t k = 0; k < idx.size(); ++k)
    c.block(static_cast<Eigen::Index>(k) * state_dim, idx[k] * state_dim, state_dim, state_dim).setIdentity();
  return c;
}

// Markov prior on the given times, conditioned on start and goal states.
inline GPModel build_prior(const Vec& times, const Mat& qc, const Vec& start, const Vec& goal, const Mat& k0,
                           double endpoint_noise = 1e-8) {
  require(endpoint_noise > 0.0, "build_prior: endpoint noise must be positive");
  require(start.size() == goal.size(), "build_prior: start/goal size mismatch");
  GPModel prior = markov_prior(times, qc, start, k0);
  const int s = static_cast<int>(start.size());
  const int n = static_cast<int>(times.size());
  ConditioningSpec spec;
  spec.C = state_selector(n, s, {0, n - 1});
  spec.obs.resize(2 * s);
  spec.obs << start, goal;
  spec.noise = endpoint_noise * Mat::Identity(2 * s, 2 * s);
  return condition(prior, spec);
}

inline GPModel build_prior(const LtvSdeModel& model, int n_support, const Vec& start, const Vec& goal, const Mat& k0,
                           double endpoint_noise = 1e-8) {
  model.validate();
  require(n_support >= 2, "build_prior: need at least two support states");
  return build_prior(uniform_times(n_support - 1, model.dt), model.qc, start, goal, k0, endpoint_noise);
}

// Inverse covariance, or a pseudo-inverse when cov is singular.
struct PrecisionInfo {
  Mat p;
  bool pseudo_inverse = false;
};

inline PrecisionInfo precision_of(const GPModel& gp) {
  PrecisionInfo info;
  if (gp.precision.size() > 0) {
    info.p = gp.precision;
    return info;
  }
  Eigen::LDLT<Mat> f(gp.cov);
  const Vec piv = f.vectorD().cwiseAbs();
  if (f.info() == Eigen::Success && f.isPositive() && piv.minCoeff() > 1e-13 * piv.maxCoeff() && f.rcond() > 1e-13) {
    info.p = detail::symmetrize(f.solve(Mat::Identity(gp.dim(), gp.dim())));
    return info;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(detail::symmetrize(gp.cov));
  const Vec& ev = es.eigenvalues();
  const double tol = std::max(ev.cwiseAbs().maxCoeff(), 1e-300) * 1e-12 * gp.dim();
  Vec inv = Vec::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > tol) inv(i) = 1.0 / ev(i);
  info.p = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  info.pseudo_inverse = true;
  return info;
}

inline double gp_cost(const Mat& precision, const Vec& mean, const Vec& theta) {
  require(theta.size() == mean.size(), "gp_cost: size mismatch");
  const Vec r = theta - mean;
  return 0.5 * r.dot(precision * r);
}

inline Vec gp_cost_gradient(const Mat& precision, const Vec& mean, const Vec& theta) {
  require(theta.size() == mean.size(), "gp_cost_gradient: size mismatch");
  return precision * (theta - mean);
}

inline double gp_cost(const GPModel& gp, const Vec& theta, bool* pseudo = nullptr) {
  const PrecisionInfo pi = precision_of(gp);
  if (pseudo) *pseudo = pi.pseudo_inverse;
  return gp_cost(pi.p, gp.mean, theta);
}

inline Vec gp_cost_gradient(const GPModel& gp, const Vec& theta, bool* pseudo = nullptr) {
  const PrecisionInfo pi = precision_of(gp);
  if (pseudo) *pseudo = pi.pseudo_inverse;
  return gp_cost_gradient(pi.p, gp.mean, theta);
}

// Interpolation maps: the state at fraction tau of [t_a, t_b] is
// lambda * state_a + psi * state_b under the constant-velocity SDE.
struct InterpMap {
  Mat lambda;
  Mat psi;
};

inline std::vector<InterpMap> interpolation_maps(const Mat& qc, double t_a, double t_b, const std::vector<double>& taus) {
  const int d = static_cast<int>(qc.rows());
  require(t_b > t_a, "interpolate_states: t_b must exceed t_a");
  const double span = t_b - t_a;
  const Mat qab = process_noise(qc, span);
  Eigen::LDLT<Mat> qf(qab);
  if (qf.info() != Eigen::Success) throw NumericalError("interpolate_states: singular interval noise");
  const Mat phi_ba = transition_matrix(d, span);
  std::vector<InterpMap> out;
  out.reserve(taus.size());
  for (const double tau : taus) {
    require(tau >= 0.0 && tau <= 1.0, "interpolate_states: tau must be in [0,1]");
    const double h = tau * span;
    const Mat psi = process_noise(qc, h) * transition_matrix(d, span - h).transpose();
    const Mat psi_q = qf.solve(psi.transpose()).transpose();
    out.push_back({transition_matrix(d, h) - psi_q * phi_ba, psi_q});
  }
  return out;
}

// Posterior states at fractions taus in [0,1] of [t_a, t_b] given the two
// boundary states, under the constant-velocity SDE with PSD qc.
inline Mat interpolate_states(const Mat& qc, double t_a, double t_b, const Vec& state_a, const Vec& state_b,
                              const std::vector<double>& taus) {
  const int d = static_cast<int>(qc.rows());
  require(state_a.size() == 2 * d && state_b.size() == 2 * d, "interpolate_states: state size mismatch");
  const auto maps = interpolation_maps(qc, t_a, t_b, taus);
  Mat out(2 * d, static_cast<Eigen::Index>(taus.size()));
  for (std::size_t k = 0; k < maps.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = maps[k].lambda * state_a + maps[k].psi * state_b;
  return out;
}

inline Mat interpolate_states(const GPModel& gp, const Trajectory& traj, int a, const std::vector<double>& taus) {
  require(gp.qc.rows() == traj.dof, "interpolate_states: model/trajectory dof mismatch");
  require(a >= 0 && a + 1 < traj.size(), "interpolate_states: gap index out of range");
  return interpolate_states(gp.qc, traj.times(a), traj.times(a + 1), traj.state(a), traj.state(a + 1), taus);
}

// Fractions k/(n+1), k = 1..n.
inline std::vector<double> interval_fractions(int n) {
  std::vector<double> taus;
  for (int k = 1; k <= n; ++k) taus.push_back(static_cast<double>(k) / (n + 1));
  return taus;
}

// Support plus n interval states per gap, as a dense trajectory.
inline Trajectory upsample(const Mat& qc, const Trajectory& traj, int n_intervals) {
  const int s = traj.state_dim();
  const int n = traj.size();
  const int total = n + (n - 1) * n_intervals;
  Vec times(total);
  Vec theta(total * s);
  const auto taus = interval_fractions(n_intervals);
  int row = 0;
  for (int a = 0; a < n; ++a) {
    times(row) = traj.times(a);
    theta.segment(row * s, s) = traj.state(a);
    ++row;
    if (a + 1 == n) break;
    const Mat mid = interpolate_states(qc, traj.times(a), traj.times(a + 1), traj.state(a), traj.state(a + 1), taus);
    for (int k = 0; k < n_intervals; ++k) {
      times(row) = traj.times(a) + taus[static_cast<std::size_t>(k)] * (traj.times(a + 1) - traj.times(a));
      theta.segment(row * s, s) = mid.col(k);
      ++row;
    }
  }
  return Trajectory(times, theta, traj.dof);
}

}  // namespace agpsto
