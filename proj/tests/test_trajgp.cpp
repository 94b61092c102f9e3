#include <agpsto/trajgp.hpp>

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace agpsto;
using namespace agpsto::testing;

namespace {

// Prior covariance by direct quadrature of the SDE integral (Simpson).
Mat quadrature_prior_cov(const Vec& times, const Mat& qc, const Mat& k0) {
  const int d = static_cast<int>(qc.rows());
  const int s = 2 * d;
  const int n = static_cast<int>(times.size());
  Mat k(n * s, n * s);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double ti = times(i), tj = times(j), t0 = times(0);
      Mat phi_i = Mat::Identity(s, s), phi_j = Mat::Identity(s, s);
      phi_i.topRightCorner(d, d) = (ti - t0) * Mat::Identity(d, d);
      phi_j.topRightCorner(d, d) = (tj - t0) * Mat::Identity(d, d);
      Mat blk = phi_i * k0 * phi_j.transpose();
      const double upper = std::min(ti, tj);
      const int m = 400;
      const double h = (upper - t0) / m;
      Mat acc = Mat::Zero(s, s);
      for (int q = 0; q <= m && upper > t0; ++q) {
        const double sv = t0 + q * h;
        const double w = (q == 0 || q == m) ? 1.0 : (q % 2 ? 4.0 : 2.0);
        Mat a(s, d), b(s, d);
        a << (ti - sv) * Mat::Identity(d, d), Mat::Identity(d, d);
        b << (tj - sv) * Mat::Identity(d, d), Mat::Identity(d, d);
        acc += w * a * qc * b.transpose();
      }
      blk += acc * h / 3.0;
      k.block(i * s, j * s, s, s) = blk;
    }
  }
  return k;
}

// Textbook Gaussian conditioning with explicit inverses.
void naive_condition(const Vec& mu, const Mat& k, const Mat& c, const Vec& obs, const Mat& r, Vec& mu_out, Mat& k_out) {
  const Mat s_inv = (c * k * c.transpose() + r).inverse();
  mu_out = mu + (c * k).transpose() * s_inv * (obs - c * mu);
  k_out = k - k * c.transpose() * s_inv * c * k;
}

}  // namespace

TEST(TrajGp, ProcessNoiseUnitInterval) {
  const Mat q = process_noise(Mat::Identity(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(q(0, 0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(q(0, 2), 0.5);
  EXPECT_DOUBLE_EQ(q(2, 0), 0.5);
  EXPECT_DOUBLE_EQ(q(2, 2), 1.0);
  EXPECT_DOUBLE_EQ(q(0, 1), 0.0);
  const Mat phi = transition_matrix(2, 0.5);
  EXPECT_DOUBLE_EQ(phi(0, 2), 0.5);
  EXPECT_DOUBLE_EQ(phi(2, 0), 0.0);
}

TEST(TrajGp, ModelValidation) {
  EXPECT_THROW(LtvSdeModel(2, 0.0), ParameterError);
  EXPECT_THROW(LtvSdeModel(2, 1.0, -Mat::Identity(2, 2)), ParameterError);
  EXPECT_THROW(LtvSdeModel(2, 1.0, Mat::Identity(3, 3)), ParameterError);
  EXPECT_NO_THROW(LtvSdeModel(2, 1.0));
}

TEST(TrajGp, PriorCovarianceMatchesQuadrature) {
  Vec times(4);
  times << 0.0, 0.7, 1.5, 2.0;
  Mat qc(2, 2);
  qc << 1.0, 0.2, 0.2, 0.5;
  const Mat k0 = 0.3 * Mat::Identity(4, 4);
  const GPModel gp = markov_prior(times, qc, Vec::Zero(4), k0);
  const Mat oracle = quadrature_prior_cov(times, qc, k0);
  EXPECT_LT((gp.cov - oracle).cwiseAbs().maxCoeff(), 1e-10);
  // information form agrees with the covariance
  EXPECT_LT((gp.precision * gp.cov - Mat::Identity(16, 16)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(TrajGp, PriorMeanZeroWhenStartEqualsGoalAtOrigin) {
  const LtvSdeModel m(2, 1.0);
  const GPModel gp = build_prior(m, 3, Vec::Zero(4), Vec::Zero(4), Mat::Identity(4, 4));
  EXPECT_LT(gp.mean.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TrajGp, PriorMeanConstantWhenStartEqualsGoal) {
  const LtvSdeModel m(2, 0.5);
  Vec s(4);
  s << 0.3, -0.2, 0.0, 0.0;
  const GPModel gp = build_prior(m, 6, s, s, Mat::Identity(4, 4));
  for (int t = 0; t < 6; ++t) {
    EXPECT_NEAR(gp.mean(t * 4 + 0), 0.3, 1e-7);
    EXPECT_NEAR(gp.mean(t * 4 + 1), -0.2, 1e-7);
  }
}

TEST(TrajGp, PriorMeanFollowsConstantVelocityLine) {
  Vec q0(2), qg(2);
  q0 << -0.5, 0.1;
  qg << 0.5, 0.3;
  const LineSetup s = line_setup(q0, qg, 7, 0.25);
  EXPECT_LT((s.gp.mean - s.traj.theta).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_NEAR(gp_cost(s.gp, s.traj.theta), 0.0, 1e-8);
}

TEST(TrajGp, ConditionMatchesNaiveOracleAndStaysPsd) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 11;
    const int m = 1 + trial % n;
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
    Vec mu;
    Mat k;
    naive_condition(gp.mean, gp.cov, spec.C, spec.obs, spec.noise, mu, k);
    EXPECT_LT((post.mean - mu).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((post.cov - k).cwiseAbs().maxCoeff(), 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat> es(post.cov);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(TrajGp, ConditionOnEverythingNoiselessReturnsObservation) {
  Rng rng(3);
  GPModel gp;
  gp.mean = random_vec(5, rng);
  gp.cov = random_spd(5, rng);
  ConditioningSpec spec{Mat::Identity(5, 5), random_vec(5, rng), Mat::Zero(5, 5)};
  const GPModel post = condition(gp, spec);
  EXPECT_LT((post.mean - spec.obs).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(post.cov.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TrajGp, ConditionSingularInnovationThrows) {
  GPModel gp;
  gp.mean = Vec::Zero(3);
  gp.cov = Mat::Zero(3, 3);
  ConditioningSpec spec{Mat::Identity(3, 3), Vec::Ones(3), Mat::Zero(3, 3)};
  EXPECT_THROW(condition(gp, spec), NumericalError);
  ConditioningSpec bad{Mat::Identity(2, 3), Vec::Ones(2), Mat::Zero(3, 3)};
  EXPECT_THROW(condition(gp, bad), ParameterError);
}

TEST(TrajGp, CostZeroAtMeanAndMatchesQuadraticForm) {
  Rng rng(11);
  GPModel gp;
  gp.mean = random_vec(6, rng);
  gp.cov = random_spd(6, rng);
  EXPECT_NEAR(gp_cost(gp, gp.mean), 0.0, 1e-15);
  const Vec th = random_vec(6, rng);
  const Vec r = th - gp.mean;
  const double oracle = 0.5 * r.dot(gp.cov.inverse() * r);
  EXPECT_NEAR(gp_cost(gp, th), oracle, 1e-12 * std::max(1.0, oracle));
  const Vec g = gp_cost_gradient(gp, th);
  for (int i = 0; i < 6; ++i) {
    Vec p = th, m = th;
    p(i) += 1e-6;
    m(i) -= 1e-6;
    EXPECT_NEAR(g(i), (gp_cost(gp, p) - gp_cost(gp, m)) / 2e-6, 1e-5);
  }
}

TEST(TrajGp, SingularCovarianceUsesPseudoInverse) {
  GPModel gp;
  gp.mean = Vec::Zero(3);
  gp.cov = Mat::Zero(3, 3);
  gp.cov(0, 0) = 2.0;
  bool pseudo = false;
  Vec th = Vec::Zero(3);
  th(0) = 1.0;
  EXPECT_NEAR(gp_cost(gp, th, &pseudo), 0.25, 1e-12);
  EXPECT_TRUE(pseudo);
}

TEST(TrajGp, InterpolationEndpointsAndMidpoint) {
  const Mat qc = Mat::Identity(2, 2);
  Vec a(4), b(4);
  a << 0.0, 0.0, 1.0, 2.0;
  b << 1.0, 2.0, 1.0, 2.0;
  const Mat s = interpolate_states(qc, 0.0, 1.0, a, b, {0.0, 0.5, 1.0});
  EXPECT_LT((s.col(0) - a).norm(), 1e-12);
  EXPECT_LT((s.col(2) - b).norm(), 1e-12);
  EXPECT_NEAR(s(0, 1), 0.5, 1e-12);
  EXPECT_NEAR(s(1, 1), 1.0, 1e-12);
}

TEST(TrajGp, InterpolationMatchesJointConditioning) {
  Rng rng(5);
  Mat qc(2, 2);
  qc << 0.8, 0.1, 0.1, 0.4;
  const std::vector<double> taus = {0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875};
  for (int trial = 0; trial < 10; ++trial) {
    const Vec a = random_vec(4, rng), b = random_vec(4, rng);
    const double ta = 0.3, tb = 0.3 + 0.5 + trial * 0.1;
    const Mat got = interpolate_states(qc, ta, tb, a, b, taus);
    Vec times(taus.size() + 2);
    times(0) = ta;
    for (std::size_t k = 0; k < taus.size(); ++k) times(static_cast<Eigen::Index>(k) + 1) = ta + taus[k] * (tb - ta);
    times(times.size() - 1) = tb;
    const GPModel prior = markov_prior(times, qc, Vec::Zero(4), Mat::Identity(4, 4));
    const int n = static_cast<int>(times.size());
    const Mat c = state_selector(n, 4, {0, n - 1});
    Vec obs(8);
    obs << a, b;
    Vec mu;
    Mat k;
    naive_condition(prior.mean, prior.cov, c, obs, Mat::Zero(8, 8), mu, k);
    for (std::size_t j = 0; j < taus.size(); ++j)
      EXPECT_LT((got.col(static_cast<Eigen::Index>(j)) - mu.segment(4 * (static_cast<int>(j) + 1), 4)).norm(), 1e-8);
  }
}

TEST(TrajGp, UpsampleKeepsSupportStates) {
  Vec q0(2), qg(2);
  q0 << 0.0, 0.0;
  qg << 1.0, 0.0;
  const LineSetup s = line_setup(q0, qg, 3, 0.5);
  const Trajectory dense = upsample(s.gp.qc, s.traj, 8);
  EXPECT_EQ(dense.size(), 4 + 3 * 8);
  EXPECT_LT((dense.state(9) - s.traj.state(1)).norm(), 1e-12);
  // a constant-velocity line stays a line
  for (int t = 0; t < dense.size(); ++t) EXPECT_NEAR(dense.position(t)(0), dense.times(t) / 1.5, 1e-9);
}
