#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "tpkmp/errors.hpp"
#include "tpkmp/gmm.hpp"
#include "tpkmp/kernels.hpp"

using namespace tpkmp;

namespace {

Mat two_clusters(std::uint64_t seed, Index per_cluster, double sigma) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  Mat x(2 * per_cluster, 1);
  for (Index i = 0; i < per_cluster; ++i) {
    x(i, 0) = n(rng);
    x(per_cluster + i, 0) = 10.0 + n(rng);
  }
  return x;
}

Mat random_points(std::uint64_t seed, Index n, Index d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Mat x(n, d);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
  x.col(0) = x.col(0) * 0.3 + x.col(d - 1) * 0.5;
  return x;
}

GaussianMixture mixture2(double w0, Vec m0, Mat c0, Vec m1, Mat c1) {
  GaussianMixture mix;
  mix.weights = Vec(2);
  mix.weights << w0, 1.0 - w0;
  mix.components.emplace_back(std::move(m0), c0);
  mix.components.emplace_back(std::move(m1), c1);
  return mix;
}

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(FitGmm, SingleComponentIsMomentMatching) {
  const Mat x = random_points(1, 300, 3);
  const auto fit = fit_gmm_points(x, 1, 0);
  const Vec mean = x.colwise().mean().transpose();
  const Mat dx = x.rowwise() - mean.transpose();
  const Mat cov = dx.transpose() * dx / static_cast<double>(x.rows());
  EXPECT_LT((fit.mixture.components[0].mean() - mean).norm(), 1e-12);
  EXPECT_LT(relative_error(fit.mixture.components[0].cov(), cov), 1e-12);
  EXPECT_DOUBLE_EQ(fit.mixture.weights[0], 1.0);
}

TEST(FitGmm, RecoversSeparatedClusters) {
  const auto fit = fit_gmm_points(two_clusters(2, 200, 0.1), 2, 7);
  std::vector<double> m{fit.mixture.components[0].mean()[0], fit.mixture.components[1].mean()[0]};
  std::sort(m.begin(), m.end());
  EXPECT_NEAR(m[0], 0.0, 0.1);
  EXPECT_NEAR(m[1], 10.0, 0.1);
}

TEST(FitGmm, LogLikelihoodNonDecreasingSingleComponent) {
  const auto fit = fit_gmm_points(random_points(3, 100, 2), 1, 0, {50, -1.0});
  ASSERT_EQ(fit.log_likelihood.size(), 51u);
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
    EXPECT_GE(fit.log_likelihood[i], fit.log_likelihood[i - 1] - 1e-9);
  }
}

TEST(FitGmm, LogLikelihoodNonDecreasingManyComponents) {
  const auto fit = fit_gmm_points(random_points(4, 400, 3), 6, 13, {120, -1.0});
  for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
    EXPECT_GE(fit.log_likelihood[i], fit.log_likelihood[i - 1] - 1e-9) << "iteration " << i;
  }
}

TEST(FitGmm, DeterministicPerSeed) {
  const Mat x = random_points(5, 300, 3);
  const auto a = fit_gmm_points(x, 4, 99);
  const auto b = fit_gmm_points(x, 4, 99);
  ASSERT_EQ(a.log_likelihood, b.log_likelihood);
  for (Index c = 0; c < 4; ++c) {
    EXPECT_EQ(a.mixture.components[c].mean(), b.mixture.components[c].mean());
    EXPECT_EQ(a.mixture.components[c].cov(), b.mixture.components[c].cov());
  }
  EXPECT_EQ(a.mixture.weights, b.mixture.weights);
}

TEST(FitGmm, SerialAndParallelAgreeBitwise) {
  const Mat x = random_points(6, 500, 3);
  const auto a = fit_gmm_points(x, 5, 1, {}, Exec::serial);
  const auto b = fit_gmm_points(x, 5, 1, {}, Exec::parallel);
  EXPECT_EQ(a.log_likelihood, b.log_likelihood);
  EXPECT_EQ(a.mixture.weights, b.mixture.weights);
}

TEST(FitGmm, WeightsAndResponsibilitiesNormalized) {
  const Mat x = random_points(7, 300, 2);
  const auto fit = fit_gmm_points(x, 3, 2);
  EXPECT_NEAR(fit.mixture.weights.sum(), 1.0, 1e-12);
  EXPECT_NO_THROW(fit.mixture.validate());
  Mat r = kernels::weighted_log_densities(x, fit.mixture, Exec::parallel);
  kernels::normalize_log_rows(r, Exec::parallel);
  const Vec rows = r.array().exp().rowwise().sum();
  EXPECT_LE((rows.array() - 1.0).abs().maxCoeff(), 1e-12);
}

TEST(FitGmm, CovarianceFloorKeepsFlatDirectionTiny) {
  // second coordinate is exactly constant, like demos recorded at one height
  Mat x = random_points(8, 200, 2);
  x.col(1).setConstant(0.25);
  const auto fit = fit_gmm_points(x, 2, 0);
  for (const auto& c : fit.mixture.components) {
    EXPECT_GT(c.cov()(1, 1), 0.0);
    EXPECT_LT(c.cov()(1, 1), 1e-5);
  }
}

TEST(FitGmm, Errors) {
  EXPECT_THROW(fit_gmm_points(Mat(0, 2), 1, 0), EmptyData);
  EXPECT_THROW(fit_gmm_points(random_points(1, 5, 2), 3, 0), ValidationError);
  EXPECT_THROW(fit_gmm(std::vector<Demonstration>{}, 1, 0), EmptyData);
}

TEST(Gmr, SingleComponentMatchesClosedFormConditioning) {
  Mat c(3, 3);
  c << 0.09, 0.02, -0.01, 0.02, 0.5, 0.1, -0.01, 0.1, 0.3;
  GaussianMixture mix;
  mix.weights = Vec::Ones(1);
  mix.components.emplace_back(vec({0.5, 1.0, -2.0}), c);
  const std::vector<double> q{0.0, 0.3, 0.7, 1.2};
  const auto ref = gmr(mix, q);
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Vec mu = vec({1.0, -2.0}) + c.block(1, 0, 2, 1) / c(0, 0) * (q[i] - 0.5);
    const Mat sig = c.block(1, 1, 2, 2) - c.block(1, 0, 2, 1) * c.block(0, 1, 1, 2) / c(0, 0);
    EXPECT_LT((ref.entries[i].mu - mu).norm() / mu.norm(), 1e-10);
    EXPECT_LT(relative_error(ref.entries[i].sigma, sig), 1e-10);
  }
}

TEST(Gmr, SymmetricMixtureAtCentre) {
  Mat c(2, 2);
  c << 0.04, 0.01, 0.01, 0.2;
  Mat c2(2, 2);
  c2 << 0.04, -0.01, -0.01, 0.2;
  const auto mix = mixture2(0.5, vec({0.3, 1.0}), c, vec({0.7, 3.0}), c2);
  const double q[] = {0.5};
  const auto ref = gmr(mix, q);
  // at s = 0.5 both components are equally responsible
  const double m0 = 1.0 + 0.01 / 0.04 * 0.2;
  const double m1 = 3.0 - 0.01 / 0.04 * (0.5 - 0.7);
  EXPECT_NEAR(ref.entries[0].mu[0], 0.5 * (m0 + m1), 1e-12);
}

TEST(Gmr, MatchesBruteForceConditional) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    Mat c0(2, 2), c1(2, 2);
    c0 << 0.02 + 0.05 * u(rng), 0.01, 0.01, 0.05 + 0.1 * u(rng);
    c1 << 0.02 + 0.05 * u(rng), -0.02, -0.02, 0.05 + 0.1 * u(rng);
    const auto mix = mixture2(0.3 + 0.4 * u(rng), vec({0.3, u(rng)}), c0, vec({0.7, 1 + u(rng)}), c1);
    const std::vector<double> q{0.0, 0.25, 0.5, 0.75, 1.0};
    const auto ref = gmr(mix, q);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const auto m = oracle::grid_conditional(mix, q[i], -6.0, 8.0);
      EXPECT_NEAR(ref.entries[i].mu[0], m.mean, 1e-4);
      EXPECT_NEAR(ref.entries[i].sigma(0, 0), m.var, 1e-4);
    }
  }
}

TEST(Gmr, SerialAndParallelAgree) {
  const auto fit = fit_gmm_points(random_points(9, 400, 3), 4, 3);
  const auto q = make_inputs(200, 1.0);
  const auto a = gmr(fit.mixture, q, Exec::serial);
  const auto b = gmr(fit.mixture, q, Exec::parallel);
  for (std::size_t i = 0; i < q.size(); ++i) {
    EXPECT_EQ(a.entries[i].mu, b.entries[i].mu);
    EXPECT_EQ(a.entries[i].sigma, b.entries[i].sigma);
  }
}

TEST(Gmr, CovariancesArePositiveDefinite) {
  const auto fit = fit_gmm_points(random_points(10, 400, 3), 6, 4);
  const auto ref = gmr(fit.mixture, make_inputs(300, 1.3));
  for (const auto& e : ref.entries) EXPECT_GT(min_eigenvalue(e.sigma), 0.0);
  EXPECT_NO_THROW(ref.validate());
}

TEST(MakeInputs, Grids) {
  EXPECT_EQ(make_inputs(2, 1.0), (std::vector<double>{0.0, 1.0}));
  EXPECT_EQ(make_inputs(5, 1.0), (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  const auto s = make_inputs(500, 1.0);
  EXPECT_NEAR(s[1] - s[0], 1.0 / 499.0, 1e-16);
  EXPECT_DOUBLE_EQ(s.back(), 1.0);
  EXPECT_THROW(make_inputs(1, 1.0), ValidationError);
}

TEST(Demonstration, Validation) {
  Demonstration d;
  d.inputs = {0.0, 0.5};
  d.outputs = Mat::Zero(2, 2);
  EXPECT_NO_THROW(d.validate());
  d.inputs = {0.5, 0.2};
  EXPECT_THROW(d.validate(), ValidationError);
  d.inputs = {0.0, 0.5};
  d.outputs(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(d.validate(), ValidationError);
}
