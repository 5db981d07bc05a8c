#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "fxlab/diffusion.hpp"
#include "fxlab/errors.hpp"
#include "fxlab/gaussian_mixture.hpp"
#include "fxlab/rng.hpp"
#include "fxlab/schedule.hpp"

using namespace fxlab;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Vector random_vector(Rng& rng, int d, double scale = 1.0) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = scale * rng.normal();
  return v;
}

GaussianMixture random_mixture(Rng& rng, int k, int d) {
  Vector w(k);
  Matrix mu(k, d), var(k, d);
  for (int i = 0; i < k; ++i) {
    w[i] = 0.2 + rng.uniform();
    for (int j = 0; j < d; ++j) {
      mu(i, j) = 2.0 * rng.normal();
      var(i, j) = 0.2 + rng.uniform();
    }
  }
  return GaussianMixture(w / w.sum(), mu, var);
}

GaussianMixture random_single(Rng& rng, int d) {
  Vector var(d);
  for (int j = 0; j < d; ++j) var[j] = 0.1 + 2.0 * rng.uniform();
  return GaussianMixture::single(random_vector(rng, d, 2.0), var);
}

Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST(Mixture, RejectsInvalidParameters) {
  EXPECT_THROW(GaussianMixture(vec({0.5, 0.6}), Matrix::Zero(2, 1), Matrix::Ones(2, 1)),
               ArgumentError);
  EXPECT_THROW(GaussianMixture(vec({1.0}), Matrix::Zero(1, 1), Matrix::Zero(1, 1)),
               ArgumentError);
  EXPECT_THROW(GaussianMixture(vec({1.0}), Matrix::Zero(1, 2), Matrix::Ones(1, 1)), ShapeError);
}

TEST(NoisedScore, StandardNormalAtHalfNoiseIsMinusX) {
  const auto gm = GaussianMixture::isotropic(Vector::Zero(2), 1.0);
  const Vector x = vec({0.7, -1.9});
  EXPECT_LT((noised_score(gm, x, 0.5) + x).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(NoisedScore, SymmetricPairVanishesAtTheOrigin) {
  Matrix mu(2, 2);
  mu << 1.5, -0.5, -1.5, 0.5;
  const GaussianMixture gm(vec({0.5, 0.5}), mu, Matrix::Constant(2, 2, 0.3));
  for (double ab : {0.9, 0.5, 0.01}) {
    EXPECT_LT(noised_score(gm, Vector::Zero(2), ab).norm(), 1e-14);
  }
}

TEST(NoisedScore, MatchesFiniteDifferencesOfTheNoisedLogDensity) {
  Rng rng{21};
  const auto s = NoiseSchedule::linear_default();
  for (int trial = 0; trial < 10; ++trial) {
    const auto gm = random_mixture(rng, 3, 2);
    const int t = 1 + static_cast<int>(rng.below(100));
    const Vector x = random_vector(rng, 2, 2.0);
    const auto noised = gm.noised(s.alpha_bar(t));
    const Vector fd = fd_gradient([&](const Vector& y) { return noised.log_density(y); }, x, 1e-5);
    const Vector an = noised_score(gm, x, t, s);
    EXPECT_LT((an - fd).norm() / std::max(1e-8, an.norm()), 1e-5) << "trial " << trial;
  }
}

TEST(NoisedScore, ComponentsAreTheForwardConvolution) {
  Rng rng{2};
  const auto gm = random_mixture(rng, 2, 3);
  const auto n = gm.noised(0.3);
  EXPECT_LT((n.means() - std::sqrt(0.3) * gm.means()).norm(), 1e-15);
  EXPECT_LT((n.variances() - (0.3 * gm.variances().array() + 0.7).matrix()).norm(), 1e-15);
}

TEST(Geometric, EndpointsAndHandExample) {
  const auto p = GaussianMixture::isotropic(vec({0.0}), 1.0);
  const auto q = GaussianMixture::isotropic(vec({2.0}), 1.0);
  const auto mid = geometric_interpolate(p, q, 0.5);
  EXPECT_NEAR(mid.means()(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(mid.variances()(0, 0), 1.0, 1e-15);

  Rng rng{4};
  const auto a = random_single(rng, 3);
  const auto b = random_single(rng, 3);
  const auto at0 = geometric_interpolate(a, b, 0.0);
  const auto at1 = geometric_interpolate(a, b, 1.0);
  EXPECT_LT((at0.means() - a.means()).norm() + (at0.variances() - a.variances()).norm(), 1e-14);
  EXPECT_LT((at1.means() - b.means()).norm() + (at1.variances() - b.variances()).norm(), 1e-14);
}

TEST(Geometric, RejectsMixtures) {
  Rng rng{1};
  const auto gm = random_mixture(rng, 2, 2);
  const auto single = random_single(rng, 2);
  EXPECT_THROW(geometric_interpolate(gm, single, 0.5), UnsupportedError);
  EXPECT_THROW(geometric_interpolate(single, single, 1.5), ArgumentError);
}

// The blended density's unnormalized log is (1 - l) log p + l log q, so the
// clean-data score is linear in l.
TEST(Geometric, CleanScoreIsTheLinearBlend) {
  Rng rng{8};
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_single(rng, 2);
    const auto q = random_single(rng, 2);
    const double l = rng.uniform();
    const auto g = geometric_interpolate(p, q, l);
    const Vector x = random_vector(rng, 2);
    const Vector blend = (1 - l) * p.score(x) + l * q.score(x);
    EXPECT_LT((g.score(x) - blend).norm(), 1e-10);
  }
}

TEST(Geometric, UnnormalizedMixtureBlendMatchesFiniteDifferences) {
  Rng rng{17};
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_mixture(rng, 3, 2);
    const auto q = random_mixture(rng, 2, 2);
    const double l = rng.uniform();
    const Vector x = random_vector(rng, 2);
    auto log_blend = [&](const Vector& y) {
      return (1 - l) * p.log_density(y) + l * q.log_density(y);
    };
    const Vector fd = fd_gradient(log_blend, x, 1e-5);
    const Vector an = (1 - l) * p.score(x) + l * q.score(x);
    EXPECT_LT((an - fd).norm() / std::max(1e-8, an.norm()), 1e-5);
  }
}

TEST(GeometricBlend, NoisedScoreIsTheLinearBlendAtEveryStep) {
  Rng rng{31};
  const auto s = NoiseSchedule::linear_default();
  for (double l : {0.2, 0.5, 0.8}) {
    const auto p = random_single(rng, 2);
    const auto q = random_single(rng, 2);
    GeometricBlendDenoiser blend(p, q, l, s);
    for (int t : {1, 10, 50, 90, 100}) {
      const Vector x = random_vector(rng, 2, 2.0);
      const Vector expected = (1 - l) * noised_score(p, x, t, s) + l * noised_score(q, x, t, s);
      const Vector got = eps_to_score(blend.predict_eps(x, t, std::nullopt), t, s);
      EXPECT_LT((got - expected).lpNorm<Eigen::Infinity>(), 1e-8);
    }
  }
}

TEST(AnalyticDenoiser, EpsIsScaledNegativeScore) {
  Rng rng{12};
  const auto s = NoiseSchedule::linear_default();
  const auto gm = random_mixture(rng, 4, 2);
  AnalyticDenoiser model(gm, s);
  for (int i = 0; i < 10; ++i) {
    const int t = 1 + static_cast<int>(rng.below(100));
    const Vector x = random_vector(rng, 2, 2.0);
    const Vector expected = -std::sqrt(1 - s.alpha_bar(t)) * noised_score(gm, x, t, s);
    EXPECT_LT((model.predict_eps(x, t, std::nullopt) - expected).lpNorm<Eigen::Infinity>(),
              1e-12);
  }
}

// Forward noising commutes with geometric interpolation when both
// endpoints share a covariance, so the literal clean-space blend already
// has the linear noised score.
TEST(Geometric, SharedVarianceBlendCommutesWithNoising) {
  Rng rng{44};
  const auto s = NoiseSchedule::linear_default();
  for (double l : {0.2, 0.5, 0.8}) {
    const Vector var = vec({0.4 + rng.uniform(), 0.4 + rng.uniform()});
    const auto p = GaussianMixture::single(random_vector(rng, 2, 2.0), var);
    const auto q = GaussianMixture::single(random_vector(rng, 2, 2.0), var);
    const auto g = geometric_interpolate(p, q, l);
    for (int t : {1, 25, 50, 75, 100}) {
      const Vector x = random_vector(rng, 2, 2.0);
      const Vector blend = (1 - l) * noised_score(p, x, t, s) + l * noised_score(q, x, t, s);
      EXPECT_LT((noised_score(g, x, t, s) - blend).lpNorm<Eigen::Infinity>(), 1e-8);
    }
  }
}

// With unequal covariances the two constructions disagree, which is why
// the oracle blends the noised endpoints step by step.
TEST(Geometric, UnequalVarianceBlendDoesNotCommuteWithNoising) {
  const auto p = GaussianMixture::isotropic(vec({0.0}), 1.0);
  const auto q = GaussianMixture::isotropic(vec({0.0}), 0.25);
  const auto g = geometric_interpolate(p, q, 0.5);
  const Vector x = vec({1.0});
  const Vector blend = 0.5 * noised_score(p, x, 0.5) + 0.5 * noised_score(q, x, 0.5);
  EXPECT_GT((noised_score(g, x, 0.5) - blend).norm(), 1e-3);
}
