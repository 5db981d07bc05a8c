#include <cmath>
#include <memory>

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

Vector random_vector(Rng& rng, int d) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.normal();
  return v;
}

// Predicts the noise that was actually injected, knowing the clean point.
class PeekingDenoiser final : public Denoiser {
 public:
  PeekingDenoiser(Vector x0, NoiseSchedule s) : x0_(std::move(x0)), s_(std::move(s)) {}
  int dim() const override { return static_cast<int>(x0_.size()); }
  Matrix predict_eps(const Matrix& x, int t, const Condition&) const override {
    const double ab = s_.alpha_bar(t);
    Matrix out = x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      out.row(i) = (x.row(i) - std::sqrt(ab) * x0_.transpose()) / std::sqrt(1.0 - ab);
    }
    return out;
  }
  using Denoiser::predict_eps;

 private:
  Vector x0_;
  NoiseSchedule s_;
};

class ZeroDenoiser final : public Denoiser {
 public:
  explicit ZeroDenoiser(int d) : d_(d) {}
  int dim() const override { return d_; }
  Matrix predict_eps(const Matrix& x, int, const Condition&) const override {
    return Matrix::Zero(x.rows(), x.cols());
  }
  using Denoiser::predict_eps;

 private:
  int d_;
};

class NanDenoiser final : public Denoiser {
 public:
  int dim() const override { return 2; }
  Matrix predict_eps(const Matrix& x, int t, const Condition&) const override {
    Matrix out = Matrix::Zero(x.rows(), x.cols());
    if (t == 37) out(0, 0) = std::nan("");
    return out;
  }
  using Denoiser::predict_eps;
};

}  // namespace

TEST(Schedule, AlphaBarIsAStrictlyDecreasingCumulativeProduct) {
  const auto s = NoiseSchedule::linear_default(100);
  double prev = 1.0;
  for (int t = 1; t <= s.num_steps(); ++t) {
    EXPECT_GT(s.beta(t), 0.0);
    EXPECT_LT(s.beta(t), 1.0);
    EXPECT_DOUBLE_EQ(s.alpha(t), 1.0 - s.beta(t));
    EXPECT_NEAR(s.alpha_bar(t), prev * s.alpha(t), 1e-12 * prev);
    EXPECT_LT(s.alpha_bar(t), prev);
    EXPECT_GT(s.alpha_bar(t), 0.0);
    prev = s.alpha_bar(t);
  }
}

TEST(Schedule, RejectsOutOfRangeSteps) {
  const auto s = NoiseSchedule::linear_default(50);
  EXPECT_THROW(s.alpha_bar(0), ScheduleBoundsError);
  EXPECT_THROW(s.alpha_bar(51), ScheduleBoundsError);
  EXPECT_THROW(forward_noise(vec({1.0}), 0, vec({0.0}), s), ScheduleBoundsError);
}

TEST(ForwardNoise, HandEvaluatedClosedForm) {
  const Vector out = forward_noise(vec({1.0, 0.0}), vec({0.0, 1.0}), 0.25);
  EXPECT_NEAR(out[0], 0.5, 1e-15);
  EXPECT_NEAR(out[1], std::sqrt(0.75), 1e-15);
}

TEST(ForwardNoise, EdgeLimits) {
  const Vector x0 = vec({0.3, -1.2});
  const Vector eps = vec({2.0, 0.7});
  EXPECT_EQ(forward_noise(x0, eps, 1.0), x0);
  EXPECT_EQ(forward_noise(x0, eps, 0.0), eps);
}

TEST(ForwardNoise, MatchesIndependentFormulaAtRandomPoints) {
  const auto s = NoiseSchedule::linear_default();
  Rng rng{11};
  for (int i = 0; i < 10; ++i) {
    const int t = 1 + static_cast<int>(rng.below(100));
    const Vector x0 = random_vector(rng, 3);
    const Vector eps = random_vector(rng, 3);
    double ab = 1.0;
    for (int k = 1; k <= t; ++k) ab *= 1.0 - s.beta(k);
    const Vector expected = std::sqrt(ab) * x0 + std::sqrt(1 - ab) * eps;
    EXPECT_LT((forward_noise(x0, t, eps, s) - expected).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(ScoreBridge, HandValuesAndRoundTrip) {
  EXPECT_EQ(eps_to_score(Vector::Zero(2), 0.3), Vector::Zero(2));
  EXPECT_NEAR(eps_to_score(vec({1.0}), 0.75)[0], -2.0, 1e-15);
  EXPECT_THROW(eps_to_score(vec({1.0}), 1.0), DomainError);

  const auto s = NoiseSchedule::linear_default();
  Rng rng{5};
  for (int i = 0; i < 10; ++i) {
    const int t = 1 + static_cast<int>(rng.below(100));
    const Vector e = random_vector(rng, 4);
    const Vector expected = -e / std::sqrt(1.0 - s.alpha_bar(t));
    EXPECT_LT((eps_to_score(e, t, s) - expected).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LT((score_to_eps(eps_to_score(e, t, s), t, s) - e).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(DiffusionLoss, ZeroForTheInjectedNoise) {
  const auto s = NoiseSchedule::linear_default();
  const Vector x0 = vec({0.4, -1.0});
  PeekingDenoiser model(x0, s);
  std::vector<TrainingExample> batch(64, TrainingExample{x0, std::nullopt});
  Rng rng{3};
  EXPECT_LT(diffusion_loss(model, batch, s, rng), 1e-20);
}

TEST(DiffusionLoss, ZeroModelCostsTheDimension) {
  const auto s = NoiseSchedule::linear_default();
  ZeroDenoiser model(3);
  std::vector<TrainingExample> batch(20000, TrainingExample{Vector::Zero(3), std::nullopt});
  Rng rng{8};
  // E||eps||^2 = 3; the standard error at n = 2e4 is ~0.017.
  EXPECT_NEAR(diffusion_loss(model, batch, s, rng), 3.0, 0.08);
}

TEST(DiffusionLoss, EmptyBatchIsAnArgumentError) {
  const auto s = NoiseSchedule::linear_default();
  ZeroDenoiser model(2);
  Rng rng{1};
  EXPECT_THROW(diffusion_loss(model, {}, s, rng), ArgumentError);
}

TEST(Sampler, SameSeedIsBitwiseIdentical) {
  const auto s = NoiseSchedule::linear_default();
  AnalyticDenoiser model(GaussianMixture::isotropic(vec({1.0, -1.0}), 0.5), s);
  const auto a = ancestral_sample(model, s, 50, std::nullopt, 42);
  const auto b = ancestral_sample(model, s, 50, std::nullopt, 42);
  const auto c = ancestral_sample(model, s, 50, std::nullopt, 43);
  EXPECT_TRUE(a.points == b.points);
  EXPECT_FALSE(a.points == c.points);
}

TEST(Sampler, BatchesAreOrderIndependent) {
  const auto s = NoiseSchedule::linear_default();
  AnalyticDenoiser model(GaussianMixture::isotropic(vec({0.0, 2.0}), 0.3), s);
  const auto big = ancestral_sample(model, s, 20, std::nullopt, 9);
  const auto small = ancestral_sample(model, s, 5, std::nullopt, 9);
  EXPECT_TRUE(big.points.topRows(5) == small.points);
}

TEST(Sampler, StandardNormalMoments) {
  const auto s = NoiseSchedule::linear_default();
  AnalyticDenoiser model(GaussianMixture::isotropic(Vector::Zero(2), 1.0), s);
  const Matrix x = ancestral_sample(model, s, 10000, std::nullopt, 1).points;
  const Vector mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / (x.rows() - 1.0);
  EXPECT_LT(mean.lpNorm<Eigen::Infinity>(), 0.05);
  EXPECT_LT((cov - Matrix::Identity(2, 2)).lpNorm<Eigen::Infinity>(), 0.05);
}

TEST(Sampler, ConcentratedTarget) {
  const auto s = NoiseSchedule::linear_default();
  AnalyticDenoiser model(GaussianMixture::isotropic(vec({3.0, 3.0}), 0.01), s);
  const Matrix x = ancestral_sample(model, s, 2000, std::nullopt, 4).points;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    EXPECT_LT((x.row(i) - vec({3.0, 3.0}).transpose()).norm(), 1.0);
  }
}

TEST(Sampler, NonFiniteOutputReportsTheStep) {
  const auto s = NoiseSchedule::linear_default();
  NanDenoiser model;
  try {
    ancestral_sample(model, s, 3, std::nullopt, 1);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.step(), 37);
  }
  EXPECT_THROW(ancestral_sample(model, s, 0, std::nullopt, 1), ArgumentError);
}
