#pragma once

#include "fxlab/denoiser.hpp"
#include "fxlab/schedule.hpp"
#include "fxlab/types.hpp"

namespace fxlab {

// Diagonal-covariance Gaussian mixture. Rows of `means` / `variances` are
// components.
class GaussianMixture {
 public:
  GaussianMixture(Vector weights, Matrix means, Matrix variances);

  static GaussianMixture single(Vector mean, Vector variance);
  static GaussianMixture isotropic(const Vector& mean, double variance);

  int num_components() const { return static_cast<int>(weights_.size()); }
  int dim() const { return static_cast<int>(means_.cols()); }
  const Vector& weights() const { return weights_; }
  const Matrix& means() const { return means_; }
  const Matrix& variances() const { return variances_; }

  // Distribution of sqrt(abar) x + sqrt(1 - abar) eps for x from this mixture.
  GaussianMixture noised(double alpha_bar) const;

  double log_density(const Vector& x) const;
  Vector score(const Vector& x) const;

  Vector mean() const;
  Matrix covariance() const;

 private:
  Vector weights_;
  Matrix means_;
  Matrix variances_;
};

// Gradient of log of the mixture after forward noising to alpha_bar.
Vector noised_score(const GaussianMixture& gm, const Vector& x, double alpha_bar);
Vector noised_score(const GaussianMixture& gm, const Vector& x, int t,
                    const NoiseSchedule& schedule);

// Normalized p^(1-lambda) q^lambda for single diagonal Gaussians.
GaussianMixture geometric_interpolate(const GaussianMixture& p,
                                      const GaussianMixture& q, double lambda);

// Exact eps predictor of a mixture: eps = -sqrt(1 - abar) * noised score.
class AnalyticDenoiser final : public Denoiser {
 public:
  AnalyticDenoiser(GaussianMixture mixture, NoiseSchedule schedule);

  int dim() const override { return mixture_.dim(); }
  Matrix predict_eps(const Matrix& x, int t,
                     const Condition& cond) const override;
  using Denoiser::predict_eps;

  const GaussianMixture& mixture() const { return mixture_; }

 private:
  GaussianMixture mixture_;
  NoiseSchedule schedule_;
};

// Oracle "fine-tuned" model for single Gaussians: at every step the noised
// density is the geometric interpolation of the noised endpoints, so
// its score is exactly (1 - lambda) s_p + lambda s_q.
class GeometricBlendDenoiser final : public Denoiser {
 public:
  GeometricBlendDenoiser(GaussianMixture p, GaussianMixture q, double lambda,
                         NoiseSchedule schedule);

  int dim() const override { return p_.dim(); }
  Matrix predict_eps(const Matrix& x, int t,
                     const Condition& cond) const override;
  using Denoiser::predict_eps;

  // The blended single Gaussian at noise level t.
  GaussianMixture at_step(int t) const;

 private:
  GaussianMixture p_;
  GaussianMixture q_;
  double lambda_;
  NoiseSchedule schedule_;
};

}  // namespace fxlab
