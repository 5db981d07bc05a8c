#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fxlab/denoiser.hpp"
#include "fxlab/rng.hpp"
#include "fxlab/schedule.hpp"
#include "fxlab/types.hpp"

namespace fxlab {

// x_t = sqrt(abar) x0 + sqrt(1 - abar) eps. abar = 1 is the clean identity.
Vector forward_noise(const Vector& x0, const Vector& eps, double alpha_bar);
Vector forward_noise(const Vector& x0, int t, const Vector& eps,
                     const NoiseSchedule& schedule);

// score = -eps / sqrt(1 - abar); requires abar < 1.
Vector eps_to_score(const Vector& eps, double alpha_bar);
Vector eps_to_score(const Vector& eps, int t, const NoiseSchedule& schedule);
Vector score_to_eps(const Vector& score, double alpha_bar);
Vector score_to_eps(const Vector& score, int t, const NoiseSchedule& schedule);

struct TrainingExample {
  Vector x0;
  Condition cond;
};

// One Monte-Carlo term of the diffusion loss with its (t, eps) draw fixed.
struct LossDraw {
  Vector x0;
  Condition cond;
  int t;
  Vector eps;
};

std::vector<LossDraw> draw_loss_terms(const std::vector<TrainingExample>& batch,
                                      const NoiseSchedule& schedule, Rng& rng);

// Mean over draws of ||eps_hat(x_t, t, c) - eps||^2.
double loss_on_draws(const Denoiser& model, const std::vector<LossDraw>& draws,
                     const NoiseSchedule& schedule);

double diffusion_loss(const Denoiser& model,
                      const std::vector<TrainingExample>& batch,
                      const NoiseSchedule& schedule, Rng& rng);

struct SampleBatch {
  Matrix points;  // N x d
  std::uint64_t seed = 0;
  std::string provenance;
};

// Standard normal for (seed, sample, step); shared by every sampler so two
// samplers driven by the same seed see the same noise.
Vector sampler_noise(std::uint64_t seed, int sample, int step, int dim);

// Ancestral sampling from x_T ~ N(0, I) down to t = 1 with variance beta_t.
SampleBatch ancestral_sample(const Denoiser& model,
                             const NoiseSchedule& schedule, int n,
                             const Condition& cond, std::uint64_t seed,
                             std::string provenance = "");

}  // namespace fxlab
