#include "fxlab/diffusion.hpp"

#include <cmath>
#include <string>

#include "fxlab/errors.hpp"

namespace fxlab {

Vector Denoiser::predict_eps(const Vector& x, int t,
                             const Condition& cond) const {
  const Matrix row = x.transpose();
  return predict_eps(row, t, cond).row(0).transpose();
}

ConditionRouter::ConditionRouter(DenoiserPtr unconditional,
                                 DenoiserPtr conditional)
    : unconditional_(std::move(unconditional)),
      conditional_(std::move(conditional)) {
  if (unconditional_->dim() != conditional_->dim()) {
    throw ShapeError("routed denoisers disagree on dimension");
  }
}

Matrix ConditionRouter::predict_eps(const Matrix& x, int t,
                                    const Condition& cond) const {
  return cond ? conditional_->predict_eps(x, t, cond)
              : unconditional_->predict_eps(x, t, cond);
}

Vector forward_noise(const Vector& x0, const Vector& eps, double alpha_bar) {
  if (x0.size() != eps.size()) throw ShapeError("x0 and eps differ in size");
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
    throw ArgumentError("alpha_bar must lie in [0, 1]");
  }
  if (!eps.allFinite()) throw ArgumentError("eps must be finite");
  if (alpha_bar == 1.0) return x0;
  return std::sqrt(alpha_bar) * x0 + std::sqrt(1.0 - alpha_bar) * eps;
}

Vector forward_noise(const Vector& x0, int t, const Vector& eps,
                     const NoiseSchedule& schedule) {
  return forward_noise(x0, eps, schedule.alpha_bar(t));
}

namespace {

double noise_std(double alpha_bar) {
  if (!(alpha_bar < 1.0)) {
    throw DomainError("score conversion needs alpha_bar < 1");
  }
  return std::sqrt(1.0 - alpha_bar);
}

}  // namespace

Vector eps_to_score(const Vector& eps, double alpha_bar) {
  return -eps / noise_std(alpha_bar);
}

Vector eps_to_score(const Vector& eps, int t, const NoiseSchedule& schedule) {
  return eps_to_score(eps, schedule.alpha_bar(t));
}

Vector score_to_eps(const Vector& score, double alpha_bar) {
  return -score * noise_std(alpha_bar);
}

Vector score_to_eps(const Vector& score, int t,
                    const NoiseSchedule& schedule) {
  return score_to_eps(score, schedule.alpha_bar(t));
}

std::vector<LossDraw> draw_loss_terms(const std::vector<TrainingExample>& batch,
                                      const NoiseSchedule& schedule, Rng& rng) {
  if (batch.empty()) throw ArgumentError("diffusion loss needs a non-empty batch");
  std::vector<LossDraw> draws;
  draws.reserve(batch.size());
  for (const auto& ex : batch) {
    LossDraw d{ex.x0, ex.cond, 0, Vector(ex.x0.size())};
    d.t = 1 + static_cast<int>(rng.below(schedule.num_steps()));
    for (Eigen::Index i = 0; i < d.eps.size(); ++i) d.eps[i] = rng.normal();
    draws.push_back(std::move(d));
  }
  return draws;
}

double loss_on_draws(const Denoiser& model, const std::vector<LossDraw>& draws,
                     const NoiseSchedule& schedule) {
  if (draws.empty()) throw ArgumentError("diffusion loss needs a non-empty batch");
  double total = 0.0;
  for (const auto& d : draws) {
    const Vector xt = forward_noise(d.x0, d.t, d.eps, schedule);
    const Vector pred = model.predict_eps(xt, d.t, d.cond);
    if (pred.size() != d.eps.size()) throw ShapeError("denoiser output size");
    total += (pred - d.eps).squaredNorm();
  }
  return total / static_cast<double>(draws.size());
}

double diffusion_loss(const Denoiser& model,
                      const std::vector<TrainingExample>& batch,
                      const NoiseSchedule& schedule, Rng& rng) {
  return loss_on_draws(model, draw_loss_terms(batch, schedule, rng), schedule);
}

Vector sampler_noise(std::uint64_t seed, int sample, int step, int dim) {
  Rng rng{seed, static_cast<std::uint64_t>(sample),
          static_cast<std::uint64_t>(step)};
  Vector z(dim);
  for (int i = 0; i < dim; ++i) z[i] = rng.normal();
  return z;
}

SampleBatch ancestral_sample(const Denoiser& model,
                             const NoiseSchedule& schedule, int n,
                             const Condition& cond, std::uint64_t seed,
                             std::string provenance) {
  if (n < 1) throw ArgumentError("sample count must be at least 1");
  const int d = model.dim();
  const int T = schedule.num_steps();

  // Key step 0 is reserved for x_T; step t >= 2 keys the noise added when
  // moving from x_t to x_{t-1}.
  Matrix x(n, d);
  for (int i = 0; i < n; ++i) x.row(i) = sampler_noise(seed, i, 0, d).transpose();

  for (int t = T; t >= 1; --t) {
    const Matrix eps = model.predict_eps(x, t, cond);
    if (eps.rows() != n || eps.cols() != d) {
      throw ShapeError("denoiser output shape mismatch");
    }
    if (!eps.allFinite()) {
      throw NumericError("non-finite eps prediction at step " + std::to_string(t), t);
    }
    const double beta = schedule.beta(t);
    const double coef = beta / std::sqrt(1.0 - schedule.alpha_bar(t));
    x = (x - coef * eps) / std::sqrt(schedule.alpha(t));
    if (t > 1) {
      const double sigma = std::sqrt(beta);
      for (int i = 0; i < n; ++i) {
        x.row(i) += sigma * sampler_noise(seed, i, t, d).transpose();
      }
    }
  }
  if (!x.allFinite()) throw NumericError("non-finite sample", 0);
  return SampleBatch{std::move(x), seed, std::move(provenance)};
}

}  // namespace fxlab
