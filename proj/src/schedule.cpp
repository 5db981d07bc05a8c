#include "fxlab/schedule.hpp"

#include <string>

#include "fxlab/errors.hpp"

namespace fxlab {

NoiseSchedule::NoiseSchedule(int num_steps, double beta_start, double beta_end)
    : num_steps_(num_steps), beta_start_(beta_start), beta_end_(beta_end) {
  if (num_steps < 1) throw ArgumentError("schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start < 1.0 && beta_end > 0.0 &&
        beta_end < 1.0)) {
    throw ArgumentError("betas must lie in (0, 1)");
  }
  betas_.resize(num_steps);
  alphas_.resize(num_steps);
  alpha_bars_.resize(num_steps);
  double running = 1.0;
  for (int i = 0; i < num_steps; ++i) {
    const double frac =
        num_steps == 1 ? 0.0 : static_cast<double>(i) / (num_steps - 1);
    betas_[i] = beta_start + frac * (beta_end - beta_start);
    alphas_[i] = 1.0 - betas_[i];
    running *= alphas_[i];
    alpha_bars_[i] = running;
  }
}

NoiseSchedule NoiseSchedule::linear_default(int num_steps) {
  const double scale = 1000.0 / num_steps;
  return NoiseSchedule(num_steps, 1e-4 * scale, 0.02 * scale);
}

void NoiseSchedule::check_step(int t) const {
  if (t < 1 || t > num_steps_) {
    throw ScheduleBoundsError("step " + std::to_string(t) +
                              " outside [1, " + std::to_string(num_steps_) +
                              "]");
  }
}

double NoiseSchedule::beta(int t) const {
  check_step(t);
  return betas_[t - 1];
}

double NoiseSchedule::alpha(int t) const {
  check_step(t);
  return alphas_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  check_step(t);
  return alpha_bars_[t - 1];
}

}  // namespace fxlab
