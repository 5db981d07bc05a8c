#pragma once

#include <vector>

namespace fxlab {

// Discrete linear-beta schedule. Steps are 1-indexed: t in [1, T].
// Clean data (no noise) is not a step; use the alpha_bar = 1 overloads.
class NoiseSchedule {
 public:
  NoiseSchedule(int num_steps, double beta_start, double beta_end);

  // T=100 with the usual 1000-step DDPM betas rescaled by 1000/T, so the
  // terminal alpha_bar is ~2e-5 and x_T ~ N(0, I) is a faithful start.
  static NoiseSchedule linear_default(int num_steps = 100);

  int num_steps() const { return num_steps_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }

  double beta(int t) const;
  double alpha(int t) const;
  double alpha_bar(int t) const;

  // Throws ScheduleBoundsError unless t in [1, T].
  void check_step(int t) const;

 private:
  int num_steps_;
  double beta_start_;
  double beta_end_;
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

}  // namespace fxlab
