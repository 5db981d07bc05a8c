#pragma once

#include <string>
#include <vector>

#include "fxlab/denoiser.hpp"
#include "fxlab/gaussian_mixture.hpp"
#include "fxlab/schedule.hpp"
#include "fxlab/types.hpp"

namespace fxlab {

enum class GuidanceMode { Direct, CFG, ModelGuidance, FineXtract };

std::string to_string(GuidanceMode mode);
GuidanceMode guidance_mode_from_string(const std::string& name);

struct GuidanceConfig {
  GuidanceMode mode = GuidanceMode::Direct;
  double w = 1.0;        // unconditional extrapolation scale, 1 / lambda
  double w_prime = 1.0;  // conditional scale, 1 / lambda'
  double k = 0.0;        // correction scale; negative values are allowed
  Condition caption;

  // Throws ConfigError on a missing caption or non-finite scales.
  void validate() const;
  std::string describe() const;

  static GuidanceConfig direct(Condition caption);
  static GuidanceConfig cfg(Caption caption, double w_prime = 3.0);
  static GuidanceConfig model_guidance(double w);
  // w' = 3, k = -0.02 unless overridden.
  static GuidanceConfig finextract(Caption caption, double w_prime = 3.0,
                                   double k = -0.02);
};

// eps_ft + (w - 1)(eps_ft - eps_pre)
Matrix model_guidance_eps(const Matrix& eps_ft, const Matrix& eps_pre, double w);
Vector model_guidance_eps(const Vector& eps_ft, const Vector& eps_pre, double w);

// eps_c + (w' - 1)(eps_c - eps_u)
Matrix cfg_eps(const Matrix& eps_cond, const Matrix& eps_uncond, double w_prime);
Vector cfg_eps(const Vector& eps_cond, const Vector& eps_uncond, double w_prime);

// eps_ft(c) + (w' - 1)(eps_ft(c) - eps_pre) + k eps_pre
Matrix finextract_eps(const Matrix& eps_ft_cond, const Matrix& eps_pre_uncond,
                      double w_prime, double k);
Vector finextract_eps(const Vector& eps_ft_cond, const Vector& eps_pre_uncond,
                      double w_prime, double k);

// A pseudo-denoiser combining a pretrained and a fine-tuned model. The
// condition passed to predict_eps is ignored; the config's caption is used.
class GuidedDenoiser final : public Denoiser {
 public:
  GuidedDenoiser(DenoiserPtr pre, DenoiserPtr ft, GuidanceConfig cfg);

  int dim() const override { return ft_->dim(); }
  Matrix predict_eps(const Matrix& x, int t,
                     const Condition& cond) const override;
  using Denoiser::predict_eps;

  const GuidanceConfig& config() const { return cfg_; }

 private:
  DenoiserPtr pre_;
  DenoiserPtr ft_;
  GuidanceConfig cfg_;
};

DenoiserPtr make_guided_denoiser(DenoiserPtr pre, DenoiserPtr ft,
                                 const GuidanceConfig& cfg);

// Measures the term dropped when the corrected rule replaces the exact
// three-term decomposition. Built on single Gaussians: pretrained p,
// fine-tune data q(x) and q(x|c), with the fine-tuned model blended per
// step as p^(1-l) q^l (unconditional) and that ^(1-l') q(x|c)^l'
// (conditional).
struct OmissionDiagnostic {
  double k = 0.0;                     // (w' - 1) / w
  double max_identity_error = 0.0;    // |rule - k eps_q(x,t) - eps_q(x,t,c)|
  double mean_ratio = 0.0;            // ||eps_q(x,t)|| / ||eps_q(x,t,c)||
  double max_ratio = 0.0;
  double max_rule_error = 0.0;        // |rule - eps_q(x,t,c)|
};

OmissionDiagnostic omission_diagnostic(const GaussianMixture& pre,
                                       const GaussianMixture& data,
                                       const GaussianMixture& data_cond,
                                       double lambda, double lambda_prime,
                                       const NoiseSchedule& schedule,
                                       const Matrix& points,
                                       const std::vector<int>& steps);

}  // namespace fxlab
