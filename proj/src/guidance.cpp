#include "fxlab/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fxlab/errors.hpp"

namespace fxlab {

std::string to_string(GuidanceMode mode) {
  switch (mode) {
    case GuidanceMode::Direct: return "direct";
    case GuidanceMode::CFG: return "cfg";
    case GuidanceMode::ModelGuidance: return "model_guidance";
    case GuidanceMode::FineXtract: return "finextract";
  }
  return "unknown";
}

GuidanceMode guidance_mode_from_string(const std::string& name) {
  if (name == "direct") return GuidanceMode::Direct;
  if (name == "cfg") return GuidanceMode::CFG;
  if (name == "model_guidance") return GuidanceMode::ModelGuidance;
  if (name == "finextract") return GuidanceMode::FineXtract;
  throw ConfigError("unknown guidance mode '" + name + "'");
}

void GuidanceConfig::validate() const {
  if (!std::isfinite(w) || !std::isfinite(w_prime) || !std::isfinite(k)) {
    throw ConfigError("guidance scales must be finite");
  }
  if ((mode == GuidanceMode::CFG || mode == GuidanceMode::FineXtract) &&
      (!caption || caption->empty())) {
    throw ConfigError(to_string(mode) + " guidance requires a caption");
  }
}

std::string GuidanceConfig::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "mode=" << to_string(mode) << " w=" << w << " w_prime=" << w_prime
     << " k=" << k << " caption=";
  if (!caption) {
    os << "none";
  } else {
    for (std::size_t i = 0; i < caption->size(); ++i) {
      os << (i ? ":" : "") << (*caption)[i];
    }
  }
  return os.str();
}

GuidanceConfig GuidanceConfig::direct(Condition caption) {
  GuidanceConfig c;
  c.mode = GuidanceMode::Direct;
  c.caption = std::move(caption);
  return c;
}

GuidanceConfig GuidanceConfig::cfg(Caption caption, double w_prime) {
  GuidanceConfig c;
  c.mode = GuidanceMode::CFG;
  c.w_prime = w_prime;
  c.caption = std::move(caption);
  return c;
}

GuidanceConfig GuidanceConfig::model_guidance(double w) {
  GuidanceConfig c;
  c.mode = GuidanceMode::ModelGuidance;
  c.w = w;
  return c;
}

GuidanceConfig GuidanceConfig::finextract(Caption caption, double w_prime,
                                          double k) {
  GuidanceConfig c;
  c.mode = GuidanceMode::FineXtract;
  c.w_prime = w_prime;
  c.k = k;
  c.caption = std::move(caption);
  return c;
}

namespace {

template <typename M>
void check_same_shape(const M& a, const M& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("guidance inputs differ in shape");
  }
}

template <typename M>
M extrapolate(const M& toward, const M& away, double scale) {
  check_same_shape(toward, away);
  if (scale == 1.0) return toward;
  return toward + (scale - 1.0) * (toward - away);
}

template <typename M>
M corrected(const M& ft_cond, const M& pre_uncond, double w_prime, double k) {
  M out = extrapolate(ft_cond, pre_uncond, w_prime);
  if (k != 0.0) out += k * pre_uncond;
  return out;
}

}  // namespace

Matrix model_guidance_eps(const Matrix& eps_ft, const Matrix& eps_pre, double w) {
  return extrapolate(eps_ft, eps_pre, w);
}
Vector model_guidance_eps(const Vector& eps_ft, const Vector& eps_pre, double w) {
  return extrapolate(eps_ft, eps_pre, w);
}

Matrix cfg_eps(const Matrix& eps_cond, const Matrix& eps_uncond, double w_prime) {
  return extrapolate(eps_cond, eps_uncond, w_prime);
}
Vector cfg_eps(const Vector& eps_cond, const Vector& eps_uncond, double w_prime) {
  return extrapolate(eps_cond, eps_uncond, w_prime);
}

Matrix finextract_eps(const Matrix& eps_ft_cond, const Matrix& eps_pre_uncond,
                      double w_prime, double k) {
  return corrected(eps_ft_cond, eps_pre_uncond, w_prime, k);
}
Vector finextract_eps(const Vector& eps_ft_cond, const Vector& eps_pre_uncond,
                      double w_prime, double k) {
  return corrected(eps_ft_cond, eps_pre_uncond, w_prime, k);
}

GuidedDenoiser::GuidedDenoiser(DenoiserPtr pre, DenoiserPtr ft,
                               GuidanceConfig cfg)
    : pre_(std::move(pre)), ft_(std::move(ft)), cfg_(std::move(cfg)) {
  if (!pre_ || !ft_) throw ArgumentError("guided denoiser needs two models");
  if (pre_->dim() != ft_->dim()) {
    throw ShapeError("pretrained and fine-tuned models differ in dimension");
  }
  cfg_.validate();
}

Matrix GuidedDenoiser::predict_eps(const Matrix& x, int t,
                                   const Condition&) const {
  switch (cfg_.mode) {
    case GuidanceMode::Direct:
      return ft_->predict_eps(x, t, cfg_.caption);
    case GuidanceMode::CFG:
      return cfg_eps(ft_->predict_eps(x, t, cfg_.caption),
                     ft_->predict_eps(x, t, std::nullopt), cfg_.w_prime);
    case GuidanceMode::ModelGuidance:
      return model_guidance_eps(ft_->predict_eps(x, t, std::nullopt),
                                pre_->predict_eps(x, t, std::nullopt), cfg_.w);
    case GuidanceMode::FineXtract:
      return finextract_eps(ft_->predict_eps(x, t, cfg_.caption),
                            pre_->predict_eps(x, t, std::nullopt),
                            cfg_.w_prime, cfg_.k);
  }
  throw ConfigError("unknown guidance mode");
}

DenoiserPtr make_guided_denoiser(DenoiserPtr pre, DenoiserPtr ft,
                                 const GuidanceConfig& cfg) {
  return std::make_shared<GuidedDenoiser>(std::move(pre), std::move(ft), cfg);
}

OmissionDiagnostic omission_diagnostic(const GaussianMixture& pre,
                                       const GaussianMixture& data,
                                       const GaussianMixture& data_cond,
                                       double lambda, double lambda_prime,
                                       const NoiseSchedule& schedule,
                                       const Matrix& points,
                                       const std::vector<int>& steps) {
  if (!(lambda > 0.0 && lambda <= 1.0 && lambda_prime > 0.0 &&
        lambda_prime <= 1.0)) {
    throw ArgumentError("lambda and lambda' must lie in (0, 1]");
  }
  if (points.rows() == 0 || steps.empty()) {
    throw ArgumentError("diagnostic needs points and steps");
  }
  const double w = 1.0 / lambda;
  const double w_prime = 1.0 / lambda_prime;
  OmissionDiagnostic out;
  out.k = (w_prime - 1.0) / w;

  double ratio_sum = 0.0;
  std::size_t count = 0;
  for (int t : steps) {
    const double ab = schedule.alpha_bar(t);
    const double sd = std::sqrt(1.0 - ab);
    const GaussianMixture pre_t = pre.noised(ab);
    const GaussianMixture data_t = data.noised(ab);
    const GaussianMixture cond_t = data_cond.noised(ab);
    const GaussianMixture ft_uncond_t = geometric_interpolate(pre_t, data_t, lambda);
    const GaussianMixture ft_cond_t =
        geometric_interpolate(ft_uncond_t, cond_t, lambda_prime);
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const Vector x = points.row(i).transpose();
      const Vector eps_pre = -sd * pre_t.score(x);
      const Vector eps_ft_cond = -sd * ft_cond_t.score(x);
      const Vector eps_q = -sd * data_t.score(x);
      const Vector eps_q_cond = -sd * cond_t.score(x);
      const Vector rule = finextract_eps(eps_ft_cond, eps_pre, w_prime, out.k);
      out.max_identity_error =
          std::max(out.max_identity_error,
                   (rule - out.k * eps_q - eps_q_cond).cwiseAbs().maxCoeff());
      out.max_rule_error = std::max(out.max_rule_error,
                                    (rule - eps_q_cond).cwiseAbs().maxCoeff());
      const double denom = eps_q_cond.norm();
      if (denom > 0.0) {
        const double r = eps_q.norm() / denom;
        ratio_sum += r;
        out.max_ratio = std::max(out.max_ratio, r);
        ++count;
      }
    }
  }
  out.mean_ratio = count ? ratio_sum / static_cast<double>(count) : 0.0;
  return out;
}

}  // namespace fxlab
