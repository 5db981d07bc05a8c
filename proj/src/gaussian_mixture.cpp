#include "fxlab/gaussian_mixture.hpp"

#include <cmath>
#include <numbers>

#include "fxlab/errors.hpp"

namespace fxlab {

GaussianMixture::GaussianMixture(Vector weights, Matrix means, Matrix variances)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      variances_(std::move(variances)) {
  if (weights_.size() == 0) throw ArgumentError("mixture needs a component");
  if (means_.rows() != weights_.size() || variances_.rows() != weights_.size() ||
      means_.cols() != variances_.cols() || means_.cols() == 0) {
    throw ShapeError("mixture weights/means/variances disagree in shape");
  }
  if ((weights_.array() < 0.0).any() || std::abs(weights_.sum() - 1.0) > 1e-12) {
    throw ArgumentError("mixture weights must be a probability vector");
  }
  if (!(variances_.array() > 0.0).all() || !variances_.allFinite() ||
      !means_.allFinite()) {
    throw ArgumentError("mixture variances must be positive and finite");
  }
}

GaussianMixture GaussianMixture::single(Vector mean, Vector variance) {
  Vector w(1);
  w[0] = 1.0;
  return GaussianMixture(std::move(w), mean.transpose(), variance.transpose());
}

GaussianMixture GaussianMixture::isotropic(const Vector& mean, double variance) {
  return single(mean, Vector::Constant(mean.size(), variance));
}

GaussianMixture GaussianMixture::noised(double alpha_bar) const {
  if (!(alpha_bar >= 0.0 && alpha_bar <= 1.0)) {
    throw ArgumentError("alpha_bar must lie in [0, 1]");
  }
  Matrix v = alpha_bar * variances_;
  v.array() += 1.0 - alpha_bar;
  return GaussianMixture(weights_, std::sqrt(alpha_bar) * means_, std::move(v));
}

namespace {

// log w_k + log N(x; mu_k, diag var_k) per component.
Vector component_log_terms(const GaussianMixture& gm, const Vector& x) {
  if (x.size() != gm.dim()) throw ShapeError("point dimension mismatch");
  const int K = gm.num_components();
  Vector out(K);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (int k = 0; k < K; ++k) {
    const auto diff = x.transpose() - gm.means().row(k);
    const auto var = gm.variances().row(k).array();
    const double quad = (diff.array().square() / var).sum();
    const double logdet = var.log().sum();
    out[k] = std::log(gm.weights()[k]) -
             0.5 * (quad + logdet + gm.dim() * log2pi);
  }
  return out;
}

}  // namespace

double GaussianMixture::log_density(const Vector& x) const {
  const Vector terms = component_log_terms(*this, x);
  const double m = terms.maxCoeff();
  return m + std::log((terms.array() - m).exp().sum());
}

Vector GaussianMixture::score(const Vector& x) const {
  const Vector terms = component_log_terms(*this, x);
  const double m = terms.maxCoeff();
  Vector resp = (terms.array() - m).exp();
  resp /= resp.sum();
  Vector s = Vector::Zero(dim());
  for (int k = 0; k < num_components(); ++k) {
    const Vector comp = -(x - means_.row(k).transpose()).array() /
                        variances_.row(k).transpose().array();
    s += resp[k] * comp;
  }
  return s;
}

Vector GaussianMixture::mean() const {
  return (weights_.transpose() * means_).transpose();
}

Matrix GaussianMixture::covariance() const {
  const Vector mu = mean();
  Matrix cov = Matrix::Zero(dim(), dim());
  for (int k = 0; k < num_components(); ++k) {
    const Vector dm = means_.row(k).transpose() - mu;
    cov += weights_[k] * (dm * dm.transpose());
    cov.diagonal() += weights_[k] * variances_.row(k).transpose();
  }
  return cov;
}

Vector noised_score(const GaussianMixture& gm, const Vector& x, double alpha_bar) {
  return gm.noised(alpha_bar).score(x);
}

Vector noised_score(const GaussianMixture& gm, const Vector& x, int t,
                    const NoiseSchedule& schedule) {
  return noised_score(gm, x, schedule.alpha_bar(t));
}

GaussianMixture geometric_interpolate(const GaussianMixture& p,
                                      const GaussianMixture& q, double lambda) {
  if (p.num_components() != 1 || q.num_components() != 1) {
    throw UnsupportedError(
        "geometric interpolation has a closed form only for single Gaussians");
  }
  if (p.dim() != q.dim()) throw ShapeError("interpolated Gaussians differ in dim");
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ArgumentError("lambda must lie in [0, 1]");
  }
  const Eigen::ArrayXd prec_p = p.variances().row(0).transpose().array().inverse();
  const Eigen::ArrayXd prec_q = q.variances().row(0).transpose().array().inverse();
  const Eigen::ArrayXd prec = (1.0 - lambda) * prec_p + lambda * prec_q;
  const Eigen::ArrayXd mean =
      ((1.0 - lambda) * prec_p * p.means().row(0).transpose().array() +
       lambda * prec_q * q.means().row(0).transpose().array()) /
      prec;
  return GaussianMixture::single(mean.matrix(), prec.inverse().matrix());
}

AnalyticDenoiser::AnalyticDenoiser(GaussianMixture mixture,
                                   NoiseSchedule schedule)
    : mixture_(std::move(mixture)), schedule_(std::move(schedule)) {}

namespace {

Matrix eps_from_mixture(const GaussianMixture& noised_gm, const Matrix& x,
                        double alpha_bar) {
  if (x.cols() != noised_gm.dim()) throw ShapeError("point dimension mismatch");
  const double sd = std::sqrt(1.0 - alpha_bar);
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out.row(i) = -sd * noised_gm.score(x.row(i).transpose()).transpose();
  }
  return out;
}

}  // namespace

Matrix AnalyticDenoiser::predict_eps(const Matrix& x, int t,
                                     const Condition&) const {
  const double ab = schedule_.alpha_bar(t);
  return eps_from_mixture(mixture_.noised(ab), x, ab);
}

GeometricBlendDenoiser::GeometricBlendDenoiser(GaussianMixture p,
                                               GaussianMixture q, double lambda,
                                               NoiseSchedule schedule)
    : p_(std::move(p)), q_(std::move(q)), lambda_(lambda),
      schedule_(std::move(schedule)) {
  // Validates single-component inputs and lambda up front.
  (void)geometric_interpolate(p_, q_, lambda_);
}

GaussianMixture GeometricBlendDenoiser::at_step(int t) const {
  const double ab = schedule_.alpha_bar(t);
  return geometric_interpolate(p_.noised(ab), q_.noised(ab), lambda_);
}

Matrix GeometricBlendDenoiser::predict_eps(const Matrix& x, int t,
                                           const Condition&) const {
  return eps_from_mixture(at_step(t), x, schedule_.alpha_bar(t));
}

}  // namespace fxlab
