#pragma once

#include <memory>

#include "fxlab/types.hpp"

namespace fxlab {

// An epsilon predictor eps(x_t, t, c). Implementations are immutable after
// construction and safe to query concurrently.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual int dim() const = 0;

  // Rows of `x` are points; the result has the same shape.
  virtual Matrix predict_eps(const Matrix& x, int t,
                             const Condition& cond) const = 0;

  Vector predict_eps(const Vector& x, int t, const Condition& cond) const;
};

using DenoiserPtr = std::shared_ptr<const Denoiser>;

// Routes unconditional queries to one denoiser and conditional queries to
// another. Lets analytic oracles play the role of a conditional model.
class ConditionRouter final : public Denoiser {
 public:
  ConditionRouter(DenoiserPtr unconditional, DenoiserPtr conditional);

  int dim() const override { return unconditional_->dim(); }
  Matrix predict_eps(const Matrix& x, int t,
                     const Condition& cond) const override;
  using Denoiser::predict_eps;

 private:
  DenoiserPtr unconditional_;
  DenoiserPtr conditional_;
};

}  // namespace fxlab
