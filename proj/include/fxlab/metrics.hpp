#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fxlab/types.hpp"

namespace fxlab {

// A named symmetric similarity with sim(x, x) = 1 and range [0, 1].
class SimilarityFn {
 public:
  using Fn = std::function<double(const Vector&, const Vector&)>;

  SimilarityFn(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  const std::string& name() const { return name_; }
  double operator()(const Vector& x, const Vector& y) const { return fn_(x, y); }

 private:
  std::string name_;
  Fn fn_;
};

// Raw cosine in [-1, 1]; zero vectors count as similar only to themselves.
double raw_cosine(const Vector& x, const Vector& y);

// (1 + cos) / 2.
SimilarityFn cosine_similarity();

// Rescaled cosine between fixed random Fourier features
// cos(W x / bandwidth + b), W ~ N(0, I), b ~ U[0, 2 pi).
SimilarityFn projected_cosine_similarity(int dim, int num_features,
                                         double bandwidth, std::uint64_t seed);

// exp(-||x - y||^2 / (2 bandwidth^2)).
SimilarityFn rbf_similarity(double bandwidth);

struct SimilaritySpec {
  std::string name = "rbf";
  double bandwidth = 0.5;
  int features = 64;
  std::uint64_t seed = 0;
};

// Registry shared by graph building and metrics.
SimilarityFn make_similarity(const SimilaritySpec& spec, int dim);

// sims(i, j) = sim(a_i, b_j).
Matrix cross_similarity(const Matrix& a, const Matrix& b, const SimilarityFn& sim);

// Mean over training points of the best similarity to any extracted point.
double average_similarity(const Matrix& train, const Matrix& extracted,
                          const SimilarityFn& sim);

// Fraction of training points whose best match is strictly above tau.
double a_esr(const Matrix& train, const Matrix& extracted,
             const SimilarityFn& sim, double tau);

struct MetricReport {
  double as = 0.0;
  std::vector<double> taus;
  std::vector<double> a_esr;  // parallel to taus
  std::vector<int> best_index;
  std::vector<double> best_score;
};

// Default taus: 0.7 (strict) and 0.6 (loose).
MetricReport evaluate(const Matrix& train, const Matrix& extracted,
                      const SimilarityFn& sim,
                      const std::vector<double>& taus = {0.7, 0.6});

}  // namespace fxlab
