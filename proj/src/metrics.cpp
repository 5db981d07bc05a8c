#include "fxlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fxlab/errors.hpp"
#include "fxlab/rng.hpp"

namespace fxlab {

double raw_cosine(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw ShapeError("similarity inputs differ in size");
  const double nx = x.norm();
  const double ny = y.norm();
  if (nx == 0.0 || ny == 0.0) return (x.array() == y.array()).all() ? 1.0 : 0.0;
  if (x == y) return 1.0;
  return std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0);
}

SimilarityFn cosine_similarity() {
  return SimilarityFn("cosine", [](const Vector& x, const Vector& y) {
    return 0.5 * (1.0 + raw_cosine(x, y));
  });
}

SimilarityFn projected_cosine_similarity(int dim, int num_features,
                                         double bandwidth, std::uint64_t seed) {
  if (dim < 1 || num_features < 1 || !(bandwidth > 0.0)) {
    throw ConfigError("projected cosine needs positive dim, features, bandwidth");
  }
  Rng rng{seed, 0x70726f6aULL};
  Matrix w(num_features, dim);
  Vector b(num_features);
  for (int i = 0; i < num_features; ++i) {
    for (int j = 0; j < dim; ++j) w(i, j) = rng.normal() / bandwidth;
    b[i] = 2.0 * std::numbers::pi * rng.uniform();
  }
  return SimilarityFn("projected_cosine", [w, b](const Vector& x, const Vector& y) {
    if (x.size() != w.cols() || y.size() != w.cols()) {
      throw ShapeError("projected cosine dimension mismatch");
    }
    if (x == y) return 1.0;
    const Vector fx = (w * x + b).array().cos();
    const Vector fy = (w * y + b).array().cos();
    return 0.5 * (1.0 + raw_cosine(fx, fy));
  });
}

SimilarityFn rbf_similarity(double bandwidth) {
  if (!(bandwidth > 0.0)) throw ConfigError("rbf bandwidth must be positive");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  return SimilarityFn("rbf", [inv](const Vector& x, const Vector& y) {
    if (x.size() != y.size()) throw ShapeError("similarity inputs differ in size");
    return std::exp(-(x - y).squaredNorm() * inv);
  });
}

SimilarityFn make_similarity(const SimilaritySpec& spec, int dim) {
  if (spec.name == "cosine") return cosine_similarity();
  if (spec.name == "rbf") return rbf_similarity(spec.bandwidth);
  if (spec.name == "projected_cosine") {
    return projected_cosine_similarity(dim, spec.features, spec.bandwidth,
                                       spec.seed);
  }
  throw ConfigError("unknown similarity '" + spec.name + "'");
}

Matrix cross_similarity(const Matrix& a, const Matrix& b, const SimilarityFn& sim) {
  if (a.cols() != b.cols()) throw ShapeError("point sets differ in dimension");
  Matrix s(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Vector ai = a.row(i).transpose();
    for (Eigen::Index j = 0; j < b.rows(); ++j) s(i, j) = sim(ai, b.row(j).transpose());
  }
  return s;
}

namespace {

void check_sets(const Matrix& train, const Matrix& extracted) {
  if (train.rows() == 0 || extracted.rows() == 0) {
    throw ArgumentError("metric inputs must be non-empty");
  }
}

Vector best_matches(const Matrix& train, const Matrix& extracted,
                    const SimilarityFn& sim) {
  check_sets(train, extracted);
  return cross_similarity(train, extracted, sim).rowwise().maxCoeff();
}

}  // namespace

double average_similarity(const Matrix& train, const Matrix& extracted,
                          const SimilarityFn& sim) {
  return best_matches(train, extracted, sim).mean();
}

double a_esr(const Matrix& train, const Matrix& extracted,
             const SimilarityFn& sim, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw ArgumentError("tau must lie in (0, 1)");
  const Vector best = best_matches(train, extracted, sim);
  return static_cast<double>((best.array() > tau).count()) /
         static_cast<double>(best.size());
}

MetricReport evaluate(const Matrix& train, const Matrix& extracted,
                      const SimilarityFn& sim, const std::vector<double>& taus) {
  check_sets(train, extracted);
  const Matrix s = cross_similarity(train, extracted, sim);
  MetricReport r;
  r.taus = taus;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index j = 0;
    r.best_score.push_back(s.row(i).maxCoeff(&j));
    r.best_index.push_back(static_cast<int>(j));
  }
  const Eigen::Map<const Vector> best(r.best_score.data(),
                                      static_cast<Eigen::Index>(r.best_score.size()));
  r.as = best.mean();
  for (double tau : taus) {
    if (!(tau > 0.0 && tau < 1.0)) throw ArgumentError("tau must lie in (0, 1)");
    r.a_esr.push_back(static_cast<double>((best.array() > tau).count()) /
                      static_cast<double>(best.size()));
  }
  return r;
}

}  // namespace fxlab
