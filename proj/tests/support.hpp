#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <vector>

#include "fxlab/diffusion.hpp"
#include "fxlab/gaussian_mixture.hpp"
#include "fxlab/mlp.hpp"
#include "fxlab/rng.hpp"
#include "fxlab/training.hpp"

namespace fxlab::testing {

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Vector random_vector(Rng& rng, int d, double scale = 1.0) {
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = scale * rng.normal();
  return v;
}

inline Matrix random_matrix(Rng& rng, int r, int c, double scale = 1.0) {
  Matrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = scale * rng.normal();
  return m;
}

inline std::vector<TrainingExample> draw_examples(const GaussianMixture& gm, int n,
                                                  std::uint64_t seed, Condition cond) {
  Rng rng{seed};
  std::vector<TrainingExample> out;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    int k = 0;
    while (k + 1 < gm.num_components() && u > gm.weights()[k]) u -= gm.weights()[k++];
    Vector x(gm.dim());
    for (int j = 0; j < gm.dim(); ++j) {
      x[j] = gm.means()(k, j) + std::sqrt(gm.variances()(k, j)) * rng.normal();
    }
    out.push_back({x, cond});
  }
  return out;
}

inline ArchSpec small_arch() {
  ArchSpec a;
  a.hidden = 32;
  a.num_hidden_layers = 2;
  a.time_features = 8;
  a.embed_dim = 16;
  return a;
}

inline VocabularyPtr small_vocab(std::uint64_t seed = 7) {
  return std::make_shared<const TokenVocabulary>(TokenVocabulary::random(64, 16, seed));
}

// Row-wise fraction of energy outside span{e}: ||D - (D e) e^T|| / ||D||.
inline double off_span_ratio(const Matrix& delta, const Vector& e) {
  const Vector u = e.normalized();
  const Matrix rest = delta - (delta * u) * u.transpose();
  return rest.norm() / delta.norm();
}

}  // namespace fxlab::testing
