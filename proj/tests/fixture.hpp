#pragma once

// Small captioned toy problem shared by the model and caption tests.

#include <vector>

#include "fxlab/training.hpp"
#include "support.hpp"

namespace fxlab::testing {

inline const NoiseSchedule kSchedule = NoiseSchedule::linear_default();

inline GaussianMixture four_modes() {
  Matrix mu(4, 2);
  mu << -2, -2, -2, 2, 2, -2, 2, 2;
  return GaussianMixture(Vector::Constant(4, 0.25), mu, Matrix::Constant(4, 2, 0.3));
}

inline std::vector<TrainingExample> captioned_base(int n, std::uint64_t seed) {
  const auto gm = four_modes();
  std::vector<TrainingExample> out;
  for (int k = 0; k < 4; ++k) {
    const auto comp = GaussianMixture::single(gm.means().row(k).transpose(),
                                              gm.variances().row(k).transpose());
    for (auto& ex : draw_examples(comp, n / 4, seed + k, Caption{k + 1})) out.push_back(ex);
  }
  return out;
}

inline Matrix target_points() {
  Matrix x(4, 2);
  x << 0.0, 2.6, 2.6, 0.0, 0.0, -2.6, -2.6, 0.0;
  return x;
}

inline std::vector<TrainingExample> targets(const Caption& caption) {
  std::vector<TrainingExample> out;
  const Matrix x = target_points();
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.push_back({x.row(i).transpose(), caption});
  return out;
}

// One pretrained model shared by the fine-tuning tests.
inline const MLPDenoiser& pretrained() {
  static const MLPDenoiser model = [] {
    TrainConfig c;
    c.steps = 1500;
    c.batch_size = 128;
    c.learning_rate = 2e-3;
    c.uncond_prob = 0.2;
    c.seed = 11;
    return pretrain(small_arch(), small_vocab(), captioned_base(2000, 3), c, kSchedule);
  }();
  return model;
}

}  // namespace fxlab::testing
