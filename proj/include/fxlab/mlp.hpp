#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "fxlab/denoiser.hpp"
#include "fxlab/diffusion.hpp"
#include "fxlab/schedule.hpp"
#include "fxlab/types.hpp"

namespace fxlab {

// Frozen table of unit-norm token embeddings (rows). Stands in for a text
// encoder; captions are encoded per position by row lookup.
class TokenVocabulary {
 public:
  TokenVocabulary(Matrix embeddings, int null_token);

  // Gaussian rows normalized to unit length.
  static TokenVocabulary random(int size, int dim, std::uint64_t seed,
                                int null_token = 0);

  int size() const { return static_cast<int>(embeddings_.rows()); }
  int dim() const { return static_cast<int>(embeddings_.cols()); }
  int null_token() const { return null_token_; }
  const Matrix& embeddings() const { return embeddings_; }

  // W x N matrix of the caption's per-position rows.
  Matrix embed(const Caption& caption) const;
  void check_token(int token) const;

 private:
  Matrix embeddings_;
  int null_token_;
};

using VocabularyPtr = std::shared_ptr<const TokenVocabulary>;

struct ArchSpec {
  int data_dim = 2;
  int hidden = 64;
  int num_hidden_layers = 2;  // trunk has num_hidden_layers + 1 dense layers
  int time_features = 16;     // even
  int embed_dim = 32;

  void validate() const;
  bool operator==(const ArchSpec&) const = default;
};

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

// Trunk layer l maps its input to hidden layer l (the last one to eps).
// cond[l] is the bias-free map from the pooled caption embedding into
// hidden layer l; these are the condition-facing layers.
struct MlpParameters {
  std::vector<DenseLayer> trunk;
  std::vector<Matrix> cond;

  // Zero-filled copy with the same shapes.
  MlpParameters zeros_like() const;
  std::size_t num_scalars() const;
  bool all_finite() const;
};

// Visits every tensor in declaration order: trunk (weight, bias) pairs,
// then condition layers.
void for_each_tensor(MlpParameters& params,
                     const std::function<void(Eigen::Map<Vector>)>& fn);
void for_each_tensor(const MlpParameters& params,
                     const std::function<void(Eigen::Map<const Vector>)>& fn);

// Sinusoidal embedding of the integer step.
Vector time_features(int t, int num_features);

class MLPDenoiser final : public Denoiser {
 public:
  MLPDenoiser(ArchSpec arch, VocabularyPtr vocab, MlpParameters params);

  // Weights ~ N(0, 1/fan_in), zero biases.
  static MLPDenoiser initialize(const ArchSpec& arch, VocabularyPtr vocab,
                                std::uint64_t seed);

  int dim() const override { return arch_.data_dim; }
  Matrix predict_eps(const Matrix& x, int t,
                     const Condition& cond) const override;
  using Denoiser::predict_eps;

  // Mean-pooled caption embedding; unconditional uses the null token.
  Vector condition_embedding(const Condition& cond) const;

  // Mean ||eps_hat - eps||^2 over the draws; writes d loss / d params.
  double loss_and_gradient(const std::vector<LossDraw>& draws,
                           const NoiseSchedule& schedule,
                           MlpParameters* grad) const;

  // Same as above with effective weights replaced (used by adapters).
  static double loss_and_gradient(const ArchSpec& arch,
                                  const TokenVocabulary& vocab,
                                  const MlpParameters& params,
                                  const std::vector<LossDraw>& draws,
                                  const NoiseSchedule& schedule,
                                  MlpParameters* grad);

  const ArchSpec& arch() const { return arch_; }
  const MlpParameters& params() const { return params_; }
  const VocabularyPtr& vocab() const { return vocab_; }

 private:
  ArchSpec arch_;
  VocabularyPtr vocab_;
  MlpParameters params_;
};

}  // namespace fxlab
