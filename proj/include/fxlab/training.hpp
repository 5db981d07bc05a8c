#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fxlab/diffusion.hpp"
#include "fxlab/mlp.hpp"
#include "fxlab/schedule.hpp"

namespace fxlab {

enum class OptimizerKind { GradientDescent, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

struct TrainConfig {
  std::size_t steps = 1000;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  // Probability of replacing a caption by the null token during training.
  double uncond_prob = 0.0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Fine-tuning default: 200 steps per target image.
std::size_t default_finetune_steps(std::size_t num_targets);

struct TrainLog {
  std::vector<double> losses;  // minibatch loss per step
};

// Plain gradient descent or Adam over a flat list of tensors.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate);

  void step(const std::vector<Eigen::Map<Vector>>& params,
            const std::vector<Eigen::Map<const Vector>>& grads);

 private:
  OptimizerKind kind_;
  double lr_;
  std::size_t t_ = 0;
  std::vector<Vector> m_;
  std::vector<Vector> v_;
};

// Held-out diffusion loss per data dimension that pretraining should get
// under on unit-scale data. The zero predictor scores 1.
inline constexpr double kPretrainLossPerDim = 0.5;

// Trains a freshly initialized model on the base dataset (>= 100 points).
MLPDenoiser pretrain(const ArchSpec& arch, VocabularyPtr vocab,
                     const std::vector<TrainingExample>& dataset,
                     const TrainConfig& cfg, const NoiseSchedule& schedule,
                     TrainLog* log = nullptr);

// All denoiser weights train; the vocabulary stays frozen. The input model
// is left untouched.
MLPDenoiser finetune_full(const MLPDenoiser& model,
                          const std::vector<TrainingExample>& targets,
                          const TrainConfig& cfg, const NoiseSchedule& schedule,
                          TrainLog* log = nullptr);

// Rank-r adapter on one dense layer: W_eff = W + scale * A * B.
struct LowRankAdapter {
  Matrix a;  // out x r, starts at zero
  Matrix b;  // r x in
  double scale = 1.0;

  int rank() const { return static_cast<int>(a.cols()); }
  Matrix delta() const { return scale * a * b; }
};

// Only adapter factors train (on every trunk and condition layer); the
// returned model has the adapters merged into its weights. A layer with
// fewer than `rank` rows or columns gets an adapter of its own full rank.
MLPDenoiser finetune_lora(const MLPDenoiser& model,
                          const std::vector<TrainingExample>& targets, int rank,
                          const TrainConfig& cfg, const NoiseSchedule& schedule,
                          double scale = 1.0, TrainLog* log = nullptr);

}  // namespace fxlab
