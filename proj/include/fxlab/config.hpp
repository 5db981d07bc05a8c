#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fxlab/clustering.hpp"
#include "fxlab/gaussian_mixture.hpp"
#include "fxlab/guidance.hpp"
#include "fxlab/metrics.hpp"
#include "fxlab/mlp.hpp"
#include "fxlab/schedule.hpp"
#include "fxlab/training.hpp"

namespace fxlab {

struct VocabSpec {
  int size = 64;
  int dim = 32;  // must equal arch.embed_dim
  std::uint64_t seed = 0;
};

// Pretraining data: `count` draws from the mixture. When captioned, a draw
// from component k carries the one-token caption {k + 1}.
struct BaseSpec {
  GaussianMixture mixture = GaussianMixture::isotropic(Vector::Zero(2), 1.0);
  int count = 2000;
  bool captioned = true;
};

struct FinetuneSpec {
  std::string method = "full";  // full | lora
  int rank = 4;
  double scale = 1.0;
  TrainConfig train;
  bool default_steps = true;  // steps follow 200 * N0 unless set explicitly
};

struct MethodSpec {
  std::string name;
  GuidanceConfig guidance;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string run_id = "run";
  NoiseSchedule schedule = NoiseSchedule::linear_default();
  ArchSpec arch;
  VocabSpec vocab;
  BaseSpec base;
  Matrix targets;      // N0 x d fine-tuning points
  Caption caption;     // shared by every target
  TrainConfig pretrain;
  FinetuneSpec finetune;
  std::vector<MethodSpec> methods;
  int generation_count = 0;  // N
  ClusteringConfig clustering;
  SimilaritySpec similarity;
  std::vector<double> taus{0.7, 0.6};
  std::filesystem::path output_dir;               // absolute once loaded
  std::optional<std::filesystem::path> cache_dir;  // absolute once loaded

  int n0() const { return static_cast<int>(targets.rows()); }
  // Throws ConfigError. Runs before any compute.
  void validate() const;
  // Resolved config as JSON; reloading it reproduces the run.
  std::string echo() const;
};

// Methods used when a config lists none: Direct, CFG (w' = 3) and
// FineXtract (w' = 3, k = -0.02), all on the config caption.
std::vector<MethodSpec> default_methods(const Caption& caption);
// LoRA preset: FineXtract at w' = 5 next to CFG at w' = 3.
std::vector<MethodSpec> lora_methods(const Caption& caption);

// Relative paths inside the document resolve against base_dir.
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

// Stage-specific seeds derived from the experiment seed.
enum class SeedStream : std::uint64_t {
  BaseData = 1,
  Pretrain = 3,
  Finetune = 4,
  Sampling = 5,
};
std::uint64_t stage_seed(std::uint64_t seed, SeedStream stream);

// Seeded draws from a mixture; `components` receives each draw's component.
Matrix sample_mixture(const GaussianMixture& gm, int count, std::uint64_t seed,
                      std::vector<int>* components = nullptr);

// 64-bit FNV-1a.
std::uint64_t content_hash(const std::string& text);

}  // namespace fxlab
