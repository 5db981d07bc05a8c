#pragma once

#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fxlab/caption.hpp"
#include "fxlab/clustering.hpp"
#include "fxlab/config.hpp"
#include "fxlab/layer_pair.hpp"
#include "fxlab/metrics.hpp"
#include "fxlab/mlp.hpp"

namespace fxlab {

// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitInfeasible = 4;

int exit_code_for(const std::exception& e);

using ModelPtr = std::shared_ptr<const MLPDenoiser>;

// Trained models keyed by a content hash of everything that determines
// them. Held in memory and, with a directory, as checkpoint files. Models
// always pass through the checkpoint encoding, so a cached model and a
// freshly trained one are bit-identical.
class ModelCache {
 public:
  explicit ModelCache(std::optional<std::filesystem::path> dir = std::nullopt);

  ModelPtr get_or_build(const std::string& key_text, const std::function<MLPDenoiser()>& build);

  // Number of models trained (not served from memory or disk).
  std::size_t builds() const { return builds_; }
  std::size_t disk_hits() const { return disk_hits_; }

 private:
  std::optional<std::filesystem::path> dir_;
  std::map<std::uint64_t, ModelPtr> memory_;
  std::size_t builds_ = 0;
  std::size_t disk_hits_ = 0;
};

VocabularyPtr build_vocabulary(const ExperimentConfig& cfg);
std::vector<TrainingExample> base_dataset(const ExperimentConfig& cfg);
std::vector<TrainingExample> target_dataset(const ExperimentConfig& cfg);

// Cache keys (canonical JSON of the inputs).
std::string pretrained_key(const ExperimentConfig& cfg);
std::string finetuned_key(const ExperimentConfig& cfg);

ModelPtr obtain_pretrained(const ExperimentConfig& cfg, ModelCache& cache);
ModelPtr obtain_finetuned(const ExperimentConfig& cfg, ModelCache& cache);

struct MethodResult {
  MethodSpec spec;
  Matrix samples;
  ExtractionResult extraction;
  MetricReport metrics;
};

struct StageFailure {
  std::string stage;
  std::string cause;
  int exit_code = kExitUsage;
};

struct RunReport {
  std::string run_id;
  std::string config_echo;
  Matrix targets;
  std::vector<double> taus;
  std::vector<MethodResult> methods;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
  std::optional<StageFailure> failure;
};

// Every method samples with the same noise stream (common random numbers),
// so methods that reduce to one another produce identical samples.
std::uint64_t sampling_seed(const ExperimentConfig& cfg);

MethodResult run_method(const ExperimentConfig& cfg, const ModelPtr& pre, const ModelPtr& ft,
                        const MethodSpec& method);

// pretrain -> finetune -> per method: sample N, extract N0, score. Stage
// failures are recorded in the report rather than thrown; completed
// methods are kept.
RunReport run_pipeline(const ExperimentConfig& cfg, ModelCache* cache = nullptr);

// report.csv, cliques.csv, <method>/samples.bin, <method>/extracted.bin,
// plot_samples_<method>.svg, config.json, timings.json and (on failure)
// failure.json.
void write_run_outputs(const RunReport& report, const std::filesystem::path& out_dir);

enum class SweepParam { WPrime, K, N, N0 };
SweepParam sweep_param_from_string(const std::string& name);
std::string to_string(SweepParam p);

// w_prime applies to every CFG and FineXtract method; k to FineXtract; N is
// the generation count; N0 keeps the first N0 targets (and, unless set
// explicitly, rescales the fine-tuning steps).
ExperimentConfig apply_sweep(const ExperimentConfig& cfg, SweepParam param, double value);

struct AblationRow {
  double value = 0.0;
  RunReport report;
};

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, SweepParam param,
                                      const std::vector<double>& values,
                                      ModelCache* cache = nullptr);

// Header: run_id,param,value,method,AS,A-ESR@<tau>...
std::string ablation_csv(const std::vector<AblationRow>& rows, SweepParam param,
                         const std::vector<double>& taus);
void write_ablation_outputs(const std::vector<AblationRow>& rows, SweepParam param,
                            const std::vector<double>& taus, const std::filesystem::path& out_dir);

struct CaptionAttackConfig {
  LayerSelector layers;
  HardPromptConfig prompt;
  std::string method = "hard_prompt";  // hard_prompt | argmax
  std::optional<Caption> truth;
};

struct CaptionAttackReport {
  std::string status = "ok";  // ok | degenerate
  std::string message;
  Caption tokens;
  double objective = 0.0;
  std::vector<double> trajectory;
  int restart = 0;
  std::optional<double> recovery_rate;
};

// Shape mismatches propagate; a degenerate delta is reported with the
// partial result.
CaptionAttackReport run_caption_attack(const MLPDenoiser& pre, const MLPDenoiser& post,
                                       const CaptionAttackConfig& cfg);

// caption.csv and trajectory.csv.
void write_caption_outputs(const CaptionAttackReport& report, const std::filesystem::path& out_dir);

}  // namespace fxlab
