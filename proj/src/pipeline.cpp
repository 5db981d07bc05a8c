#include "fxlab/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fxlab/diffusion.hpp"
#include "fxlab/errors.hpp"
#include "fxlab/guidance.hpp"
#include "fxlab/io.hpp"
#include "fxlab/report.hpp"
#include "fxlab/rng.hpp"
#include "fxlab/training.hpp"
#include "json_convert.hpp"

namespace fxlab {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const TrainingError*>(&e)) {
    return kExitNumeric;
  }
  if (dynamic_cast<const InfeasibleError*>(&e)) return kExitInfeasible;
  return kExitUsage;
}

ModelCache::ModelCache(std::optional<fs::path> dir) : dir_(std::move(dir)) {}

ModelPtr ModelCache::get_or_build(const std::string& key_text,
                                  const std::function<MLPDenoiser()>& build) {
  const std::uint64_t key = content_hash(key_text);
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;

  std::optional<fs::path> file;
  if (dir_) {
    char name[32];
    std::snprintf(name, sizeof name, "%016llx.ckpt", static_cast<unsigned long long>(key));
    file = *dir_ / name;
  }
  ModelPtr model;
  if (file && fs::exists(*file)) {
    model = std::make_shared<const MLPDenoiser>(load_checkpoint(*file).model);
    ++disk_hits_;
  } else {
    const MLPDenoiser trained = build();
    ++builds_;
    const auto bytes = encode_checkpoint(trained, key);
    model = std::make_shared<const MLPDenoiser>(decode_checkpoint(bytes).model);
    if (file) write_file(*file, std::string(bytes.begin(), bytes.end()));
  }
  memory_.emplace(key, model);
  return model;
}

VocabularyPtr build_vocabulary(const ExperimentConfig& cfg) {
  return std::make_shared<const TokenVocabulary>(
      TokenVocabulary::random(cfg.vocab.size, cfg.vocab.dim, cfg.vocab.seed, 0));
}

std::vector<TrainingExample> base_dataset(const ExperimentConfig& cfg) {
  std::vector<int> comps;
  const Matrix pts = sample_mixture(cfg.base.mixture, cfg.base.count,
                                    stage_seed(cfg.seed, SeedStream::BaseData), &comps);
  std::vector<TrainingExample> out;
  out.reserve(static_cast<std::size_t>(pts.rows()));
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    Condition c;
    if (cfg.base.captioned) c = Caption{comps[static_cast<std::size_t>(i)] + 1};
    out.push_back({pts.row(i).transpose(), c});
  }
  return out;
}

std::vector<TrainingExample> target_dataset(const ExperimentConfig& cfg) {
  std::vector<TrainingExample> out;
  for (Eigen::Index i = 0; i < cfg.targets.rows(); ++i) {
    Condition c;
    if (!cfg.caption.empty()) c = cfg.caption;
    out.push_back({cfg.targets.row(i).transpose(), c});
  }
  return out;
}

namespace {

Json pretrained_key_json(const ExperimentConfig& cfg) {
  return {{"kind", "pretrained"},
          {"format_version", kCheckpointFormatVersion},
          {"schedule", to_json(cfg.schedule)},
          {"arch", to_json(cfg.arch)},
          {"vocab", {{"size", cfg.vocab.size}, {"dim", cfg.vocab.dim}, {"seed", cfg.vocab.seed}}},
          {"base", {{"mixture", to_json(cfg.base.mixture)},
                    {"count", cfg.base.count},
                    {"captioned", cfg.base.captioned},
                    {"seed", stage_seed(cfg.seed, SeedStream::BaseData)}}},
          {"train", to_json(cfg.pretrain)}};
}

}  // namespace

std::string pretrained_key(const ExperimentConfig& cfg) { return pretrained_key_json(cfg).dump(); }

std::string finetuned_key(const ExperimentConfig& cfg) {
  Json j = {{"kind", "finetuned"},
            {"pretrained", pretrained_key_json(cfg)},
            {"targets", to_json(cfg.targets)},
            {"caption", cfg.caption},
            {"method", cfg.finetune.method},
            {"train", to_json(cfg.finetune.train)}};
  if (cfg.finetune.method == "lora") {
    j["rank"] = cfg.finetune.rank;
    j["scale"] = cfg.finetune.scale;
  }
  return j.dump();
}

ModelPtr obtain_pretrained(const ExperimentConfig& cfg, ModelCache& cache) {
  return cache.get_or_build(pretrained_key(cfg), [&] {
    auto vocab = build_vocabulary(cfg);
    return pretrain(cfg.arch, vocab, base_dataset(cfg), cfg.pretrain, cfg.schedule);
  });
}

ModelPtr obtain_finetuned(const ExperimentConfig& cfg, ModelCache& cache) {
  const ModelPtr pre = obtain_pretrained(cfg, cache);
  return cache.get_or_build(finetuned_key(cfg), [&] {
    const auto targets = target_dataset(cfg);
    if (cfg.finetune.method == "lora") {
      return finetune_lora(*pre, targets, cfg.finetune.rank, cfg.finetune.train, cfg.schedule,
                           cfg.finetune.scale);
    }
    return finetune_full(*pre, targets, cfg.finetune.train, cfg.schedule);
  });
}

std::uint64_t sampling_seed(const ExperimentConfig& cfg) {
  return stage_seed(cfg.seed, SeedStream::Sampling);
}

MethodResult run_method(const ExperimentConfig& cfg, const ModelPtr& pre, const ModelPtr& ft,
                        const MethodSpec& method) {
  MethodResult out;
  out.spec = method;
  const auto guided = make_guided_denoiser(pre, ft, method.guidance);
  out.samples = ancestral_sample(*guided, cfg.schedule, cfg.generation_count,
                                 method.guidance.caption, sampling_seed(cfg), method.name)
                    .points;
  const SimilarityFn sim = make_similarity(cfg.similarity, cfg.arch.data_dim);
  ClusteringConfig ccfg = cfg.clustering;
  ccfg.target_cliques = cfg.n0();
  out.extraction = extract(out.samples, cfg.n0(), sim, ccfg);
  out.metrics = evaluate(cfg.targets, out.extraction.points, sim, cfg.taus);
  return out;
}

RunReport run_pipeline(const ExperimentConfig& cfg, ModelCache* cache) {
  RunReport report;
  report.run_id = cfg.run_id;
  report.config_echo = cfg.echo();
  report.targets = cfg.targets;
  report.taus = cfg.taus;

  ModelCache local(cfg.cache_dir);
  ModelCache& models = cache ? *cache : local;

  using Clock = std::chrono::steady_clock;
  std::string stage;
  auto timed = [&](const std::string& name, const auto& fn) {
    stage = name;
    const auto start = Clock::now();
    fn();
    report.timings.emplace_back(
        name, std::chrono::duration<double>(Clock::now() - start).count());
  };

  try {
    cfg.validate();
    ModelPtr pre, ft;
    timed("pretrain", [&] { pre = obtain_pretrained(cfg, models); });
    timed("finetune", [&] { ft = obtain_finetuned(cfg, models); });
    for (const auto& m : cfg.methods) {
      timed("method:" + m.name, [&] { report.methods.push_back(run_method(cfg, pre, ft, m)); });
    }
  } catch (const std::exception& e) {
    report.failure = StageFailure{stage.empty() ? "config" : stage, e.what(), exit_code_for(e)};
  }
  return report;
}

namespace {

std::string timings_json(const RunReport& report) {
  Json j = Json::object();
  for (const auto& [name, secs] : report.timings) j[name] = secs;
  return j.dump(2) + "\n";
}

}  // namespace

void write_run_outputs(const RunReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<MetricRow> rows;
  std::vector<CliqueRow> clique_rows;
  for (const auto& m : report.methods) {
    rows.push_back({report.run_id, m.spec.name, m.metrics});
    const auto& ex = m.extraction;
    for (std::size_t c = 0; c < ex.cliques.cliques.size(); ++c) {
      clique_rows.push_back({m.spec.name, ex.cliques.phi,
                             static_cast<int>(ex.cliques.cliques[c].size()), ex.indices[c],
                             ex.cliques.truncated});
    }
    const fs::path dir = out_dir / m.spec.name;
    write_samples(dir / "samples.bin", m.samples);
    write_samples(dir / "extracted.bin", ex.points);
    write_file(out_dir / ("plot_samples_" + m.spec.name + ".svg"),
               scatter_svg(report.run_id + ": " + m.spec.name, report.targets, m.samples,
                           ex.points));
  }
  write_file(out_dir / "report.csv", metrics_csv(rows, report.taus));
  write_file(out_dir / "cliques.csv", cliques_csv(clique_rows));
  write_file(out_dir / "config.json", report.config_echo + "\n");
  write_file(out_dir / "timings.json", timings_json(report));
  const fs::path failure = out_dir / "failure.json";
  if (report.failure) {
    const Json j = {{"stage", report.failure->stage},
                    {"cause", report.failure->cause},
                    {"exit_code", report.failure->exit_code}};
    write_file(failure, j.dump(2) + "\n");
  } else if (fs::exists(failure)) {
    fs::remove(failure);
  }
}

SweepParam sweep_param_from_string(const std::string& name) {
  if (name == "w_prime") return SweepParam::WPrime;
  if (name == "k") return SweepParam::K;
  if (name == "N") return SweepParam::N;
  if (name == "N0") return SweepParam::N0;
  throw ConfigError("unknown sweep parameter '" + name + "' (w_prime, k, N, N0)");
}

std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::WPrime: return "w_prime";
    case SweepParam::K: return "k";
    case SweepParam::N: return "N";
    case SweepParam::N0: return "N0";
  }
  return "?";
}

namespace {

int as_count(double value, const char* what) {
  if (!(value >= 1.0) || value != std::floor(value) || value > 1e9) {
    throw ConfigError(std::string(what) + " sweep values must be positive integers");
  }
  return static_cast<int>(value);
}

}  // namespace

ExperimentConfig apply_sweep(const ExperimentConfig& cfg, SweepParam param, double value) {
  ExperimentConfig out = cfg;
  switch (param) {
    case SweepParam::WPrime:
      for (auto& m : out.methods) {
        if (m.guidance.mode == GuidanceMode::CFG || m.guidance.mode == GuidanceMode::FineXtract) {
          m.guidance.w_prime = value;
        }
      }
      break;
    case SweepParam::K:
      for (auto& m : out.methods) {
        if (m.guidance.mode == GuidanceMode::FineXtract) m.guidance.k = value;
      }
      break;
    case SweepParam::N:
      out.generation_count = as_count(value, "N");
      break;
    case SweepParam::N0: {
      const int n0 = as_count(value, "N0");
      if (n0 > cfg.targets.rows()) throw ConfigError("N0 exceeds the number of targets");
      out.targets = cfg.targets.topRows(n0);
      out.clustering.target_cliques = n0;
      if (out.finetune.default_steps) {
        out.finetune.train.steps = default_finetune_steps(static_cast<std::size_t>(n0));
      }
      break;
    }
  }
  out.validate();
  return out;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg, SweepParam param,
                                      const std::vector<double>& values, ModelCache* cache) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<ExperimentConfig> configs;
  for (double v : values) configs.push_back(apply_sweep(cfg, param, v));  // validate all first
  ModelCache local(cfg.cache_dir);
  ModelCache& models = cache ? *cache : local;
  std::vector<AblationRow> rows;
  for (std::size_t i = 0; i < values.size(); ++i) {
    rows.push_back({values[i], run_pipeline(configs[i], &models)});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows, SweepParam param,
                         const std::vector<double>& taus) {
  std::ostringstream out;
  out << "run_id,param,value,method,AS";
  for (double tau : taus) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", tau);
    out << ",A-ESR@" << buf;
  }
  out << '\n';
  for (const auto& row : rows) {
    for (const auto& m : row.report.methods) {
      out << row.report.run_id << ',' << to_string(param) << ',' << format_real(row.value) << ','
          << m.spec.name << ',' << format_real(m.metrics.as);
      for (double v : m.metrics.a_esr) out << ',' << format_real(v);
      out << '\n';
    }
  }
  return out.str();
}

void write_ablation_outputs(const std::vector<AblationRow>& rows, SweepParam param,
                            const std::vector<double>& taus, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_file(out_dir / "ablation.csv", ablation_csv(rows, param, taus));
  std::vector<Series> series;
  for (const auto& row : rows) {
    for (const auto& m : row.report.methods) {
      auto it = std::find_if(series.begin(), series.end(),
                             [&](const Series& s) { return s.name == m.spec.name; });
      if (it == series.end()) {
        series.push_back({m.spec.name, {}, {}});
        it = series.end() - 1;
      }
      it->x.push_back(row.value);
      it->y.push_back(m.metrics.as);
    }
  }
  write_file(out_dir / ("plot_ablation_" + to_string(param) + ".svg"),
             line_plot_svg("AS vs " + to_string(param), to_string(param), "AS", series));
  Json failures = Json::array();
  for (const auto& row : rows) {
    if (row.report.failure) {
      failures.push_back({{"value", row.value},
                          {"stage", row.report.failure->stage},
                          {"cause", row.report.failure->cause}});
    }
  }
  const fs::path failure = out_dir / "failure.json";
  if (!failures.empty()) {
    write_file(failure, failures.dump(2) + "\n");
  } else if (fs::exists(failure)) {
    fs::remove(failure);
  }
}

CaptionAttackReport run_caption_attack(const MLPDenoiser& pre, const MLPDenoiser& post,
                                       const CaptionAttackConfig& cfg) {
  const Matrix& ev_pre = pre.vocab()->embeddings();
  const Matrix& ev_post = post.vocab()->embeddings();
  if (ev_pre.rows() != ev_post.rows() || ev_pre.cols() != ev_post.cols() ||
      !(ev_pre.array() == ev_post.array()).all()) {
    throw ShapeError("checkpoints use different vocabularies");
  }
  const auto pairs = export_layer_pair(pre, post, cfg.layers);
  const TokenVocabulary& vocab = *post.vocab();
  CaptionAttackReport out;
  try {
    if (cfg.method == "argmax") {
      out.tokens = {rowspace_argmax_single(pairs, vocab)};
    } else if (cfg.method == "hard_prompt") {
      const HardPromptResult r = hard_prompt_extract(pairs, vocab, cfg.prompt);
      out.tokens = r.tokens;
      out.objective = r.objective;
      out.trajectory = r.trajectory;
      out.restart = r.restart;
    } else {
      throw ConfigError("unknown caption attack method '" + cfg.method + "'");
    }
  } catch (const DegenerateObjectiveError& e) {
    out.status = "degenerate";
    out.message = e.what();
    out.tokens = e.partial();
  } catch (const DegenerateError& e) {
    out.status = "degenerate";
    out.message = e.what();
  }
  if (cfg.truth && out.status == "ok") out.recovery_rate = token_recovery_rate(*cfg.truth, out.tokens);
  return out;
}

void write_caption_outputs(const CaptionAttackReport& report, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::ostringstream c;
  c << "status,tokens,objective,restart,recovery_rate\n";
  c << report.status << ',';
  for (std::size_t i = 0; i < report.tokens.size(); ++i) c << (i ? " " : "") << report.tokens[i];
  c << ',' << format_real(report.objective) << ',' << report.restart << ','
    << (report.recovery_rate ? format_real(*report.recovery_rate) : std::string()) << '\n';
  write_file(out_dir / "caption.csv", c.str());
  std::ostringstream t;
  t << "iteration,F\n";
  for (std::size_t i = 0; i < report.trajectory.size(); ++i) {
    t << i << ',' << format_real(report.trajectory[i]) << '\n';
  }
  write_file(out_dir / "trajectory.csv", t.str());
}

}  // namespace fxlab
