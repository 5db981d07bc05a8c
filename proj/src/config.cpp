#include "fxlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fxlab/errors.hpp"
#include "fxlab/io.hpp"
#include "fxlab/rng.hpp"
#include "json_convert.hpp"

namespace fxlab {

namespace fs = std::filesystem;

std::uint64_t stage_seed(std::uint64_t seed, SeedStream stream) {
  return mix_key({seed, 0x7374616765ULL, static_cast<std::uint64_t>(stream)});
}

std::uint64_t content_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<MethodSpec> default_methods(const Caption& caption) {
  return {{"direct", GuidanceConfig::direct(caption)},
          {"cfg", GuidanceConfig::cfg(caption, 3.0)},
          {"finextract", GuidanceConfig::finextract(caption, 3.0, -0.02)}};
}

std::vector<MethodSpec> lora_methods(const Caption& caption) {
  return {{"direct", GuidanceConfig::direct(caption)},
          {"cfg", GuidanceConfig::cfg(caption, 3.0)},
          {"finextract", GuidanceConfig::finextract(caption, 5.0, -0.02)}};
}

void ExperimentConfig::validate() const {
  arch.validate();
  if (run_id.empty() || run_id.find_first_of(",\n\r\"") != std::string::npos) {
    throw ConfigError("run_id must be non-empty and free of commas and quotes");
  }
  if (vocab.dim != arch.embed_dim) {
    throw ConfigError("vocab.dim must equal arch.embed_dim");
  }
  if (vocab.size < 2) throw ConfigError("vocab.size must be >= 2");
  if (base.mixture.dim() != arch.data_dim) {
    throw ConfigError("base mixture dimension does not match arch.data_dim");
  }
  if (base.count < 100) throw ConfigError("base.count must be >= 100");
  if (base.captioned && base.mixture.num_components() >= vocab.size) {
    throw ConfigError("captioned base needs one token per mixture component");
  }
  if (targets.rows() < 1) throw ConfigError("need at least one target point");
  if (targets.rows() > 32) throw ConfigError("at most 32 target points are supported");
  if (targets.cols() != arch.data_dim) {
    throw ConfigError("target dimension does not match arch.data_dim");
  }
  if (!targets.allFinite()) throw ConfigError("target points must be finite");
  for (int tok : caption) {
    if (tok < 0 || tok >= vocab.size) throw ConfigError("caption token out of range");
  }
  pretrain.validate();
  finetune.train.validate();
  if (finetune.method != "full" && finetune.method != "lora") {
    throw ConfigError("finetune.method must be 'full' or 'lora'");
  }
  if (finetune.method == "lora" && finetune.rank < 0) {
    throw ConfigError("finetune.rank must be >= 0");
  }
  if (methods.empty()) throw ConfigError("no methods requested");
  for (const auto& m : methods) {
    if (m.name.empty() || !std::all_of(m.name.begin(), m.name.end(), [](char ch) {
          return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
        })) {
      throw ConfigError("method names use letters, digits, '_' and '-' only");
    }
    m.guidance.validate();
    if (m.guidance.caption) {
      for (int tok : *m.guidance.caption) {
        if (tok < 0 || tok >= vocab.size) throw ConfigError("method caption token out of range");
      }
    }
  }
  for (std::size_t i = 0; i < methods.size(); ++i)
    for (std::size_t j = i + 1; j < methods.size(); ++j)
      if (methods[i].name == methods[j].name) {
        throw ConfigError("duplicate method name '" + methods[i].name + "'");
      }
  if (generation_count < n0()) {
    throw ConfigError("generation_count N must be >= N0 (" + std::to_string(n0()) + ")");
  }
  ClusteringConfig c = clustering;
  c.target_cliques = n0();
  c.validate();
  if (taus.empty()) throw ConfigError("need at least one tau");
  for (double tau : taus) {
    if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  }
  try {
    make_similarity(similarity, arch.data_dim);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("similarity: ") + e.what());
  }
}

std::string ExperimentConfig::echo() const {
  Json methods_json = Json::array();
  for (const auto& m : methods) {
    Json entry = {{"name", m.name}};
    entry.update(to_json(m.guidance));
    methods_json.push_back(std::move(entry));
  }
  Json j = {
      {"seed", seed},
      {"run_id", run_id},
      {"schedule", to_json(schedule)},
      {"arch", to_json(arch)},
      {"vocab", {{"size", vocab.size}, {"dim", vocab.dim}, {"seed", vocab.seed}}},
      {"base", {{"mixture", to_json(base.mixture)},
                {"count", base.count},
                {"captioned", base.captioned}}},
      {"targets", {{"points", to_json(targets)}}},
      {"caption", caption},
      {"pretrain", to_json(pretrain)},
      {"finetune", {{"method", finetune.method},
                    {"rank", finetune.rank},
                    {"scale", finetune.scale},
                    {"train", to_json(finetune.train)}}},
      {"methods", methods_json},
      {"generation_count", generation_count},
      {"clustering", to_json(clustering)},
      {"similarity", to_json(similarity)},
      {"taus", taus},
      {"output_dir", output_dir.string()},
  };
  if (cache_dir) j["cache_dir"] = cache_dir->string();
  return j.dump(2);
}

Matrix sample_mixture(const GaussianMixture& gm, int count, std::uint64_t seed,
                      std::vector<int>* components) {
  Rng rng(seed);
  Matrix out(count, gm.dim());
  for (int i = 0; i < count; ++i) {
    const double u = rng.uniform();
    int k = 0;
    double acc = gm.weights()[0];
    while (u >= acc && k + 1 < gm.num_components()) acc += gm.weights()[++k];
    for (int c = 0; c < gm.dim(); ++c) {
      out(i, c) = gm.means()(k, c) + std::sqrt(gm.variances()(k, c)) * rng.normal();
    }
    if (components) components->push_back(k);
  }
  return out;
}

namespace {

Matrix targets_from_json(const Json& j, const fs::path& base_dir, std::uint64_t seed) {
  if (j.is_array()) return points_from_json(j);
  if (j.contains("points")) return points_from_json(j.at("points"));
  if (j.contains("file")) {
    const fs::path p = base_dir / j.at("file").get<std::string>();
    try {
      return read_samples(p);
    } catch (const Error& e) {
      throw ConfigError(std::string("targets.file: ") + e.what());
    }
  }
  if (j.contains("generate")) {
    const Json& g = j.at("generate");
    const GaussianMixture gm = mixture_from_json(g.at("mixture"));
    int count = 4;
    std::uint64_t gseed = mix_key({seed, 0x746172676574ULL});
    read_opt(g, "count", count);
    read_opt(g, "seed", gseed);
    if (count < 1) throw ConfigError("targets.generate.count must be >= 1");
    return sample_mixture(gm, count, gseed);
  }
  throw ConfigError("targets needs one of 'points', 'file' or 'generate'");
}

std::vector<MethodSpec> methods_from_json(const Json& j, const Caption& caption) {
  if (j.is_string()) {
    const auto preset = j.get<std::string>();
    if (preset == "default") return default_methods(caption);
    if (preset == "lora") return lora_methods(caption);
    throw ConfigError("unknown method preset '" + preset + "'");
  }
  if (!j.is_array()) throw ConfigError("methods must be a preset name or a list");
  std::vector<MethodSpec> out;
  for (const Json& m : j) {
    MethodSpec spec;
    spec.guidance = guidance_from_json(m);
    spec.name = m.value("name", to_string(spec.guidance.mode));
    const bool conditional = spec.guidance.mode != GuidanceMode::ModelGuidance;
    const bool has_caption = m.contains("caption") || m.contains("caption_tokens");
    if (conditional && !has_caption) spec.guidance.caption = caption;
    out.push_back(std::move(spec));
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  ExperimentConfig cfg;
  try {
    read_opt(j, "seed", cfg.seed);
    read_opt(j, "run_id", cfg.run_id);
    if (j.contains("schedule")) cfg.schedule = schedule_from_json(j.at("schedule"));
    if (j.contains("arch")) cfg.arch = arch_from_json(j.at("arch"));
    cfg.vocab.dim = cfg.arch.embed_dim;
    cfg.vocab.seed = mix_key({cfg.seed, 0x766f636162ULL});
    if (j.contains("vocab")) {
      read_opt(j.at("vocab"), "size", cfg.vocab.size);
      read_opt(j.at("vocab"), "dim", cfg.vocab.dim);
      read_opt(j.at("vocab"), "seed", cfg.vocab.seed);
    }
    if (!j.contains("base")) throw ConfigError("missing 'base'");
    const Json& base = j.at("base");
    cfg.base.mixture = mixture_from_json(base.at("mixture"));
    read_opt(base, "count", cfg.base.count);
    read_opt(base, "captioned", cfg.base.captioned);

    if (!j.contains("targets")) throw ConfigError("missing 'targets'");
    cfg.targets = targets_from_json(j.at("targets"), base_dir, cfg.seed);
    read_opt(j, "caption", cfg.caption);

    TrainConfig pre_defaults;
    pre_defaults.steps = 4000;
    pre_defaults.learning_rate = 2e-3;
    pre_defaults.batch_size = 128;
    pre_defaults.uncond_prob = 0.2;
    pre_defaults.seed = stage_seed(cfg.seed, SeedStream::Pretrain);
    cfg.pretrain = j.contains("pretrain") ? train_config_from_json(j.at("pretrain"), pre_defaults)
                                          : pre_defaults;

    TrainConfig ft_defaults;
    ft_defaults.steps = default_finetune_steps(static_cast<std::size_t>(cfg.targets.rows()));
    ft_defaults.learning_rate = 1e-3;
    ft_defaults.batch_size = 32;
    ft_defaults.seed = stage_seed(cfg.seed, SeedStream::Finetune);
    cfg.finetune.train = ft_defaults;
    if (j.contains("finetune")) {
      const Json& ft = j.at("finetune");
      read_opt(ft, "method", cfg.finetune.method);
      read_opt(ft, "rank", cfg.finetune.rank);
      read_opt(ft, "scale", cfg.finetune.scale);
      if (ft.contains("train")) {
        cfg.finetune.train = train_config_from_json(ft.at("train"), ft_defaults);
        cfg.finetune.default_steps = !ft.at("train").contains("steps");
      }
    }

    if (j.contains("methods")) {
      cfg.methods = methods_from_json(j.at("methods"), cfg.caption);
    } else {
      cfg.methods = cfg.finetune.method == "lora" ? lora_methods(cfg.caption)
                                                  : default_methods(cfg.caption);
    }
    cfg.generation_count = 50 * static_cast<int>(cfg.targets.rows());
    read_opt(j, "generation_count", cfg.generation_count);
    if (j.contains("clustering")) cfg.clustering = clustering_from_json(j.at("clustering"));
    cfg.clustering.target_cliques = static_cast<int>(cfg.targets.rows());
    if (j.contains("similarity")) cfg.similarity = similarity_from_json(j.at("similarity"));
    read_opt(j, "taus", cfg.taus);

    std::string out = "out";
    read_opt(j, "output_dir", out);
    cfg.output_dir = fs::absolute(base_dir / out).lexically_normal();
    if (j.contains("cache_dir") && !j.at("cache_dir").is_null()) {
      cfg.cache_dir =
          fs::absolute(base_dir / j.at("cache_dir").get<std::string>()).lexically_normal();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), fs::absolute(path).parent_path());
}

}  // namespace fxlab
