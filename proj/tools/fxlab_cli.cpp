// fxlab: command-line front end for the extraction lab.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "fxlab/config.hpp"
#include "fxlab/errors.hpp"
#include "fxlab/io.hpp"
#include "fxlab/pipeline.hpp"
#include "fxlab/report.hpp"

namespace fs = std::filesystem;
using namespace fxlab;

namespace {

std::vector<double> parse_reals(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty value list");
  return out;
}

Caption parse_tokens(const std::string& text) {
  Caption out;
  for (double v : parse_reals(text)) {
    if (v != static_cast<int>(v)) throw ConfigError("token ids must be integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

fs::path pick(const std::string& flag, const fs::path& fallback) {
  return flag.empty() ? fallback : fs::path(flag);
}

int finish(const RunReport& report) {
  if (!report.failure) return kExitOk;
  std::cerr << "stage '" << report.failure->stage << "' failed: " << report.failure->cause << '\n';
  return report.failure->exit_code;
}

int cmd_pretrain(const std::string& config_path, const std::string& out) {
  const ExperimentConfig cfg = load_config(config_path);
  ModelCache cache(cfg.cache_dir);
  const auto model = obtain_pretrained(cfg, cache);
  const fs::path path = pick(out, cfg.output_dir / "pretrained.ckpt");
  save_checkpoint(path, *model, cfg.seed);
  std::cout << "wrote " << path.string() << '\n';
  return kExitOk;
}

int cmd_finetune(const std::string& config_path, const std::string& out) {
  const ExperimentConfig cfg = load_config(config_path);
  ModelCache cache(cfg.cache_dir);
  const fs::path dir = pick(out, cfg.output_dir);
  const auto pre = obtain_pretrained(cfg, cache);
  const auto ft = obtain_finetuned(cfg, cache);
  save_checkpoint(dir / "pretrained.ckpt", *pre, cfg.seed);
  save_checkpoint(dir / "finetuned.ckpt", *ft, cfg.seed);
  std::cout << "wrote " << (dir / "pretrained.ckpt").string() << " and "
            << (dir / "finetuned.ckpt").string() << '\n';
  return kExitOk;
}

int cmd_extract(const std::string& config_path, const std::string& out) {
  const ExperimentConfig cfg = load_config(config_path);
  const RunReport report = run_pipeline(cfg);
  const fs::path dir = pick(out, cfg.output_dir);
  write_run_outputs(report, dir);
  for (const auto& m : report.methods) {
    std::cout << m.spec.name << ": AS=" << format_real(m.metrics.as);
    for (std::size_t i = 0; i < m.metrics.taus.size(); ++i) {
      std::cout << " A-ESR@" << m.metrics.taus[i] << '=' << format_real(m.metrics.a_esr[i]);
    }
    std::cout << '\n';
  }
  return finish(report);
}

int cmd_ablate(const std::string& config_path, const std::string& param_name,
               const std::string& values_text, const std::string& out) {
  const ExperimentConfig cfg = load_config(config_path);
  const SweepParam param = sweep_param_from_string(param_name);
  const auto values = parse_reals(values_text);
  const auto rows = run_ablation(cfg, param, values);
  const fs::path dir = pick(out, cfg.output_dir / ("ablation_" + to_string(param)));
  write_ablation_outputs(rows, param, cfg.taus, dir);
  std::cout << ablation_csv(rows, param, cfg.taus);
  for (const auto& row : rows) {
    if (row.report.failure) return finish(row.report);
  }
  return kExitOk;
}

struct AttackArgs {
  std::string pre, post, out = "caption_attack", truth, layers = "all";
  std::string variant = "difference_of_principal", method = "hard_prompt";
  int tokens = 1, iters = 1000, restarts = 8;
  double lr = 0.1;
  std::uint64_t seed = 0;
};

int cmd_caption_attack(const AttackArgs& a) {
  const Checkpoint pre = load_checkpoint(a.pre);
  const Checkpoint post = load_checkpoint(a.post);
  CaptionAttackConfig cfg;
  cfg.layers = LayerSelector::parse(a.layers);
  cfg.method = a.method;
  cfg.prompt.num_tokens = a.tokens;
  cfg.prompt.iterations = a.iters;
  cfg.prompt.learning_rate = a.lr;
  cfg.prompt.seed = a.seed;
  cfg.prompt.restarts = a.restarts;
  cfg.prompt.variant = objective_variant_from_string(a.variant);
  if (!a.truth.empty()) cfg.truth = parse_tokens(a.truth);
  const CaptionAttackReport report = run_caption_attack(pre.model, post.model, cfg);
  write_caption_outputs(report, a.out);
  std::cout << "status=" << report.status << " tokens=";
  for (std::size_t i = 0; i < report.tokens.size(); ++i) {
    std::cout << (i ? " " : "") << report.tokens[i];
  }
  if (report.recovery_rate) std::cout << " recovery=" << format_real(*report.recovery_rate);
  std::cout << '\n';
  if (report.status != "ok") {
    std::cerr << report.message << '\n';
    return kExitNumeric;
  }
  return kExitOk;
}

// Re-scores a finished run from its artifacts and redraws its plots.
int cmd_report(const std::string& run_dir) {
  const fs::path dir(run_dir);
  const ExperimentConfig cfg = load_config(dir / "config.json");
  const SimilarityFn sim = make_similarity(cfg.similarity, cfg.arch.data_dim);
  std::ostringstream csv;
  csv << "method,N,N0,AS";
  for (double tau : cfg.taus) csv << ",A-ESR@" << tau;
  csv << '\n';
  int found = 0;
  for (const auto& m : cfg.methods) {
    const fs::path mdir = dir / m.name;
    if (!fs::exists(mdir / "extracted.bin")) continue;
    ++found;
    const Matrix samples = read_samples(mdir / "samples.bin");
    const Matrix extracted = read_samples(mdir / "extracted.bin");
    const MetricReport r = evaluate(cfg.targets, extracted, sim, cfg.taus);
    csv << m.name << ',' << samples.rows() << ',' << extracted.rows() << ',' << format_real(r.as);
    for (double v : r.a_esr) csv << ',' << format_real(v);
    csv << '\n';
    write_file(dir / ("plot_samples_" + m.name + ".svg"),
               scatter_svg(cfg.run_id + ": " + m.name, cfg.targets, samples, extracted));
  }
  if (found == 0) throw ConfigError("no method artifacts under " + dir.string());
  write_file(dir / "summary.csv", csv.str());
  std::cout << csv.str();
  return kExitOk;
}

// Redraws plot_ablation_<param>.svg from ablation.csv.
int cmd_report_ablation(const fs::path& csv_path) {
  const auto rows = parse_csv(std::string([&] {
    const auto bytes = read_file(csv_path);
    return std::string(bytes.begin(), bytes.end());
  }()));
  if (rows.size() < 2 || rows[0].size() < 5) throw ConfigError("malformed ablation.csv");
  std::map<std::string, Series> by_method;
  std::vector<std::string> order;
  std::string param;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    param = r[1];
    if (!by_method.count(r[3])) {
      order.push_back(r[3]);
      by_method[r[3]].name = r[3];
    }
    by_method[r[3]].x.push_back(std::stod(r[2]));
    by_method[r[3]].y.push_back(std::stod(r[4]));
  }
  std::vector<Series> series;
  for (const auto& name : order) series.push_back(by_method[name]);
  write_file(csv_path.parent_path() / ("plot_ablation_" + param + ".svg"),
             line_plot_svg("AS vs " + param, param, "AS", series));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fxlab: fine-tuning data extraction lab"};
  app.require_subcommand(1);

  std::string config, out, param, values, run_dir;
  auto* pre = app.add_subcommand("pretrain", "train (or load from cache) the pretrained model");
  pre->add_option("-c,--config", config, "experiment config")->required();
  pre->add_option("-o,--out", out, "checkpoint path");

  auto* ft = app.add_subcommand("finetune", "fine-tune on the targets; writes both checkpoints");
  ft->add_option("-c,--config", config, "experiment config")->required();
  ft->add_option("-o,--out", out, "output directory");

  auto* ex = app.add_subcommand("extract", "sample, cluster and score every method");
  ex->add_option("-c,--config", config, "experiment config")->required();
  ex->add_option("-o,--out", out, "output directory");

  auto* ab = app.add_subcommand("ablate", "sweep one parameter");
  ab->add_option("-c,--config", config, "experiment config")->required();
  ab->add_option("-p,--param", param, "w_prime | k | N | N0")->required();
  ab->add_option("-v,--values", values, "comma-separated values")->required();
  ab->add_option("-o,--out", out, "output directory");

  AttackArgs attack;
  auto* ca = app.add_subcommand("caption-attack", "recover caption tokens from weight deltas");
  ca->add_option("--pre", attack.pre, "pretrained checkpoint")->required();
  ca->add_option("--post", attack.post, "fine-tuned checkpoint")->required();
  ca->add_option("-o,--out", attack.out, "output directory");
  ca->add_option("--truth", attack.truth, "ground-truth token ids, comma-separated");
  ca->add_option("--tokens", attack.tokens, "prompt length");
  ca->add_option("--iters", attack.iters, "iterations");
  ca->add_option("--lr", attack.lr, "step size");
  ca->add_option("--seed", attack.seed, "seed");
  ca->add_option("--restarts", attack.restarts, "random restarts");
  ca->add_option("--layers", attack.layers, "all | first | index list");
  ca->add_option("--variant", attack.variant,
                 "difference_of_principal | principal_of_difference");
  ca->add_option("--method", attack.method, "hard_prompt | argmax");

  auto* rp = app.add_subcommand("report", "re-score a run directory and redraw its plots");
  rp->add_option("-d,--dir", run_dir, "run or ablation output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*pre) return cmd_pretrain(config, out);
    if (*ft) return cmd_finetune(config, out);
    if (*ex) return cmd_extract(config, out);
    if (*ab) return cmd_ablate(config, param, values, out);
    if (*ca) return cmd_caption_attack(attack);
    if (*rp) {
      const fs::path dir(run_dir);
      if (fs::exists(dir / "ablation.csv") && !fs::exists(dir / "config.json")) {
        return cmd_report_ablation(dir / "ablation.csv");
      }
      return cmd_report(run_dir);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitUsage;
}
