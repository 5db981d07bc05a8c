#include "fxlab/training.hpp"

#include <cmath>
#include <string>

#include "fxlab/errors.hpp"
#include "fxlab/rng.hpp"

namespace fxlab {

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "gd";
}

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "gd" || name == "sgd") return OptimizerKind::GradientDescent;
  throw ConfigError("unknown optimizer '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive");
  }
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (!(uncond_prob >= 0.0 && uncond_prob <= 1.0)) {
    throw ConfigError("uncond_prob must lie in [0, 1]");
  }
}

std::size_t default_finetune_steps(std::size_t num_targets) {
  return 200 * num_targets;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate)
    : kind_(kind), lr_(learning_rate) {}

void Optimizer::step(const std::vector<Eigen::Map<Vector>>& params,
                     const std::vector<Eigen::Map<const Vector>>& grads) {
  if (params.size() != grads.size()) throw ShapeError("optimizer tensor count");
  ++t_;
  if (kind_ == OptimizerKind::GradientDescent) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p = params[i];
      p -= lr_ * grads[i];
    }
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (m_.empty()) {
    for (const auto& g : grads) {
      m_.push_back(Vector::Zero(g.size()));
      v_.push_back(Vector::Zero(g.size()));
    }
  }
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i].cwiseAbs2();
    auto p = params[i];
    p.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
  }
}

namespace {

std::vector<LossDraw> draw_minibatch(const std::vector<TrainingExample>& data,
                                     const TrainConfig& cfg,
                                     const NoiseSchedule& schedule,
                                     std::size_t step) {
  Rng rng{cfg.seed, 0x747261696eULL, step};
  std::vector<LossDraw> draws;
  draws.reserve(cfg.batch_size);
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    const auto& ex = data[rng.below(data.size())];
    LossDraw d{ex.x0, ex.cond, 0, Vector(ex.x0.size())};
    d.t = 1 + static_cast<int>(rng.below(schedule.num_steps()));
    for (Eigen::Index j = 0; j < d.eps.size(); ++j) d.eps[j] = rng.normal();
    if (cfg.uncond_prob > 0.0 && rng.uniform() < cfg.uncond_prob) {
      d.cond = std::nullopt;
    }
    draws.push_back(std::move(d));
  }
  return draws;
}

std::vector<Eigen::Map<Vector>> tensor_views(MlpParameters& p) {
  std::vector<Eigen::Map<Vector>> out;
  for_each_tensor(p, [&](Eigen::Map<Vector> v) { out.push_back(v); });
  return out;
}

std::vector<Eigen::Map<const Vector>> tensor_views(const MlpParameters& p) {
  std::vector<Eigen::Map<const Vector>> out;
  for_each_tensor(p, [&](Eigen::Map<const Vector> v) { out.push_back(v); });
  return out;
}

void check_loss(double loss, std::size_t step) {
  if (!std::isfinite(loss)) {
    throw TrainingError("training diverged at step " + std::to_string(step),
                        step);
  }
}

void check_targets(const std::vector<TrainingExample>& targets) {
  if (targets.empty() || targets.size() > 32) {
    throw ArgumentError("fine-tuning expects between 1 and 32 targets");
  }
}

MlpParameters train_all(const ArchSpec& arch, const TokenVocabulary& vocab,
                        MlpParameters params,
                        const std::vector<TrainingExample>& data,
                        const TrainConfig& cfg, const NoiseSchedule& schedule,
                        TrainLog* log) {
  cfg.validate();
  Optimizer opt(cfg.optimizer, cfg.learning_rate);
  MlpParameters grad;
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const auto draws = draw_minibatch(data, cfg, schedule, step);
    const double loss =
        MLPDenoiser::loss_and_gradient(arch, vocab, params, draws, schedule, &grad);
    check_loss(loss, step);
    if (log) log->losses.push_back(loss);
    opt.step(tensor_views(params), tensor_views(std::as_const(grad)));
    if (!params.all_finite()) {
      throw TrainingError("parameters became non-finite at step " +
                              std::to_string(step),
                          step);
    }
  }
  return params;
}

}  // namespace

MLPDenoiser pretrain(const ArchSpec& arch, VocabularyPtr vocab,
                     const std::vector<TrainingExample>& dataset,
                     const TrainConfig& cfg, const NoiseSchedule& schedule,
                     TrainLog* log) {
  if (dataset.size() < 100) {
    throw ArgumentError("pretraining expects at least 100 base points");
  }
  MLPDenoiser init = MLPDenoiser::initialize(arch, vocab, cfg.seed);
  MlpParameters trained =
      train_all(arch, *vocab, init.params(), dataset, cfg, schedule, log);
  return MLPDenoiser(arch, std::move(vocab), std::move(trained));
}

MLPDenoiser finetune_full(const MLPDenoiser& model,
                          const std::vector<TrainingExample>& targets,
                          const TrainConfig& cfg, const NoiseSchedule& schedule,
                          TrainLog* log) {
  check_targets(targets);
  MlpParameters trained = train_all(model.arch(), *model.vocab(), model.params(),
                                    targets, cfg, schedule, log);
  return MLPDenoiser(model.arch(), model.vocab(), std::move(trained));
}

MLPDenoiser finetune_lora(const MLPDenoiser& model,
                          const std::vector<TrainingExample>& targets, int rank,
                          const TrainConfig& cfg, const NoiseSchedule& schedule,
                          double scale, TrainLog* log) {
  check_targets(targets);
  cfg.validate();
  if (rank < 0) throw ArgumentError("adapter rank must be non-negative");
  if (rank == 0) return model;

  const MlpParameters& base = model.params();
  // Adapted layers in declaration order: trunk weights, then condition maps.
  std::vector<const Matrix*> base_weights;
  for (const auto& l : base.trunk) base_weights.push_back(&l.weight);
  for (const auto& u : base.cond) base_weights.push_back(&u);

  // Layers narrower than the rank (the d-wide output layer) get a
  // full-rank adapter; a rank no layer can hold is an error.
  Eigen::Index widest = 0;
  for (const Matrix* w : base_weights) widest = std::max(widest, std::min(w->rows(), w->cols()));
  if (rank > widest) throw ArgumentError("adapter rank exceeds layer dimensions");

  Rng rng{cfg.seed, 0x6c6f7261ULL};
  std::vector<LowRankAdapter> adapters;
  for (const Matrix* w : base_weights) {
    const auto out = w->rows();
    const auto in = w->cols();
    const Eigen::Index r = std::min<Eigen::Index>(rank, std::min(out, in));
    LowRankAdapter ad{Matrix::Zero(out, r), Matrix(r, in), scale};
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    for (Eigen::Index j = 0; j < in; ++j)
      for (Eigen::Index i = 0; i < r; ++i) ad.b(i, j) = s * rng.normal();
    adapters.push_back(std::move(ad));
  }

  auto merged = [&] {
    MlpParameters p = base;
    std::size_t idx = 0;
    for (auto& l : p.trunk) l.weight += adapters[idx++].delta();
    for (auto& u : p.cond) u += adapters[idx++].delta();
    return p;
  };

  Optimizer opt(cfg.optimizer, cfg.learning_rate);
  MlpParameters grad;
  std::vector<Matrix> grad_factors(2 * adapters.size());
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const MlpParameters eff = merged();
    const auto draws = draw_minibatch(targets, cfg, schedule, step);
    const double loss = MLPDenoiser::loss_and_gradient(
        model.arch(), *model.vocab(), eff, draws, schedule, &grad);
    check_loss(loss, step);
    if (log) log->losses.push_back(loss);

    std::vector<const Matrix*> weight_grads;
    for (const auto& l : grad.trunk) weight_grads.push_back(&l.weight);
    for (const auto& u : grad.cond) weight_grads.push_back(&u);

    std::vector<Eigen::Map<Vector>> views;
    std::vector<Eigen::Map<const Vector>> gviews;
    for (std::size_t i = 0; i < adapters.size(); ++i) {
      auto& ad = adapters[i];
      const Matrix& g = *weight_grads[i];
      grad_factors[2 * i] = ad.scale * g * ad.b.transpose();
      grad_factors[2 * i + 1] = ad.scale * ad.a.transpose() * g;
      views.emplace_back(ad.a.data(), ad.a.size());
      views.emplace_back(ad.b.data(), ad.b.size());
      gviews.emplace_back(grad_factors[2 * i].data(), grad_factors[2 * i].size());
      gviews.emplace_back(grad_factors[2 * i + 1].data(),
                          grad_factors[2 * i + 1].size());
    }
    opt.step(views, gviews);
  }
  MlpParameters out = merged();
  if (!out.all_finite()) {
    throw TrainingError("adapter training produced non-finite weights",
                        cfg.steps);
  }
  return MLPDenoiser(model.arch(), model.vocab(), std::move(out));
}

}  // namespace fxlab
