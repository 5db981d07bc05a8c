#include "json_convert.hpp"

#include "fxlab/errors.hpp"

namespace fxlab {

namespace {

Vector vector_from_json(const Json& j, int dim, const char* what) {
  if (j.is_number()) return Vector::Constant(dim, j.get<double>());
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    throw ConfigError(std::string(what) + " must be a number or a list of length " +
                      std::to_string(dim));
  }
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

Json to_json(const NoiseSchedule& s) {
  return {{"T", s.num_steps()},
          {"beta_start", s.beta_start()},
          {"beta_end", s.beta_end()},
          {"kind", "linear"}};
}

NoiseSchedule schedule_from_json(const Json& j) {
  std::string kind = "linear";
  read_opt(j, "kind", kind);
  if (kind != "linear") throw ConfigError("schedule.kind must be \"linear\"");
  int T = 100;
  read_opt(j, "T", T);
  if (T < 1) throw ConfigError("schedule.T must be >= 1");
  const NoiseSchedule def = NoiseSchedule::linear_default(T);
  double b0 = def.beta_start();
  double b1 = def.beta_end();
  read_opt(j, "beta_start", b0);
  read_opt(j, "beta_end", b1);
  try {
    return NoiseSchedule(T, b0, b1);
  } catch (const Error& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
}

Json to_json(const ArchSpec& a) {
  return {{"data_dim", a.data_dim},
          {"hidden", a.hidden},
          {"num_hidden_layers", a.num_hidden_layers},
          {"time_features", a.time_features},
          {"embed_dim", a.embed_dim}};
}

ArchSpec arch_from_json(const Json& j) {
  ArchSpec a;
  read_opt(j, "data_dim", a.data_dim);
  read_opt(j, "hidden", a.hidden);
  read_opt(j, "num_hidden_layers", a.num_hidden_layers);
  read_opt(j, "time_features", a.time_features);
  read_opt(j, "embed_dim", a.embed_dim);
  try {
    a.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("arch: ") + e.what());
  }
  return a;
}

Json to_json(const TrainConfig& c) {
  return {{"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"optimizer", to_string(c.optimizer)},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"uncond_prob", c.uncond_prob}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  read_opt(j, "steps", c.steps);
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "seed", c.seed);
  read_opt(j, "uncond_prob", c.uncond_prob);
  if (j.contains("optimizer")) {
    c.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
  }
  try {
    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return c;
}

Json to_json(const GaussianMixture& gm) {
  Json comps = Json::array();
  for (int k = 0; k < gm.num_components(); ++k) {
    comps.push_back({{"weight", gm.weights()[k]},
                     {"mean", vector_to_json(gm.means().row(k).transpose())},
                     {"variance", vector_to_json(gm.variances().row(k).transpose())}});
  }
  return comps;
}

GaussianMixture mixture_from_json(const Json& j) {
  const Json& comps = j.is_object() ? j.at("components") : j;
  if (!comps.is_array() || comps.empty()) {
    throw ConfigError("mixture needs a non-empty component list");
  }
  const auto& first_mean = comps.front().at("mean");
  if (!first_mean.is_array() || first_mean.empty()) {
    throw ConfigError("component mean must be a non-empty list");
  }
  const int dim = static_cast<int>(first_mean.size());
  const int K = static_cast<int>(comps.size());
  Vector w(K);
  Matrix means(K, dim), vars(K, dim);
  for (int k = 0; k < K; ++k) {
    const Json& c = comps[static_cast<std::size_t>(k)];
    w[k] = c.contains("weight") ? c.at("weight").get<double>() : 1.0 / K;
    means.row(k) = vector_from_json(c.at("mean"), dim, "mean").transpose();
    vars.row(k) = vector_from_json(c.value("variance", Json(1.0)), dim, "variance").transpose();
  }
  try {
    return GaussianMixture(w, means, vars);
  } catch (const Error& e) {
    throw ConfigError(std::string("mixture: ") + e.what());
  }
}

Json to_json(const GuidanceConfig& g) {
  Json j = {{"mode", to_string(g.mode)}, {"w", g.w}, {"w_prime", g.w_prime}, {"k", g.k}};
  if (g.caption) j["caption_tokens"] = *g.caption;
  return j;
}

GuidanceConfig guidance_from_json(const Json& j) {
  GuidanceConfig g;
  if (j.contains("mode")) g.mode = guidance_mode_from_string(j.at("mode").get<std::string>());
  read_opt(j, "w", g.w);
  read_opt(j, "w_prime", g.w_prime);
  read_opt(j, "k", g.k);
  for (const char* key : {"caption_tokens", "caption"}) {
    if (j.contains(key) && !j.at(key).is_null()) {
      g.caption = j.at(key).get<Caption>();
      break;
    }
  }
  return g;
}

Json to_json(const ClusteringConfig& c) {
  Json budget = Json::object();
  budget["max_expansions"] = c.budget.max_expansions ? Json(*c.budget.max_expansions) : Json();
  budget["max_seconds"] = c.budget.max_seconds ? Json(*c.budget.max_seconds) : Json();
  return {{"phi_start", c.phi_start}, {"phi_step", c.phi_step}, {"budget", budget}};
}

ClusteringConfig clustering_from_json(const Json& j) {
  ClusteringConfig c;
  read_opt(j, "phi_start", c.phi_start);
  read_opt(j, "phi_step", c.phi_step);
  if (j.contains("budget")) {
    const Json& b = j.at("budget");
    c.budget.max_expansions.reset();
    c.budget.max_seconds.reset();
    if (b.contains("max_expansions") && !b.at("max_expansions").is_null()) {
      c.budget.max_expansions = b.at("max_expansions").get<std::uint64_t>();
    }
    if (b.contains("max_seconds") && !b.at("max_seconds").is_null()) {
      c.budget.max_seconds = b.at("max_seconds").get<double>();
    }
  }
  return c;
}

Json to_json(const SimilaritySpec& s) {
  return {{"name", s.name}, {"bandwidth", s.bandwidth}, {"features", s.features}, {"seed", s.seed}};
}

SimilaritySpec similarity_from_json(const Json& j) {
  SimilaritySpec s;
  if (j.is_string()) {
    s.name = j.get<std::string>();
    return s;
  }
  read_opt(j, "name", s.name);
  read_opt(j, "bandwidth", s.bandwidth);
  read_opt(j, "features", s.features);
  read_opt(j, "seed", s.seed);
  return s;
}

Json to_json(const Matrix& points) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    rows.push_back(vector_to_json(points.row(i).transpose()));
  }
  return rows;
}

Matrix points_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw ConfigError("point list must be non-empty");
  const std::size_t d = j.front().size();
  if (d == 0) throw ConfigError("points must have at least one coordinate");
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != d) throw ConfigError("ragged point list");
    for (std::size_t c = 0; c < d; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace fxlab
