#pragma once

// nlohmann/json conversions for library value types. Private to the
// library; the public API speaks in typed structs.

#include <json.hpp>

#include "fxlab/clustering.hpp"
#include "fxlab/errors.hpp"
#include "fxlab/gaussian_mixture.hpp"
#include "fxlab/guidance.hpp"
#include "fxlab/metrics.hpp"
#include "fxlab/mlp.hpp"
#include "fxlab/schedule.hpp"
#include "fxlab/training.hpp"

namespace fxlab {

using Json = nlohmann::ordered_json;

// Reads an optional field, keeping `out` when the key is absent.
template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
  }
}

Json to_json(const NoiseSchedule& s);
NoiseSchedule schedule_from_json(const Json& j);

Json to_json(const ArchSpec& a);
ArchSpec arch_from_json(const Json& j);

Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j, TrainConfig defaults = {});

Json to_json(const GaussianMixture& gm);
GaussianMixture mixture_from_json(const Json& j);

Json to_json(const GuidanceConfig& g);
GuidanceConfig guidance_from_json(const Json& j);

Json to_json(const ClusteringConfig& c);
ClusteringConfig clustering_from_json(const Json& j);

Json to_json(const SimilaritySpec& s);
SimilaritySpec similarity_from_json(const Json& j);

Json to_json(const Matrix& points);
Matrix points_from_json(const Json& j);

}  // namespace fxlab
