#include "fxlab/layer_pair.hpp"

#include <sstream>

#include "fxlab/errors.hpp"

namespace fxlab {

LinearLayerPair::LinearLayerPair(Matrix minus, Matrix plus)
    : beta_minus(std::move(minus)), beta_plus(std::move(plus)) {
  if (beta_minus.rows() != beta_plus.rows() ||
      beta_minus.cols() != beta_plus.cols()) {
    throw ShapeError("layer pair shapes differ");
  }
  if (!beta_minus.allFinite() || !beta_plus.allFinite()) {
    throw ArgumentError("layer pair entries must be finite");
  }
}

LayerSelector LayerSelector::parse(const std::string& text) {
  if (text.empty() || text == "all") return all();
  if (text == "first") return first();
  LayerSelector sel;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      sel.indices.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad layer selector '" + text + "'");
    }
  }
  return sel;
}

std::vector<LinearLayerPair> export_layer_pair(const MLPDenoiser& pre,
                                               const MLPDenoiser& post,
                                               const LayerSelector& selector) {
  if (!(pre.arch() == post.arch())) {
    throw ShapeError("pre and post models have different architectures");
  }
  const int count = static_cast<int>(pre.params().cond.size());
  std::vector<int> chosen;
  if (selector.first_only) {
    chosen.push_back(0);
  } else if (selector.indices.empty()) {
    for (int i = 0; i < count; ++i) chosen.push_back(i);
  } else {
    chosen = selector.indices;
  }
  std::vector<LinearLayerPair> pairs;
  for (int idx : chosen) {
    if (idx < 0 || idx >= count) {
      throw ShapeError("no condition layer " + std::to_string(idx) + " (model has " +
                       std::to_string(count) + ")");
    }
    pairs.emplace_back(pre.params().cond[idx], post.params().cond[idx]);
  }
  return pairs;
}

}  // namespace fxlab
