#pragma once

#include <string>
#include <vector>

#include "fxlab/mlp.hpp"
#include "fxlab/types.hpp"

namespace fxlab {

// Weights of one condition-facing dense layer before (minus) and after
// (plus) fine-tuning. Shape H x N, N the embedding dimension.
struct LinearLayerPair {
  Matrix beta_minus;
  Matrix beta_plus;

  LinearLayerPair(Matrix minus, Matrix plus);
  Matrix delta() const { return beta_plus - beta_minus; }
};

// Which condition-facing layers to export: "all", "first", or a
// comma-separated list of indices such as "0,2".
struct LayerSelector {
  std::vector<int> indices;  // empty = all
  bool first_only = false;

  static LayerSelector all() { return {}; }
  static LayerSelector first() { return {{}, true}; }
  static LayerSelector parse(const std::string& text);
};

// Pairs for the selected condition layers, in layer order.
std::vector<LinearLayerPair> export_layer_pair(const MLPDenoiser& pre,
                                               const MLPDenoiser& post,
                                               const LayerSelector& selector);

}  // namespace fxlab
