#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fxlab/metrics.hpp"
#include "fxlab/types.hpp"

namespace fxlab {

// Symmetric similarity matrix with unit diagonal.
class SimilarityGraph {
 public:
  explicit SimilarityGraph(Matrix sims);

  int size() const { return static_cast<int>(sims_.rows()); }
  const Matrix& sims() const { return sims_; }
  double sim(int i, int j) const { return sims_(i, j); }

 private:
  Matrix sims_;
};

// Evaluates sim on every pair, checking symmetry, range and unit self-similarity.
SimilarityGraph build_graph(const Matrix& samples, const SimilarityFn& sim);

// Work limits for one enumeration. Node expansions give reproducible
// truncation; wall-clock seconds are for interactive runs.
struct EnumerationBudget {
  std::optional<std::uint64_t> max_expansions;
  std::optional<double> max_seconds;
};

using Clique = std::vector<int>;  // sorted vertex indices

struct CliqueSet {
  std::vector<Clique> cliques;  // lexicographically sorted
  double phi = 0.0;
  bool truncated = false;
  std::uint64_t expansions = 0;
};

// All maximal cliques of the graph with edges {i != j : sims(i, j) >= phi}.
CliqueSet enumerate_maximal_cliques(const SimilarityGraph& graph, double phi,
                                    const EnumerationBudget& budget = {});

struct ClusteringConfig {
  int target_cliques = 1;   // N0
  double phi_start = 0.3;
  double phi_step = 0.02;
  EnumerationBudget budget{std::nullopt, 30.0};

  void validate() const;
  // phi_start + i * phi_step for every value not above 1.
  std::vector<double> thresholds() const;
};

struct ThresholdTrial {
  double phi = 0.0;
  std::size_t count = 0;
  bool truncated = false;
};

// Sweeps phi upward and returns the cliques at the first threshold whose
// (complete) enumeration yields exactly N0 cliques. Without an exact hit,
// picks the threshold minimizing |count - N0|, preferring count >= N0 and
// then the larger phi; truncated enumerations are only considered when no
// threshold finished.
CliqueSet threshold_clustering(const SimilarityGraph& graph,
                               const ClusteringConfig& cfg,
                               std::vector<ThresholdTrial>* trials = nullptr);

// Member with the highest mean similarity to the other members; ties go to
// the lowest index.
int clique_centroid(const Clique& clique, const SimilarityGraph& graph);

struct GraphExtraction {
  std::vector<int> indices;  // one centroid vertex per kept clique
  CliqueSet cliques;         // the N0 cliques kept
  std::vector<ThresholdTrial> trials;
};

// Clustering and centroid selection on a prebuilt graph.
GraphExtraction extract_from_graph(const SimilarityGraph& graph,
                                   const ClusteringConfig& cfg);

struct ExtractionResult {
  Matrix points;              // N0 x d, rows copied from the samples
  std::vector<int> indices;   // sample index of each extracted row
  CliqueSet cliques;          // the N0 cliques kept
  std::vector<ThresholdTrial> trials;
};

// build_graph -> threshold_clustering -> one centroid per clique. Surplus
// cliques are dropped largest-first (ties: smallest minimum index).
ExtractionResult extract(const Matrix& samples, int target_count,
                         const SimilarityFn& sim, ClusteringConfig cfg);

}  // namespace fxlab
