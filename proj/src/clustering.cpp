#include "fxlab/clustering.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <string>

#include <boost/dynamic_bitset.hpp>

#include "fxlab/errors.hpp"

namespace fxlab {

SimilarityGraph::SimilarityGraph(Matrix sims) : sims_(std::move(sims)) {
  if (sims_.rows() != sims_.cols()) throw ShapeError("similarity matrix must be square");
  for (Eigen::Index i = 0; i < sims_.rows(); ++i) {
    if (sims_(i, i) != 1.0) throw ContractError("similarity diagonal must be 1");
    for (Eigen::Index j = i + 1; j < sims_.cols(); ++j) {
      if (!std::isfinite(sims_(i, j)) || std::abs(sims_(i, j) - sims_(j, i)) > 1e-9) {
        throw ContractError("similarity matrix is not symmetric at (" +
                            std::to_string(i) + ", " + std::to_string(j) + ")");
      }
    }
  }
}

SimilarityGraph build_graph(const Matrix& samples, const SimilarityFn& sim) {
  const Eigen::Index n = samples.rows();
  if (n < 2) throw ArgumentError("graph needs at least two samples");
  Matrix s = Matrix::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector xi = samples.row(i).transpose();
    const double self = sim(xi, xi);
    if (std::abs(self - 1.0) > 1e-12) {
      throw ContractError("similarity of sample " + std::to_string(i) +
                          " with itself is not 1");
    }
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const Vector xj = samples.row(j).transpose();
      const double a = sim(xi, xj);
      const double b = sim(xj, xi);
      const std::string pair =
          "(" + std::to_string(i) + ", " + std::to_string(j) + ")";
      if (!std::isfinite(a) || !std::isfinite(b)) {
        throw NumericError("non-finite similarity for pair " + pair, 0);
      }
      if (std::abs(a - b) > 1e-9) {
        throw ContractError("asymmetric similarity for pair " + pair);
      }
      if (a < 0.0 || a > 1.0) {
        throw ContractError("similarity outside [0, 1] for pair " + pair);
      }
      s(i, j) = s(j, i) = a;
    }
  }
  return SimilarityGraph(std::move(s));
}

namespace {

using Bits = boost::dynamic_bitset<>;

class CliqueEnumerator {
 public:
  CliqueEnumerator(const SimilarityGraph& g, double phi,
                   const EnumerationBudget& budget)
      : n_(g.size()), budget_(budget), start_(std::chrono::steady_clock::now()) {
    adj_.assign(n_, Bits(n_));
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (i != j && g.sim(i, j) >= phi) adj_[i].set(j);
  }

  CliqueSet run(double phi) {
    Clique r;
    Bits p(n_);
    p.set();
    expand(r, p, Bits(n_));
    std::sort(found_.begin(), found_.end());
    return CliqueSet{std::move(found_), phi, truncated_, expansions_};
  }

 private:
  bool out_of_budget() {
    if (budget_.max_expansions && expansions_ >= *budget_.max_expansions) return true;
    if (budget_.max_seconds && (expansions_ & 0xff) == 0) {
      const std::chrono::duration<double> elapsed =
          std::chrono::steady_clock::now() - start_;
      if (elapsed.count() > *budget_.max_seconds) return true;
    }
    return false;
  }

  // Bron-Kerbosch with Tomita pivoting.
  void expand(Clique& r, Bits p, Bits x) {
    if (truncated_) return;
    if (out_of_budget()) {
      truncated_ = true;
      return;
    }
    ++expansions_;
    if (p.none() && x.none()) {
      Clique c = r;
      std::sort(c.begin(), c.end());
      found_.push_back(std::move(c));
      return;
    }
    const Bits px = p | x;
    int pivot = -1;
    std::size_t best = 0;
    for (auto u = px.find_first(); u != Bits::npos; u = px.find_next(u)) {
      const std::size_t c = (p & adj_[u]).count();
      if (pivot < 0 || c > best) {
        pivot = static_cast<int>(u);
        best = c;
      }
    }
    const Bits candidates = p - adj_[pivot];
    for (auto v = candidates.find_first(); v != Bits::npos;
         v = candidates.find_next(v)) {
      r.push_back(static_cast<int>(v));
      expand(r, p & adj_[v], x & adj_[v]);
      r.pop_back();
      if (truncated_) return;
      p.reset(v);
      x.set(v);
    }
  }

  int n_;
  EnumerationBudget budget_;
  std::chrono::steady_clock::time_point start_;
  std::vector<Bits> adj_;
  std::vector<Clique> found_;
  std::uint64_t expansions_ = 0;
  bool truncated_ = false;
};

}  // namespace

CliqueSet enumerate_maximal_cliques(const SimilarityGraph& graph, double phi,
                                    const EnumerationBudget& budget) {
  if (!(phi >= 0.0 && phi <= 1.0)) throw ArgumentError("phi must lie in [0, 1]");
  return CliqueEnumerator(graph, phi, budget).run(phi);
}

void ClusteringConfig::validate() const {
  if (target_cliques < 1) throw ConfigError("target clique count must be >= 1");
  if (!(phi_start >= 0.0 && phi_start < 1.0)) {
    throw ConfigError("phi_start must lie in [0, 1)");
  }
  if (!(phi_step > 0.0)) throw ConfigError("phi_step must be positive");
}

std::vector<double> ClusteringConfig::thresholds() const {
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double phi = phi_start + i * phi_step;
    if (phi > 1.0 + 1e-12) break;
    out.push_back(std::min(phi, 1.0));
  }
  return out;
}

namespace {

// True if trial a is a better fallback than b.
bool better_fallback(const ThresholdTrial& a, const ThresholdTrial& b, int target) {
  const auto gap = [target](const ThresholdTrial& t) {
    return std::llabs(static_cast<long long>(t.count) - target);
  };
  if (gap(a) != gap(b)) return gap(a) < gap(b);
  const bool a_over = static_cast<long long>(a.count) >= target;
  const bool b_over = static_cast<long long>(b.count) >= target;
  if (a_over != b_over) return a_over;
  return a.phi > b.phi;
}

}  // namespace

CliqueSet threshold_clustering(const SimilarityGraph& graph,
                               const ClusteringConfig& cfg,
                               std::vector<ThresholdTrial>* trials) {
  cfg.validate();
  if (graph.size() < cfg.target_cliques) {
    throw InfeasibleError("graph has fewer vertices than the target clique count");
  }
  std::vector<CliqueSet> results;
  std::vector<ThresholdTrial> log;
  for (double phi : cfg.thresholds()) {
    CliqueSet cs = enumerate_maximal_cliques(graph, phi, cfg.budget);
    log.push_back({phi, cs.cliques.size(), cs.truncated});
    const bool hit = !cs.truncated &&
                     cs.cliques.size() == static_cast<std::size_t>(cfg.target_cliques);
    results.push_back(std::move(cs));
    if (hit) {
      if (trials) *trials = log;
      return std::move(results.back());
    }
  }
  if (results.empty()) throw InfeasibleError("threshold sweep is empty");

  const bool any_complete = std::any_of(log.begin(), log.end(),
                                        [](const auto& t) { return !t.truncated; });
  std::size_t best = results.size();
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (any_complete && log[i].truncated) continue;
    if (best == results.size() || better_fallback(log[i], log[best], cfg.target_cliques)) {
      best = i;
    }
  }
  if (trials) *trials = log;
  return std::move(results[best]);
}

int clique_centroid(const Clique& clique, const SimilarityGraph& graph) {
  if (clique.empty()) throw ArgumentError("clique must be non-empty");
  for (int v : clique) {
    if (v < 0 || v >= graph.size()) {
      throw ArgumentError("clique vertex " + std::to_string(v) + " out of range");
    }
  }
  if (clique.size() == 1) return clique.front();
  int best = -1;
  double best_mean = 0.0;
  for (int v : clique) {
    double sum = 0.0;
    for (int u : clique)
      if (u != v) sum += graph.sim(v, u);
    const double mean = sum / static_cast<double>(clique.size() - 1);
    if (best < 0 || mean > best_mean || (mean == best_mean && v < best)) {
      best = v;
      best_mean = mean;
    }
  }
  return best;
}

GraphExtraction extract_from_graph(const SimilarityGraph& graph,
                                   const ClusteringConfig& cfg) {
  GraphExtraction out;
  out.cliques = threshold_clustering(graph, cfg, &out.trials);
  auto& cliques = out.cliques.cliques;
  const auto target = static_cast<std::size_t>(cfg.target_cliques);
  if (cliques.size() < target) {
    throw InfeasibleError("clustering found " + std::to_string(cliques.size()) +
                          " cliques, fewer than the " + std::to_string(target) +
                          " requested");
  }
  if (cliques.size() > target) {
    std::stable_sort(cliques.begin(), cliques.end(),
                     [](const Clique& a, const Clique& b) {
                       if (a.size() != b.size()) return a.size() > b.size();
                       return a.front() < b.front();
                     });
    cliques.resize(target);
  }
  for (const auto& c : cliques) out.indices.push_back(clique_centroid(c, graph));
  return out;
}

ExtractionResult extract(const Matrix& samples, int target_count,
                         const SimilarityFn& sim, ClusteringConfig cfg) {
  cfg.target_cliques = target_count;
  cfg.validate();
  if (samples.rows() < target_count) {
    throw InfeasibleError("fewer samples than requested extractions");
  }
  ExtractionResult out;
  if (samples.rows() == 1) {
    out.points = samples;
    out.indices = {0};
    out.cliques = CliqueSet{{{0}}, cfg.phi_start, false, 0};
    return out;
  }
  const SimilarityGraph graph = build_graph(samples, sim);
  GraphExtraction g = extract_from_graph(graph, cfg);
  out.points.resize(static_cast<Eigen::Index>(g.indices.size()), samples.cols());
  for (std::size_t i = 0; i < g.indices.size(); ++i) {
    out.points.row(static_cast<Eigen::Index>(i)) = samples.row(g.indices[i]);
  }
  out.indices = std::move(g.indices);
  out.cliques = std::move(g.cliques);
  out.trials = std::move(g.trials);
  return out;
}

}  // namespace fxlab
