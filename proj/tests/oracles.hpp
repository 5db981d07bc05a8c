#pragma once

// Exhaustive reference implementations for small inputs.

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "fxlab/clustering.hpp"
#include "fxlab/errors.hpp"

namespace fxlab::testing {

// Every maximal clique by subset enumeration (n <= 20), sorted.
inline std::vector<Clique> brute_force_cliques(const Matrix& sims, double phi) {
  const int n = static_cast<int>(sims.rows());
  if (n > 20) throw std::invalid_argument("brute force limited to 20 vertices");
  auto edge = [&](int i, int j) { return sims(i, j) >= phi; };
  std::vector<unsigned> cliques;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    bool ok = true;
    for (int i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1u)) continue;
      for (int j = i + 1; j < n && ok; ++j) {
        if ((mask >> j & 1u) && !edge(i, j)) ok = false;
      }
    }
    if (ok) cliques.push_back(mask);
  }
  std::vector<Clique> out;
  for (unsigned m : cliques) {
    bool maximal = true;
    for (int v = 0; v < n && maximal; ++v) {
      if (m >> v & 1u) continue;
      bool joins = true;
      for (int u = 0; u < n && joins; ++u) {
        if ((m >> u & 1u) && !edge(u, v)) joins = false;
      }
      if (joins) maximal = false;
    }
    if (!maximal) continue;
    Clique c;
    for (int v = 0; v < n; ++v)
      if (m >> v & 1u) c.push_back(v);
    out.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Reference for extract_from_graph: threshold sweep, fallback choice,
// largest-first truncation and exhaustive centroid search.
struct BruteExtraction {
  std::vector<Clique> cliques;
  std::vector<int> centroids;
  double phi = 0.0;
};

inline BruteExtraction brute_force_extract(const Matrix& sims, const ClusteringConfig& cfg) {
  const int n0 = cfg.target_cliques;
  std::vector<std::pair<double, std::vector<Clique>>> sweep;
  BruteExtraction out;
  bool hit = false;
  for (int i = 0;; ++i) {
    double phi = cfg.phi_start + i * cfg.phi_step;
    if (phi > 1.0 + 1e-12) break;
    phi = std::min(phi, 1.0);
    auto cl = brute_force_cliques(sims, phi);
    if (static_cast<int>(cl.size()) == n0) {
      out.cliques = cl;
      out.phi = phi;
      hit = true;
      break;
    }
    sweep.emplace_back(phi, std::move(cl));
  }
  if (!hit) {
    std::size_t best = 0;
    auto gap = [&](std::size_t k) {
      return std::llabs(static_cast<long long>(sweep[k].second.size()) - n0);
    };
    for (std::size_t k = 1; k < sweep.size(); ++k) {
      const bool over_k = static_cast<int>(sweep[k].second.size()) >= n0;
      const bool over_b = static_cast<int>(sweep[best].second.size()) >= n0;
      if (gap(k) < gap(best) || (gap(k) == gap(best) && over_k && !over_b) ||
          (gap(k) == gap(best) && over_k == over_b && sweep[k].first > sweep[best].first)) {
        best = k;
      }
    }
    out.cliques = sweep[best].second;
    out.phi = sweep[best].first;
  }
  if (static_cast<int>(out.cliques.size()) < n0) throw InfeasibleError("too few cliques");
  // Surplus only: largest first, ties by smallest member.
  if (static_cast<int>(out.cliques.size()) > n0) std::stable_sort(out.cliques.begin(), out.cliques.end(), [](const Clique& a, const Clique& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  out.cliques.resize(static_cast<std::size_t>(n0));
  for (const auto& c : out.cliques) {
    int best = c.front();
    double best_mean = -1.0;
    for (int v : c) {
      double s = 0.0;
      for (int u : c)
        if (u != v) s += sims(v, u);
      const double mean = c.size() > 1 ? s / static_cast<double>(c.size() - 1) : 1.0;
      if (mean > best_mean) {
        best_mean = mean;
        best = v;
      }
    }
    out.centroids.push_back(best);
  }
  return out;
}

}  // namespace fxlab::testing
