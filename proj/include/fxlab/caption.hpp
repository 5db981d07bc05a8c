#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fxlab/errors.hpp"
#include "fxlab/layer_pair.hpp"
#include "fxlab/mlp.hpp"
#include "fxlab/types.hpp"

namespace fxlab {

// Token whose embedding e maximizes sum_k ||(beta+_k - beta-_k) e||^2.
// This is exact when the layers were trained by plain gradient descent on
// a single one-token caption (the delta is then g e0^T). Ties go to the
// lowest index; an all-zero delta throws DegenerateError.
int rowspace_argmax_single(const std::vector<LinearLayerPair>& pairs,
                           const TokenVocabulary& vocab);

struct PrincipalDirection {
  Vector direction;         // unit, largest-magnitude entry positive
  double eigenvalue = 0.0;  // top eigenvalue of stack^T stack
  int iterations = 0;
  bool used_fallback = false;
};

// Top right-singular direction of `stack` (rows live in embedding space),
// by power iteration on the Gram matrix. Falls back to a dense eigensolver
// when power iteration stalls or the relative spectral gap is below 1e-6.
PrincipalDirection principal_direction_detail(const Matrix& stack,
                                              int max_iterations = 500,
                                              double tolerance = 1e-10);
Vector principal_direction(const Matrix& stack);

// Vertical concatenation of the given matrices (all with N columns).
Matrix stack_rows(const std::vector<Matrix>& parts);

// Tokens ranked by |v . e_i| with v the principal direction of the stacked
// deltas: the rank-one variant for multi-word captions.
std::vector<int> rowspace_rank_principal(const std::vector<LinearLayerPair>& pairs,
                                         const TokenVocabulary& vocab);

enum class ObjectiveVariant {
  DifferenceOfPrincipal,  // PCA(beta+) - PCA(beta-), the default
  PrincipalOfDifference,  // PCA(beta+ - beta-)
};

std::string to_string(ObjectiveVariant v);
ObjectiveVariant objective_variant_from_string(const std::string& name);

// F(e) = ||e m|| for a W x N prompt embedding e and the direction m built
// from the layer pairs.
class ExtractionObjective {
 public:
  ExtractionObjective(const std::vector<LinearLayerPair>& pairs,
                      ObjectiveVariant variant = ObjectiveVariant::DifferenceOfPrincipal);

  const Vector& direction() const { return m_; }
  int embed_dim() const { return static_cast<int>(m_.size()); }

  double value(const Matrix& e) const;
  // (e m) m^T / F; zero where F = 0.
  Matrix gradient(const Matrix& e) const;

 private:
  Vector m_;
};

double objective_F(const std::vector<LinearLayerPair>& pairs, const Matrix& e,
                   ObjectiveVariant variant = ObjectiveVariant::DifferenceOfPrincipal);

struct Projection {
  Caption tokens;
  Matrix embedding;  // W x N rows of the chosen tokens
};

// Per row, the token with the highest cosine similarity; ties (including
// all-zero rows) go to the lowest index.
Projection project_to_vocab(const Matrix& e_hat, const TokenVocabulary& vocab);

struct HardPromptConfig {
  int num_tokens = 1;       // W
  int iterations = 1000;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  // Independent random initializations; the final prompt with the highest
  // objective wins. 1 reproduces a single run of the procedure.
  int restarts = 1;
  ObjectiveVariant variant = ObjectiveVariant::DifferenceOfPrincipal;
};

struct HardPromptResult {
  Caption tokens;
  double objective = 0.0;          // F at the final projected prompt
  std::vector<double> trajectory;  // F at the projected prompt, per iteration
  Caption initial;                 // initialization of the winning restart
  int restart = 0;
};

// Raised when the objective is degenerate; carries the projection of the
// initialization as the partial result.
class DegenerateObjectiveError : public DegenerateError {
 public:
  DegenerateObjectiveError(const std::string& what, Caption partial)
      : DegenerateError(what), partial_(std::move(partial)) {}
  const Caption& partial() const { return partial_; }

 private:
  Caption partial_;
};

// Gradient ascent on F with projection to real tokens at every step:
//   c = project(e_hat); e_hat += lr * grad F(E(c)) / ||grad F(E(c))||
// and a final projection.
HardPromptResult hard_prompt_extract(const std::vector<LinearLayerPair>& pairs,
                                     const TokenVocabulary& vocab,
                                     const HardPromptConfig& cfg);

// Fraction of ground-truth tokens present in the recovered caption.
// Position-free, since pooled conditioning discards token order.
double token_recovery_rate(const Caption& truth, const Caption& recovered);

}  // namespace fxlab
