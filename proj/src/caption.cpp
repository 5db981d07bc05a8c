#include "fxlab/caption.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Eigenvalues>

#include "fxlab/rng.hpp"

namespace fxlab {

namespace {

void check_pairs(const std::vector<LinearLayerPair>& pairs, int embed_dim) {
  if (pairs.empty()) throw ArgumentError("need at least one layer pair");
  for (const auto& p : pairs) {
    if (p.beta_minus.cols() != embed_dim) {
      throw ShapeError("layer pair width does not match embedding dimension");
    }
  }
}

bool all_deltas_zero(const std::vector<LinearLayerPair>& pairs) {
  return std::all_of(pairs.begin(), pairs.end(), [](const LinearLayerPair& p) {
    return (p.beta_plus.array() == p.beta_minus.array()).all();
  });
}

}  // namespace

int rowspace_argmax_single(const std::vector<LinearLayerPair>& pairs,
                           const TokenVocabulary& vocab) {
  check_pairs(pairs, vocab.dim());
  if (all_deltas_zero(pairs)) {
    throw DegenerateError("weights did not change: delta is zero");
  }
  Vector scores = Vector::Zero(vocab.size());
  for (const auto& p : pairs) {
    const Matrix response = p.delta() * vocab.embeddings().transpose();  // H x V
    scores += response.colwise().squaredNorm().transpose();
  }
  int best = 0;
  for (int i = 1; i < vocab.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

Matrix stack_rows(const std::vector<Matrix>& parts) {
  if (parts.empty()) throw ArgumentError("nothing to stack");
  Eigen::Index rows = 0;
  for (const auto& m : parts) {
    if (m.cols() != parts.front().cols()) throw ShapeError("stacked widths differ");
    rows += m.rows();
  }
  Matrix out(rows, parts.front().cols());
  Eigen::Index at = 0;
  for (const auto& m : parts) {
    out.middleRows(at, m.rows()) = m;
    at += m.rows();
  }
  return out;
}

namespace {

void fix_sign(Vector& v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  if (v[idx] < 0.0) v = -v;
}

PrincipalDirection dense_fallback(const Matrix& gram, int iterations) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  PrincipalDirection out;
  const Eigen::Index top = gram.rows() - 1;  // eigenvalues ascend
  out.direction = eig.eigenvectors().col(top).normalized();
  out.eigenvalue = eig.eigenvalues()[top];
  out.iterations = iterations;
  out.used_fallback = true;
  fix_sign(out.direction);
  return out;
}

}  // namespace

PrincipalDirection principal_direction_detail(const Matrix& stack,
                                              int max_iterations,
                                              double tolerance) {
  if (stack.size() == 0) throw DegenerateError("empty matrix stack");
  if (!stack.allFinite()) throw ArgumentError("matrix stack must be finite");
  Eigen::Index heaviest = 0;
  const double top_row = stack.rowwise().norm().maxCoeff(&heaviest);
  if (top_row == 0.0) throw DegenerateError("matrix stack is zero");

  const Matrix gram = stack.transpose() * stack;
  Vector v = stack.row(heaviest).transpose() / top_row;
  bool converged = false;
  int it = 0;
  while (it < max_iterations) {
    ++it;
    Vector w = gram * v;
    const double nw = w.norm();
    if (nw == 0.0) break;
    w /= nw;
    const double change = (w - v).norm();
    v = std::move(w);
    if (change < tolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) return dense_fallback(gram, it);

  const double lambda1 = v.dot(gram * v);
  // Top of the deflated spectrum; if it rivals lambda1 the gap is too small
  // (or the start vector missed the top eigenvector).
  const Matrix deflated = gram - lambda1 * (v * v.transpose());
  Vector u = Vector::Ones(gram.rows()).normalized();
  double lambda2 = 0.0;
  for (int k = 0; k < 100; ++k) {
    Vector w = deflated * u;
    const double nw = w.norm();
    if (nw == 0.0) break;
    u = w / nw;
    lambda2 = u.dot(deflated * u);
  }
  if (lambda1 <= 0.0 || lambda2 >= lambda1 * (1.0 - 1e-6)) {
    return dense_fallback(gram, it);
  }
  PrincipalDirection out;
  out.direction = v;
  out.eigenvalue = lambda1;
  out.iterations = it;
  fix_sign(out.direction);
  return out;
}

Vector principal_direction(const Matrix& stack) {
  return principal_direction_detail(stack).direction;
}

std::vector<int> rowspace_rank_principal(const std::vector<LinearLayerPair>& pairs,
                                         const TokenVocabulary& vocab) {
  check_pairs(pairs, vocab.dim());
  if (all_deltas_zero(pairs)) {
    throw DegenerateError("weights did not change: delta is zero");
  }
  std::vector<Matrix> deltas;
  for (const auto& p : pairs) deltas.push_back(p.delta());
  const Vector v = principal_direction(stack_rows(deltas));
  const Vector score = (vocab.embeddings() * v).cwiseAbs();
  std::vector<int> order(static_cast<std::size_t>(vocab.size()));
  for (int i = 0; i < vocab.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return score[a] > score[b]; });
  return order;
}

std::string to_string(ObjectiveVariant v) {
  return v == ObjectiveVariant::DifferenceOfPrincipal ? "difference_of_principal"
                                                      : "principal_of_difference";
}

ObjectiveVariant objective_variant_from_string(const std::string& name) {
  if (name == "difference_of_principal") return ObjectiveVariant::DifferenceOfPrincipal;
  if (name == "principal_of_difference") return ObjectiveVariant::PrincipalOfDifference;
  throw ConfigError("unknown objective variant '" + name + "'");
}

ExtractionObjective::ExtractionObjective(const std::vector<LinearLayerPair>& pairs,
                                         ObjectiveVariant variant) {
  if (pairs.empty()) throw ArgumentError("need at least one layer pair");
  check_pairs(pairs, static_cast<int>(pairs.front().beta_minus.cols()));
  if (all_deltas_zero(pairs)) {
    throw DegenerateError("weights did not change: delta is zero");
  }
  std::vector<Matrix> plus, minus, deltas;
  for (const auto& p : pairs) {
    plus.push_back(p.beta_plus);
    minus.push_back(p.beta_minus);
    deltas.push_back(p.delta());
  }
  if (variant == ObjectiveVariant::DifferenceOfPrincipal) {
    m_ = principal_direction(stack_rows(plus)) - principal_direction(stack_rows(minus));
  } else {
    m_ = principal_direction(stack_rows(deltas));
  }
  if (m_.norm() <= 1e-12) {
    throw DegenerateError("principal directions before and after coincide");
  }
}

double ExtractionObjective::value(const Matrix& e) const {
  if (e.cols() != m_.size()) throw ShapeError("prompt embedding width mismatch");
  return (e * m_).norm();
}

Matrix ExtractionObjective::gradient(const Matrix& e) const {
  if (e.cols() != m_.size()) throw ShapeError("prompt embedding width mismatch");
  const Vector proj = e * m_;
  const double f = proj.norm();
  if (f == 0.0) return Matrix::Zero(e.rows(), e.cols());
  return (proj / f) * m_.transpose();
}

double objective_F(const std::vector<LinearLayerPair>& pairs, const Matrix& e,
                   ObjectiveVariant variant) {
  return ExtractionObjective(pairs, variant).value(e);
}

Projection project_to_vocab(const Matrix& e_hat, const TokenVocabulary& vocab) {
  if (e_hat.cols() != vocab.dim()) throw ShapeError("prompt embedding width mismatch");
  Projection out;
  // Rows of the vocabulary are unit norm, so the dot product ranks tokens
  // by cosine for any non-zero row.
  const Matrix scores = e_hat * vocab.embeddings().transpose();  // W x V
  for (Eigen::Index w = 0; w < e_hat.rows(); ++w) {
    int best = 0;
    for (int i = 1; i < vocab.size(); ++i) {
      if (scores(w, i) > scores(w, best)) best = i;
    }
    out.tokens.push_back(best);
  }
  out.embedding = vocab.embed(out.tokens);
  return out;
}

HardPromptResult hard_prompt_extract(const std::vector<LinearLayerPair>& pairs,
                                     const TokenVocabulary& vocab,
                                     const HardPromptConfig& cfg) {
  if (cfg.iterations < 1) throw ArgumentError("iterations must be >= 1");
  if (!(cfg.learning_rate >= 0.0)) throw ArgumentError("learning rate must be >= 0");
  if (cfg.num_tokens < 1) throw ArgumentError("prompt needs at least one token");
  if (cfg.restarts < 1) throw ArgumentError("restarts must be >= 1");

  auto initial_prompt = [&](int restart) {
    Rng rng{cfg.seed, 0x68617264ULL, static_cast<std::uint64_t>(restart)};
    Caption c;
    for (int i = 0; i < cfg.num_tokens; ++i) {
      c.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab.size()))));
    }
    return c;
  };

  std::optional<ExtractionObjective> objective;
  try {
    check_pairs(pairs, vocab.dim());
    objective.emplace(pairs, cfg.variant);
  } catch (const DegenerateError& e) {
    throw DegenerateObjectiveError(e.what(), initial_prompt(0));
  }

  HardPromptResult best;
  for (int r = 0; r < cfg.restarts; ++r) {
    HardPromptResult run;
    run.restart = r;
    run.initial = initial_prompt(r);
    Matrix e_hat = vocab.embed(run.initial);
    run.trajectory.reserve(static_cast<std::size_t>(cfg.iterations));
    for (int i = 0; i < cfg.iterations; ++i) {
      const Projection proj = project_to_vocab(e_hat, vocab);
      run.trajectory.push_back(objective->value(proj.embedding));
      const Matrix delta = objective->gradient(proj.embedding);
      const double norm = delta.norm();
      if (norm > 0.0) e_hat += cfg.learning_rate * delta / norm;
    }
    const Projection final_proj = project_to_vocab(e_hat, vocab);
    run.tokens = final_proj.tokens;
    run.objective = objective->value(final_proj.embedding);
    if (r == 0 || run.objective > best.objective) best = std::move(run);
  }
  return best;
}

double token_recovery_rate(const Caption& truth, const Caption& recovered) {
  if (truth.empty()) throw ArgumentError("ground-truth caption is empty");
  const std::set<int> got(recovered.begin(), recovered.end());
  std::size_t hits = 0;
  for (int t : truth) hits += got.count(t);
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace fxlab
