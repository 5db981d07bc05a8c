#include "fxlab/mlp.hpp"

#include <cmath>
#include <string>

#include "fxlab/errors.hpp"
#include "fxlab/rng.hpp"

namespace fxlab {

TokenVocabulary::TokenVocabulary(Matrix embeddings, int null_token)
    : embeddings_(std::move(embeddings)), null_token_(null_token) {
  if (embeddings_.rows() == 0 || embeddings_.cols() == 0) {
    throw ArgumentError("vocabulary must be non-empty");
  }
  check_token(null_token_);
  for (Eigen::Index i = 0; i < embeddings_.rows(); ++i) {
    if (std::abs(embeddings_.row(i).norm() - 1.0) > 1e-9) {
      throw ArgumentError("vocabulary row " + std::to_string(i) +
                          " is not unit norm");
    }
  }
}

TokenVocabulary TokenVocabulary::random(int size, int dim, std::uint64_t seed,
                                        int null_token) {
  if (size < 1 || dim < 1) throw ArgumentError("vocabulary size and dim must be positive");
  Rng rng{seed, 0x766f6361ULL};
  Matrix e(size, dim);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < dim; ++j) e(i, j) = rng.normal();
    e.row(i).normalize();
  }
  return TokenVocabulary(std::move(e), null_token);
}

void TokenVocabulary::check_token(int token) const {
  if (token < 0 || token >= size()) {
    throw ArgumentError("token " + std::to_string(token) + " outside vocabulary");
  }
}

Matrix TokenVocabulary::embed(const Caption& caption) const {
  Matrix out(static_cast<Eigen::Index>(caption.size()), dim());
  for (std::size_t i = 0; i < caption.size(); ++i) {
    check_token(caption[i]);
    out.row(static_cast<Eigen::Index>(i)) = embeddings_.row(caption[i]);
  }
  return out;
}

void ArchSpec::validate() const {
  if (data_dim < 1 || hidden < 1 || embed_dim < 1) {
    throw ConfigError("architecture sizes must be positive");
  }
  if (num_hidden_layers < 1 || num_hidden_layers > 3) {
    throw ConfigError("architecture supports 1-3 hidden layers");
  }
  if (time_features < 2 || time_features % 2 != 0) {
    throw ConfigError("time_features must be a positive even count");
  }
}

MlpParameters MlpParameters::zeros_like() const {
  MlpParameters z;
  for (const auto& l : trunk) {
    z.trunk.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                       Vector::Zero(l.bias.size())});
  }
  for (const auto& u : cond) z.cond.push_back(Matrix::Zero(u.rows(), u.cols()));
  return z;
}

std::size_t MlpParameters::num_scalars() const {
  std::size_t n = 0;
  for_each_tensor(*this, [&](Eigen::Map<const Vector> v) {
    n += static_cast<std::size_t>(v.size());
  });
  return n;
}

bool MlpParameters::all_finite() const {
  bool ok = true;
  for_each_tensor(*this, [&](Eigen::Map<const Vector> v) {
    ok = ok && v.allFinite();
  });
  return ok;
}

void for_each_tensor(MlpParameters& params,
                     const std::function<void(Eigen::Map<Vector>)>& fn) {
  for (auto& l : params.trunk) {
    fn(Eigen::Map<Vector>(l.weight.data(), l.weight.size()));
    fn(Eigen::Map<Vector>(l.bias.data(), l.bias.size()));
  }
  for (auto& u : params.cond) fn(Eigen::Map<Vector>(u.data(), u.size()));
}

void for_each_tensor(const MlpParameters& params,
                     const std::function<void(Eigen::Map<const Vector>)>& fn) {
  for (const auto& l : params.trunk) {
    fn(Eigen::Map<const Vector>(l.weight.data(), l.weight.size()));
    fn(Eigen::Map<const Vector>(l.bias.data(), l.bias.size()));
  }
  for (const auto& u : params.cond) fn(Eigen::Map<const Vector>(u.data(), u.size()));
}

Vector time_features(int t, int num_features) {
  const int half = num_features / 2;
  Vector f(num_features);
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(1000.0) * k / half);
    f[k] = std::sin(t * freq);
    f[half + k] = std::cos(t * freq);
  }
  return f;
}

namespace {

Eigen::ArrayXXd sigmoid(const Matrix& h) {
  return (1.0 + (-h.array()).exp()).inverse();
}

void check_shapes(const ArchSpec& arch, const TokenVocabulary& vocab,
                  const MlpParameters& p) {
  arch.validate();
  if (vocab.dim() != arch.embed_dim) {
    throw ShapeError("vocabulary dim does not match architecture embed_dim");
  }
  const int L = arch.num_hidden_layers;
  if (static_cast<int>(p.trunk.size()) != L + 1 ||
      static_cast<int>(p.cond.size()) != L) {
    throw ShapeError("parameter layer count does not match architecture");
  }
  int in = arch.data_dim + arch.time_features;
  for (int l = 0; l <= L; ++l) {
    const int out = l == L ? arch.data_dim : arch.hidden;
    const auto& layer = p.trunk[l];
    if (layer.weight.rows() != out || layer.weight.cols() != in ||
        layer.bias.size() != out) {
      throw ShapeError("trunk layer " + std::to_string(l) + " has wrong shape");
    }
    if (l < L && (p.cond[l].rows() != arch.hidden ||
                  p.cond[l].cols() != arch.embed_dim)) {
      throw ShapeError("condition layer " + std::to_string(l) + " has wrong shape");
    }
    in = out;
  }
}

Vector pooled_embedding(const TokenVocabulary& vocab, const Condition& cond) {
  if (!cond) return vocab.embeddings().row(vocab.null_token()).transpose();
  if (cond->empty()) throw ArgumentError("caption must contain a token");
  return vocab.embed(*cond).colwise().mean().transpose();
}

}  // namespace

MLPDenoiser::MLPDenoiser(ArchSpec arch, VocabularyPtr vocab, MlpParameters params)
    : arch_(arch), vocab_(std::move(vocab)), params_(std::move(params)) {
  if (!vocab_) throw ArgumentError("model needs a vocabulary");
  check_shapes(arch_, *vocab_, params_);
  if (!params_.all_finite()) throw ArgumentError("model parameters must be finite");
}

MLPDenoiser MLPDenoiser::initialize(const ArchSpec& arch, VocabularyPtr vocab,
                                    std::uint64_t seed) {
  arch.validate();
  Rng rng{seed, 0x6d6c70ULL};
  auto dense = [&](int out, int in) {
    Matrix w(out, in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * rng.normal();
    return w;
  };
  MlpParameters p;
  int in = arch.data_dim + arch.time_features;
  for (int l = 0; l <= arch.num_hidden_layers; ++l) {
    const int out = l == arch.num_hidden_layers ? arch.data_dim : arch.hidden;
    p.trunk.push_back({dense(out, in), Vector::Zero(out)});
    in = out;
  }
  for (int l = 0; l < arch.num_hidden_layers; ++l) {
    p.cond.push_back(dense(arch.hidden, arch.embed_dim));
  }
  return MLPDenoiser(arch, std::move(vocab), std::move(p));
}

Vector MLPDenoiser::condition_embedding(const Condition& cond) const {
  return pooled_embedding(*vocab_, cond);
}

Matrix MLPDenoiser::predict_eps(const Matrix& x, int t,
                                const Condition& cond) const {
  if (x.cols() != arch_.data_dim) throw ShapeError("input dimension mismatch");
  const Vector c = condition_embedding(cond);
  const Vector tf = time_features(t, arch_.time_features);
  const int d = arch_.data_dim;
  const int L = arch_.num_hidden_layers;

  // Step and caption are shared by every row, so their contributions fold
  // into the first layers' biases.
  const auto& first = params_.trunk[0];
  Vector bias0 = first.bias + first.weight.rightCols(arch_.time_features) * tf +
                 params_.cond[0] * c;
  Matrix h = x * first.weight.leftCols(d).transpose();
  h.rowwise() += bias0.transpose();
  Matrix a = (h.array() * sigmoid(h)).matrix();
  for (int l = 1; l < L; ++l) {
    const auto& layer = params_.trunk[l];
    const Vector bias = layer.bias + params_.cond[l] * c;
    h = a * layer.weight.transpose();
    h.rowwise() += bias.transpose();
    a = (h.array() * sigmoid(h)).matrix();
  }
  Matrix out = a * params_.trunk[L].weight.transpose();
  out.rowwise() += params_.trunk[L].bias.transpose();
  return out;
}

double MLPDenoiser::loss_and_gradient(const std::vector<LossDraw>& draws,
                                      const NoiseSchedule& schedule,
                                      MlpParameters* grad) const {
  return loss_and_gradient(arch_, *vocab_, params_, draws, schedule, grad);
}

double MLPDenoiser::loss_and_gradient(const ArchSpec& arch,
                                      const TokenVocabulary& vocab,
                                      const MlpParameters& params,
                                      const std::vector<LossDraw>& draws,
                                      const NoiseSchedule& schedule,
                                      MlpParameters* grad) {
  if (draws.empty()) throw ArgumentError("loss needs a non-empty batch");
  const Eigen::Index n = static_cast<Eigen::Index>(draws.size());
  const int d = arch.data_dim;
  const int F = arch.time_features;
  const int L = arch.num_hidden_layers;

  Matrix input(n, d + F);
  Matrix cond(n, arch.embed_dim);
  Matrix target(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& dr = draws[static_cast<std::size_t>(i)];
    if (dr.x0.size() != d || dr.eps.size() != d) {
      throw ShapeError("training example dimension mismatch");
    }
    const double ab = schedule.alpha_bar(dr.t);
    input.row(i).head(d) =
        (std::sqrt(ab) * dr.x0 + std::sqrt(1.0 - ab) * dr.eps).transpose();
    input.row(i).tail(F) = time_features(dr.t, F).transpose();
    cond.row(i) = pooled_embedding(vocab, dr.cond).transpose();
    target.row(i) = dr.eps.transpose();
  }

  // Forward, keeping each layer's input and pre-activation.
  std::vector<Matrix> inputs{input};
  std::vector<Matrix> pre;
  for (int l = 0; l < L; ++l) {
    Matrix h = inputs.back() * params.trunk[l].weight.transpose() +
               cond * params.cond[l].transpose();
    h.rowwise() += params.trunk[l].bias.transpose();
    inputs.push_back((h.array() * sigmoid(h)).matrix());
    pre.push_back(std::move(h));
  }
  Matrix out = inputs.back() * params.trunk[L].weight.transpose();
  out.rowwise() += params.trunk[L].bias.transpose();

  const Matrix resid = out - target;
  const double loss = resid.squaredNorm() / static_cast<double>(n);
  if (!grad) return loss;

  *grad = params.zeros_like();
  Matrix delta = (2.0 / static_cast<double>(n)) * resid;
  for (int l = L; l >= 0; --l) {
    grad->trunk[l].weight = delta.transpose() * inputs[l];
    grad->trunk[l].bias = delta.colwise().sum().transpose();
    if (l < L) grad->cond[l] = delta.transpose() * cond;
    if (l == 0) break;
    const Matrix up = delta * params.trunk[l].weight;
    const Eigen::ArrayXXd s = sigmoid(pre[l - 1]);
    const Eigen::ArrayXXd dsilu = s * (1.0 + pre[l - 1].array() * (1.0 - s));
    delta = (up.array() * dsilu).matrix();
  }
  return loss;
}

}  // namespace fxlab
