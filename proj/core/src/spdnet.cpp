#include "fedspd/spdnet.hpp"

#include <cmath>
#include <string>

#include "fedspd/errors.hpp"

namespace fedspd {

namespace {

constexpr double kProbFloor = 1e-12;

Vector softmax_stable(const Vector& logits) {
  const double zmax = logits.maxCoeff();
  Vector e = (logits.array() - zmax).exp();
  return e / e.sum();
}

// Tie tolerance for the divided-difference kernel.
double eig_tie_tol(double li, double lj) { return 1e-10 * (1.0 + std::abs(li) + std::abs(lj)); }

}  // namespace

void SpdNetConfig::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("layer_dims needs at least an input and one block");
  for (std::size_t i = 0; i < layer_dims.size(); ++i) {
    if (layer_dims[i] < 1)
      throw ConfigError("layer_dims[" + std::to_string(i) + "] must be positive");
    if (i > 0 && layer_dims[i] > layer_dims[i - 1])
      throw ConfigError("layer_dims must be nonincreasing");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
}

void ModelParams::validate_shapes(const SpdNetConfig& cfg) const {
  const auto blocks = static_cast<std::size_t>(cfg.num_blocks());
  if (bimap_weights.size() != blocks) throw ShapeError("wrong number of bimap weights");
  for (std::size_t l = 0; l < blocks; ++l) {
    if (bimap_weights[l].rows() != cfg.layer_dims[l] ||
        bimap_weights[l].cols() != cfg.layer_dims[l + 1])
      throw ShapeError("bimap weight " + std::to_string(l + 1) + " has the wrong shape");
  }
  if (head_weight.rows() != cfg.num_classes || head_weight.cols() != cfg.feature_dim())
    throw ShapeError("head weight shape mismatch");
  if (head_bias.size() != cfg.num_classes) throw ShapeError("head bias length mismatch");
}

ModelParams init_params(const SpdNetConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  ModelParams params;
  params.bimap_weights.reserve(static_cast<std::size_t>(cfg.num_blocks()));
  for (int l = 0; l < cfg.num_blocks(); ++l)
    params.bimap_weights.emplace_back(
        rand_orthonormal(cfg.layer_dims[l], cfg.layer_dims[l + 1], rng));

  const Index fdim = cfg.feature_dim();
  std::normal_distribution<double> head_init(0.0, 1.0 / std::sqrt(static_cast<double>(fdim)));
  params.head_weight.resize(cfg.num_classes, fdim);
  for (Index i = 0; i < params.head_weight.rows(); ++i)
    for (Index j = 0; j < params.head_weight.cols(); ++j) params.head_weight(i, j) = head_init(rng);
  params.head_bias = Vector::Zero(cfg.num_classes);
  return params;
}

ParamGrads ParamGrads::zeros_like(const ModelParams& params) {
  ParamGrads g;
  g.bimap_weights.reserve(params.bimap_weights.size());
  for (const auto& w : params.bimap_weights) g.bimap_weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  g.head_weight = Matrix::Zero(params.head_weight.rows(), params.head_weight.cols());
  g.head_bias = Vector::Zero(params.head_bias.size());
  return g;
}

void ParamGrads::accumulate(const ParamGrads& other) {
  if (other.bimap_weights.size() != bimap_weights.size())
    throw ShapeError("gradient accumulation: block count mismatch");
  for (std::size_t l = 0; l < bimap_weights.size(); ++l) bimap_weights[l] += other.bimap_weights[l];
  head_weight += other.head_weight;
  head_bias += other.head_bias;
}

void ParamGrads::scale(double s) {
  for (auto& g : bimap_weights) g *= s;
  head_weight *= s;
  head_bias *= s;
}

Matrix bimap_forward(const Matrix& sigma, const StiefelPoint& w) {
  if (sigma.rows() != sigma.cols() || sigma.rows() != w.rows())
    throw ShapeError("bimap_forward: input dimension does not match weight");
  return symmetrize(w.mat().transpose() * sigma * w.mat());
}

std::pair<Matrix, EigPair> reeig_forward(const Matrix& s, double epsilon) {
  EigPair eig = sym_eig(s);
  Vector rectified = eig.values.cwiseMax(epsilon);
  Matrix out = symmetrize(eig.vectors * rectified.asDiagonal() * eig.vectors.transpose());
  return {std::move(out), std::move(eig)};
}

std::pair<Matrix, EigPair> logeig_forward(const Matrix& sigma) {
  EigPair eig = sym_eig(sigma);
  if (eig.values.minCoeff() <= 0.0)
    throw DomainError("logeig_forward: non-positive eigenvalue (missing rectification upstream?)");
  Vector logged = eig.values.array().log();
  Matrix out = symmetrize(eig.vectors * logged.asDiagonal() * eig.vectors.transpose());
  return {std::move(out), std::move(eig)};
}

Vector head_forward(const Matrix& s, const Matrix& xi, const Vector& beta) {
  Vector features = vech(s);
  if (xi.cols() != features.size() || xi.rows() != beta.size())
    throw ShapeError("head_forward: classifier shape mismatch");
  return softmax_stable(xi * features + beta);
}

double cross_entropy(const Vector& probs, int label) {
  if (label < 1 || label > probs.size())
    throw DomainError("cross_entropy: label " + std::to_string(label) + " out of range");
  return -std::log(std::max(probs(label - 1), kProbFloor));
}

Matrix spectral_backward(const EigPair& eig, const Matrix& upstream,
                         const std::function<double(double)>& f,
                         const std::function<double(double)>& f_prime) {
  if (upstream.rows() != eig.vectors.rows() || upstream.cols() != eig.vectors.rows())
    throw ShapeError("spectral_backward: upstream shape mismatch");
  const Index d = eig.values.size();
  const Matrix m = eig.vectors.transpose() * symmetrize(upstream) * eig.vectors;
  Matrix k(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      const double li = eig.values(i), lj = eig.values(j);
      if (std::abs(li - lj) > eig_tie_tol(li, lj))
        k(i, j) = (f(li) - f(lj)) / (li - lj);
      else
        k(i, j) = f_prime(0.5 * (li + lj));
    }
  }
  return symmetrize(eig.vectors * k.cwiseProduct(m) * eig.vectors.transpose());
}

std::pair<Matrix, Matrix> bimap_backward(const Matrix& sigma_in, const StiefelPoint& w,
                                         const Matrix& upstream) {
  if (sigma_in.rows() != w.rows() || upstream.rows() != w.cols() || upstream.cols() != w.cols())
    throw ShapeError("bimap_backward: shape mismatch");
  const Matrix gs = symmetrize(upstream);
  Matrix d_sigma = symmetrize(w.mat() * gs * w.mat().transpose());
  Matrix d_w = 2.0 * sigma_in * w.mat() * gs;
  return {std::move(d_sigma), std::move(d_w)};
}

std::pair<Vector, ForwardTape> model_forward(const SpdMatrix& input, const ModelParams& params,
                                             const SpdNetConfig& cfg) {
  params.validate_shapes(cfg);
  if (input.dim() != cfg.input_dim()) throw ShapeError("model_forward: input dimension mismatch");

  ForwardTape tape;
  const int blocks = cfg.num_blocks();
  tape.block_inputs.reserve(static_cast<std::size_t>(blocks));
  tape.reeig_eigs.reserve(static_cast<std::size_t>(blocks));

  Matrix sigma = input.mat();
  for (int l = 0; l < blocks; ++l) {
    tape.block_inputs.push_back(sigma);
    Matrix sbar = bimap_forward(sigma, params.bimap_weights[static_cast<std::size_t>(l)]);
    auto [rectified, eig] = reeig_forward(sbar, cfg.epsilon);
    tape.reeig_eigs.push_back(std::move(eig));
    sigma = std::move(rectified);
  }

  auto [logm, eig] = logeig_forward(sigma);
  tape.logeig_eig = std::move(eig);
  tape.log_matrix = std::move(logm);
  tape.features = vech(tape.log_matrix);
  tape.logits = params.head_weight * tape.features + params.head_bias;
  tape.probs = softmax_stable(tape.logits);
  return {tape.probs, std::move(tape)};
}

ParamGrads model_backward(const ForwardTape& tape, int label, const ModelParams& params,
                          const SpdNetConfig& cfg) {
  if (label < 1 || label > cfg.num_classes) throw DomainError("model_backward: label out of range");
  ParamGrads grads = ParamGrads::zeros_like(params);

  // Softmax + cross-entropy head.
  Vector dlogits = tape.probs;
  dlogits(label - 1) -= 1.0;
  grads.head_weight = dlogits * tape.features.transpose();
  grads.head_bias = dlogits;
  Vector dfeatures = params.head_weight.transpose() * dlogits;

  // Adjoint of vech: off-diagonal feature gradients split evenly between the
  // two symmetric slots, so that tr(Gᵀ dS) over symmetric perturbations
  // reproduces the directional derivative.
  const Index d = cfg.output_dim();
  Matrix dlog(d, d);
  Index idx = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      if (i == j) {
        dlog(i, j) = dfeatures(idx);
      } else {
        dlog(i, j) = 0.5 * dfeatures(idx);
        dlog(j, i) = 0.5 * dfeatures(idx);
      }
      ++idx;
    }
  }

  Matrix g = spectral_backward(
      tape.logeig_eig, dlog, [](double x) { return std::log(x); },
      [](double x) { return 1.0 / x; });

  const double eps = cfg.epsilon;
  for (int l = cfg.num_blocks() - 1; l >= 0; --l) {
    const auto ul = static_cast<std::size_t>(l);
    Matrix dsbar = spectral_backward(
        tape.reeig_eigs[ul], g, [eps](double x) { return std::max(eps, x); },
        [eps](double x) { return x > eps ? 1.0 : 0.0; });
    auto [d_sigma, d_w] = bimap_backward(tape.block_inputs[ul], params.bimap_weights[ul], dsbar);
    grads.bimap_weights[ul] = std::move(d_w);
    g = std::move(d_sigma);
  }
  return grads;
}

BatchResult batch_loss_and_grads(const std::vector<const Example*>& batch,
                                 const ModelParams& params, const SpdNetConfig& cfg) {
  if (batch.empty()) throw DomainError("batch_loss_and_grads: empty batch");
  BatchResult result;
  result.grads = ParamGrads::zeros_like(params);
  for (const Example* ex : batch) {
    auto [probs, tape] = model_forward(ex->sigma, params, cfg);
    result.loss += cross_entropy(probs, ex->label);
    result.grads.accumulate(model_backward(tape, ex->label, params, cfg));
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  result.loss *= inv;
  result.grads.scale(inv);
  return result;
}

double batch_loss(const std::vector<const Example*>& batch, const ModelParams& params,
                  const SpdNetConfig& cfg) {
  if (batch.empty()) throw DomainError("batch_loss: empty batch");
  double loss = 0.0;
  for (const Example* ex : batch) {
    auto [probs, tape] = model_forward(ex->sigma, params, cfg);
    loss += cross_entropy(probs, ex->label);
  }
  return loss / static_cast<double>(batch.size());
}

}  // namespace fedspd
