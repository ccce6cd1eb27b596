#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "fedspd/linalg.hpp"
#include "fedspd/stiefel.hpp"

namespace fedspd {

// Architecture: layer_dims = (d0, d1, ..., dL) nonincreasing, L >= 1 BiRe
// blocks, eigenvalue rectification threshold epsilon, K output classes.
struct SpdNetConfig {
  std::vector<Index> layer_dims;
  double epsilon = 1e-1;
  int num_classes = 2;

  void validate() const;  // throws ConfigError
  int num_blocks() const { return static_cast<int>(layer_dims.size()) - 1; }
  Index input_dim() const { return layer_dims.front(); }
  Index output_dim() const { return layer_dims.back(); }
  Index feature_dim() const { return output_dim() * (output_dim() + 1) / 2; }
};

// theta = (W_1, ..., W_L, xi, beta).
struct ModelParams {
  std::vector<StiefelPoint> bimap_weights;  // W_l in St(d_{l-1}, d_l)
  Matrix head_weight;                       // xi, K x dL(dL+1)/2
  Vector head_bias;                         // beta, length K

  void validate_shapes(const SpdNetConfig& cfg) const;  // throws ShapeError
};

// Random initialization: Stiefel weights are polar factors of Gaussian
// matrices, head weight ~ N(0, 1/feature_dim), bias zero.
ModelParams init_params(const SpdNetConfig& cfg, std::mt19937_64& rng);

// Ambient Euclidean gradients, same shapes as ModelParams.
struct ParamGrads {
  std::vector<Matrix> bimap_weights;
  Matrix head_weight;
  Vector head_bias;

  static ParamGrads zeros_like(const ModelParams& params);
  void accumulate(const ParamGrads& other);
  void scale(double s);
};

// Everything the backward pass needs from a forward evaluation.
struct ForwardTape {
  std::vector<Matrix> block_inputs;   // Sigma_{l-1} entering block l
  std::vector<EigPair> reeig_eigs;    // eig of the pre-rectification Sigma-bar_l
  EigPair logeig_eig;                 // eig of the final block output
  Matrix log_matrix;                  // U log(Lambda) Uᵀ
  Vector features;                    // vech(log_matrix)
  Vector logits;
  Vector probs;
};

// --- layers -----------------------------------------------------------

// Sigma-bar = Wᵀ Sigma W (symmetric PSD).
Matrix bimap_forward(const Matrix& sigma, const StiefelPoint& w);

// U max(eps I, Lambda) Uᵀ plus the cached eigenpair of the input.
std::pair<Matrix, EigPair> reeig_forward(const Matrix& s, double epsilon);

// U log(Lambda) Uᵀ plus the cached eigenpair.
// Throws DomainError on a non-positive eigenvalue.
std::pair<Matrix, EigPair> logeig_forward(const Matrix& sigma);

// softmax(xi vech(S) + beta), computed with max subtraction.
Vector head_forward(const Matrix& s, const Matrix& xi, const Vector& beta);

// -log p_label with the probability floored at 1e-12; label is 1-based.
double cross_entropy(const Vector& probs, int label);

// Adjoint of the spectral map S = U f(Lambda) Uᵀ via the Daleckii-Krein
// divided-difference kernel:
//   U (K ∘ (Uᵀ sym(G) U)) Uᵀ,
//   K_ij = (f(li) - f(lj)) / (li - lj),  or f'((li+lj)/2) when
//   |li - lj| <= 1e-10 (1 + |li| + |lj|).
Matrix spectral_backward(const EigPair& eig, const Matrix& upstream,
                         const std::function<double(double)>& f,
                         const std::function<double(double)>& f_prime);

// Gradients of the BiMap layer, returned as (dSigma_in, dW). With Gs = sym(G):
//   dSigma_in = W Gs Wᵀ,   dW = 2 Sigma_in W Gs.
std::pair<Matrix, Matrix> bimap_backward(const Matrix& sigma_in, const StiefelPoint& w,
                                         const Matrix& upstream);

// --- full model -------------------------------------------------------

std::pair<Vector, ForwardTape> model_forward(const SpdMatrix& input, const ModelParams& params,
                                             const SpdNetConfig& cfg);

// Ambient Euclidean gradients of the cross-entropy loss at one example.
ParamGrads model_backward(const ForwardTape& tape, int label, const ModelParams& params,
                          const SpdNetConfig& cfg);

// --- batching ---------------------------------------------------------

struct Example {
  SpdMatrix sigma;
  int label;  // 1-based
};

// Mean loss and mean gradients over a batch, summed in index order.
struct BatchResult {
  double loss = 0.0;
  ParamGrads grads;
};
BatchResult batch_loss_and_grads(const std::vector<const Example*>& batch,
                                 const ModelParams& params, const SpdNetConfig& cfg);

// Forward-only mean loss.
double batch_loss(const std::vector<const Example*>& batch, const ModelParams& params,
                  const SpdNetConfig& cfg);

}  // namespace fedspd
