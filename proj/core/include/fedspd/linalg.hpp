#pragma once

#include <Eigen/Dense>
#include <random>

#include "fedspd/errors.hpp"

namespace fedspd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Throws ShapeError if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

// (M + Mᵀ)/2. Throws ShapeError on non-square input.
Matrix symmetrize(const Matrix& m);

// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
struct EigPair {
  Matrix vectors;  // orthogonal U, one eigenvector per column
  Vector values;   // ascending

  Matrix reconstruct() const { return vectors * values.asDiagonal() * vectors.transpose(); }
  double orthogonality_residual() const {
    const Index d = vectors.cols();
    return (vectors.transpose() * vectors - Matrix::Identity(d, d)).norm();
  }
};

// Throws ShapeError when S is not symmetric within 1e-10 * (1 + ||S||_F).
EigPair sym_eig(const Matrix& s);

// Orthogonal factor of the polar decomposition of A (p x k, p >= k):
// the column-orthonormal matrix closest to A in Frobenius norm.
// Throws RankDeficientError when sigma_min <= 1e-10 * sigma_max.
Matrix polar_factor(const Matrix& a);

// Half-vectorization: lower-triangular entries in column-major order,
// unscaled, length d(d+1)/2. Throws ShapeError on asymmetric input.
Vector vech(const Matrix& s);

// Inverse of vech: symmetric d x d matrix from a length-d(d+1)/2 vector.
Matrix unvech(const Vector& v);

// Matrix with i.i.d. standard normal entries.
Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng);

// Polar factor of a Gaussian p x k matrix. Throws ShapeError if p < k.
Matrix rand_orthonormal(Index p, Index k, std::mt19937_64& rng);

// Symmetric positive definite matrix. Construction symmetrizes the input
// (rejecting asymmetry beyond tolerance) and requires
// lambda_min > 1e-12 * lambda_max.
class SpdMatrix {
 public:
  explicit SpdMatrix(const Matrix& m);

  const Matrix& mat() const { return mat_; }
  Index dim() const { return mat_.rows(); }

 private:
  Matrix mat_;
};

// Q diag(lambda) Qᵀ with Q Haar-ish orthogonal and lambda log-uniform in
// [1/sqrt(c), sqrt(c)], so the spectral condition number is at most c.
SpdMatrix rand_spd(Index d, double condition_target, std::mt19937_64& rng);

}  // namespace fedspd
