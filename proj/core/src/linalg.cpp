#include "fedspd/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <sstream>

namespace fedspd {

namespace {

constexpr double kSymTol = 1e-10;
constexpr double kSpdEigTol = 1e-12;    // lambda_min must exceed this times lambda_max
constexpr double kPolarRankTol = 1e-10; // sigma_min must exceed this times sigma_max

}  // namespace

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    std::ostringstream os;
    os << what << ": non-finite entries";
    throw ShapeError(os.str());
  }
}

Matrix symmetrize(const Matrix& m) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << "symmetrize: matrix is " << m.rows() << "x" << m.cols() << ", expected square";
    throw ShapeError(os.str());
  }
  return 0.5 * (m + m.transpose());
}

EigPair sym_eig(const Matrix& s) {
  if (s.rows() != s.cols()) {
    throw ShapeError("sym_eig: input not square");
  }
  const double asym = (s - s.transpose()).norm();
  if (asym > kSymTol * (1.0 + s.norm())) {
    std::ostringstream os;
    os << "sym_eig: input asymmetric, ||S - S^T||_F = " << asym;
    throw ShapeError(os.str());
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(symmetrize(s));
  if (solver.info() != Eigen::Success) {
    throw DomainError("sym_eig: eigensolver failed to converge");
  }
  return EigPair{solver.eigenvectors(), solver.eigenvalues()};
}

Matrix polar_factor(const Matrix& a) {
  if (a.rows() < a.cols()) {
    std::ostringstream os;
    os << "polar_factor: need p >= k, got " << a.rows() << "x" << a.cols();
    throw ShapeError(os.str());
  }
  require_finite(a, "polar_factor");
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.size() > 0 ? sv(0) : 0.0;
  const double smin = sv.size() > 0 ? sv(sv.size() - 1) : 0.0;
  if (smin <= kPolarRankTol * smax || smax == 0.0) {
    std::ostringstream os;
    os << "polar_factor: rank-deficient input (sigma_min = " << smin
       << ", sigma_max = " << smax << ")";
    throw RankDeficientError(os.str());
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

Vector vech(const Matrix& s) {
  if (s.rows() != s.cols()) {
    throw ShapeError("vech: input not square");
  }
  const double asym = (s - s.transpose()).norm();
  if (asym > kSymTol * (1.0 + s.norm())) {
    throw ShapeError("vech: input not symmetric");
  }
  const Index d = s.rows();
  Vector v(d * (d + 1) / 2);
  Index idx = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      v(idx++) = s(i, j);
    }
  }
  return v;
}

Matrix unvech(const Vector& v) {
  // length n = d(d+1)/2  =>  d = (-1 + sqrt(1 + 8n)) / 2
  const Index n = v.size();
  const Index d = static_cast<Index>(std::llround((-1.0 + std::sqrt(1.0 + 8.0 * static_cast<double>(n))) / 2.0));
  if (d * (d + 1) / 2 != n) {
    std::ostringstream os;
    os << "unvech: length " << n << " is not a triangular number";
    throw ShapeError(os.str());
  }
  Matrix s(d, d);
  Index idx = 0;
  for (Index j = 0; j < d; ++j) {
    for (Index i = j; i < d; ++i) {
      s(i, j) = v(idx);
      s(j, i) = v(idx);
      ++idx;
    }
  }
  return s;
}

Matrix gaussian_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = normal(rng);
    }
  }
  return m;
}

Matrix rand_orthonormal(Index p, Index k, std::mt19937_64& rng) {
  if (p < k || k < 1) {
    std::ostringstream os;
    os << "rand_orthonormal: need p >= k >= 1, got (" << p << ", " << k << ")";
    throw ShapeError(os.str());
  }
  return polar_factor(gaussian_matrix(p, k, rng));
}

SpdMatrix::SpdMatrix(const Matrix& m) {
  if (m.rows() != m.cols()) {
    std::ostringstream os;
    os << "SpdMatrix: input is " << m.rows() << "x" << m.cols() << ", expected square";
    throw ShapeError(os.str());
  }
  require_finite(m, "SpdMatrix");
  const double asym = (m - m.transpose()).norm();
  if (asym > kSymTol * (1.0 + m.norm())) {
    std::ostringstream os;
    os << "SpdMatrix: input asymmetric, ||S - S^T||_F = " << asym;
    throw ShapeError(os.str());
  }
  mat_ = symmetrize(m);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(mat_, Eigen::EigenvaluesOnly);
  const double lmin = solver.eigenvalues().minCoeff();
  const double lmax = solver.eigenvalues().maxCoeff();
  if (!(lmin > kSpdEigTol * lmax) || lmax <= 0.0) {
    std::ostringstream os;
    os << "SpdMatrix: not positive definite (lambda_min = " << lmin
       << ", lambda_max = " << lmax << ")";
    throw DomainError(os.str());
  }
}

SpdMatrix rand_spd(Index d, double condition_target, std::mt19937_64& rng) {
  if (d < 1) {
    throw ShapeError("rand_spd: d must be >= 1");
  }
  if (condition_target < 1.0) {
    throw DomainError("rand_spd: condition_target must be >= 1");
  }
  const Matrix q = rand_orthonormal(d, d, rng);
  const double hi = 0.5 * std::log(condition_target);  // log sqrt(c)
  std::uniform_real_distribution<double> uniform(-hi, hi);
  Vector lambda(d);
  for (Index i = 0; i < d; ++i) {
    lambda(i) = std::exp(uniform(rng));
  }
  return SpdMatrix(symmetrize(q * lambda.asDiagonal() * q.transpose()));
}

}  // namespace fedspd
