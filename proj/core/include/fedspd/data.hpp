#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedspd/linalg.hpp"
#include "fedspd/spdnet.hpp"

namespace fedspd {

// A bag of (SPD matrix, label) pairs of one common dimension.
// Labels are 1-based and lie in [1, num_classes].
struct LabeledDataset {
  std::vector<Example> items;
  Index dim = 0;
  int num_classes = 0;
  std::string provenance;  // "synthetic(...)" or a file path

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::vector<long> class_counts() const;
};

// Class-conditional Wishart generator: K prototype covariances, then
// trials_per_class noisy sample covariances around each.
struct SyntheticSpec {
  Index d0 = 12;
  int num_classes = 2;
  int trials_per_class = 100;
  int wishart_dof = 0;            // n; defaults to 4*d0 when 0
  double condition_target = 10.0;
  double alpha = 1.0;             // Dirichlet concentration for partitioning
  bool client_shift = false;      // per-client orthogonal conjugation
  std::uint64_t seed = 0;

  int resolved_dof() const { return wishart_dof > 0 ? wishart_dof : static_cast<int>(4 * d0); }
  void validate() const;  // throws ConfigError
};

// K independent conditioned random SPD prototypes.
std::vector<SpdMatrix> gen_prototypes(const SyntheticSpec& spec, std::mt19937_64& rng);

// One Wishart-style trial around prototype A: Sigma = (1/n) G Gᵀ with
// G = A^{1/2} Z, Z a d x n standard normal matrix. E[Sigma] = A.
SpdMatrix sample_covariance_trial(const SpdMatrix& prototype, int dof, std::mt19937_64& rng);

// Sample covariance of a raw d x T trial: rows centered, then
// (1/(T-1)) Xc Xcᵀ. Throws SingularScmError when T <= d.
SpdMatrix scm(const Matrix& trial);

// Full synthetic dataset, deterministic from spec.seed. Items are grouped
// by class, class 1 first.
LabeledDataset gen_synthetic(const SyntheticSpec& spec);

// Label-skew partition: each client draws its label mix from
// Dirichlet(alpha,...,alpha) and fills an (almost) equal share of the items
// without replacement. With client_shift, client i's matrices are conjugated
// by a client-specific random orthogonal Q_i (label- and spectrum-preserving);
// without it the union of the parts is exactly the input.
// Throws DataError when some client would end up with fewer than
// 2*num_classes items.
std::vector<LabeledDataset> partition_clients(const LabeledDataset& data, int num_clients,
                                              double alpha, bool client_shift,
                                              std::mt19937_64& rng);

// Largest-remainder apportionment: integer sizes proportional to fractions,
// summing exactly to n (floors first, then +1 by descending fractional part).
std::vector<long> largest_remainder(long n, const std::vector<double>& fractions);

struct SplitFractions {
  double train = 0.75;
  double val = 0.10;
  double test = 0.15;
};

struct DataSplit {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

// Per-class proportional allocation with largest-remainder rounding; the
// three parts are disjoint and cover the input. Throws DataError when some
// class has fewer than 3 items.
DataSplit stratified_split(const LabeledDataset& data, const SplitFractions& fractions,
                           std::mt19937_64& rng);

// Binary dataset file: magic "FSPD1", little-endian u32 (dim, num_classes,
// count), then count records of [u32 label][dim(dim+1)/2 little-endian f64
// half-vectorization entries]. Round trips are bit-exact.
void save_dataset(const LabeledDataset& data, const std::string& path);

// Throws DataError naming the byte offset on malformed input.
LabeledDataset load_dataset(const std::string& path);

}  // namespace fedspd
