#include "fedspd/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>

#include "fedspd/errors.hpp"
#include "fedspd/rng.hpp"

namespace fedspd {

std::vector<long> LabeledDataset::class_counts() const {
  std::vector<long> counts(static_cast<std::size_t>(num_classes), 0);
  for (const auto& ex : items) {
    if (ex.label < 1 || ex.label > num_classes)
      throw DataError("dataset item label " + std::to_string(ex.label) + " outside [1, " +
                      std::to_string(num_classes) + "]");
    counts[static_cast<std::size_t>(ex.label - 1)] += 1;
  }
  return counts;
}

void SyntheticSpec::validate() const {
  if (d0 < 1) throw ConfigError("synthetic: d0 must be positive");
  if (num_classes < 2) throw ConfigError("synthetic: need at least 2 classes");
  if (trials_per_class < 1) throw ConfigError("synthetic: trials_per_class must be positive");
  if (resolved_dof() < d0)
    throw ConfigError("synthetic: wishart_dof must be at least d0 to keep trials full rank");
  if (!(condition_target >= 1.0)) throw ConfigError("synthetic: condition_target must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("synthetic: alpha must be positive");
}

std::vector<SpdMatrix> gen_prototypes(const SyntheticSpec& spec, std::mt19937_64& rng) {
  std::vector<SpdMatrix> protos;
  protos.reserve(static_cast<std::size_t>(spec.num_classes));
  for (int k = 0; k < spec.num_classes; ++k)
    protos.push_back(rand_spd(spec.d0, spec.condition_target, rng));
  return protos;
}

SpdMatrix sample_covariance_trial(const SpdMatrix& prototype, int dof, std::mt19937_64& rng) {
  const Index d = prototype.dim();
  if (dof < d)
    throw ConfigError("sample_covariance_trial: dof " + std::to_string(dof) +
                      " below dimension " + std::to_string(d));
  const EigPair eig = sym_eig(prototype.mat());
  const Matrix root =
      eig.vectors * eig.values.cwiseSqrt().asDiagonal() * eig.vectors.transpose();
  const Matrix g = root * gaussian_matrix(d, dof, rng);
  return SpdMatrix(symmetrize(g * g.transpose() / static_cast<double>(dof)));
}

SpdMatrix scm(const Matrix& trial) {
  const Index d = trial.rows();
  const Index t = trial.cols();
  if (t <= d)
    throw SingularScmError("scm: trial with " + std::to_string(t) + " samples over " +
                           std::to_string(d) + " channels is rank deficient; need T > d");
  const Matrix centered = trial.colwise() - trial.rowwise().mean();
  return SpdMatrix(symmetrize(centered * centered.transpose() / static_cast<double>(t - 1)));
}

LabeledDataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  auto rng = make_engine(spec.seed, stream::kData);
  const auto protos = gen_prototypes(spec, rng);

  LabeledDataset data;
  data.dim = spec.d0;
  data.num_classes = spec.num_classes;
  data.provenance = "synthetic(seed=" + std::to_string(spec.seed) + ")";
  data.items.reserve(static_cast<std::size_t>(spec.num_classes) *
                     static_cast<std::size_t>(spec.trials_per_class));
  for (int k = 0; k < spec.num_classes; ++k)
    for (int j = 0; j < spec.trials_per_class; ++j)
      data.items.push_back(
          {sample_covariance_trial(protos[static_cast<std::size_t>(k)], spec.resolved_dof(), rng),
           k + 1});
  return data;
}

namespace {

std::vector<double> dirichlet(double alpha, int k, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (auto& x : p) {
    x = gamma(rng);
    sum += x;
  }
  if (sum <= 0.0) return std::vector<double>(static_cast<std::size_t>(k), 1.0 / k);
  for (auto& x : p) x /= sum;
  return p;
}

}  // namespace

std::vector<LabeledDataset> partition_clients(const LabeledDataset& data, int num_clients,
                                              double alpha, bool client_shift,
                                              std::mt19937_64& rng) {
  if (num_clients < 1) throw ConfigError("partition: need at least one client");
  if (!(alpha > 0.0)) throw ConfigError("partition: alpha must be positive");
  const int k = data.num_classes;
  const auto count = static_cast<long>(data.size());
  if (count / num_clients < 2L * k)
    throw DataError("partition: " + std::to_string(count) + " items over " +
                    std::to_string(num_clients) + " clients leaves fewer than 2K=" +
                    std::to_string(2 * k) + " items each; generate more data or use fewer clients");

  // Per-class queues in dataset order.
  std::vector<std::deque<std::size_t>> pool(static_cast<std::size_t>(k));
  for (std::size_t idx = 0; idx < data.items.size(); ++idx) {
    const int label = data.items[idx].label;
    if (label < 1 || label > k)
      throw DataError("partition: item label " + std::to_string(label) + " outside [1, K]");
    pool[static_cast<std::size_t>(label - 1)].push_back(idx);
  }

  // Label mixes first, then assignment, then the optional per-client bases:
  // a fixed draw order keeps the item assignment independent of client_shift.
  std::vector<std::vector<double>> mix;
  mix.reserve(static_cast<std::size_t>(num_clients));
  for (int i = 0; i < num_clients; ++i) mix.push_back(dirichlet(alpha, k, rng));

  const long base = count / num_clients;
  const long extra = count % num_clients;
  std::vector<LabeledDataset> parts(static_cast<std::size_t>(num_clients));
  std::vector<double> weights(static_cast<std::size_t>(k));
  for (int i = 0; i < num_clients; ++i) {
    auto& part = parts[static_cast<std::size_t>(i)];
    part.dim = data.dim;
    part.num_classes = k;
    part.provenance = data.provenance + "/client" + std::to_string(i);
    const long quota = base + (i < extra ? 1 : 0);
    for (long s = 0; s < quota; ++s) {
      double mass = 0.0;
      for (int c = 0; c < k; ++c) {
        const auto uc = static_cast<std::size_t>(c);
        weights[uc] = pool[uc].empty() ? 0.0 : mix[static_cast<std::size_t>(i)][uc];
        mass += weights[uc];
      }
      if (mass <= 0.0)
        for (int c = 0; c < k; ++c)
          weights[static_cast<std::size_t>(c)] = pool[static_cast<std::size_t>(c)].empty() ? 0.0 : 1.0;
      std::discrete_distribution<int> pick(weights.begin(), weights.end());
      auto& queue = pool[static_cast<std::size_t>(pick(rng))];
      part.items.push_back(data.items[queue.front()]);
      queue.pop_front();
    }
  }

  if (client_shift) {
    for (auto& part : parts) {
      const Matrix q = rand_orthonormal(data.dim, data.dim, rng);
      for (auto& ex : part.items)
        ex.sigma = SpdMatrix(symmetrize(q * ex.sigma.mat() * q.transpose()));
    }
  }
  return parts;
}

std::vector<long> largest_remainder(long n, const std::vector<double>& fractions) {
  std::vector<long> out(fractions.size());
  std::vector<std::pair<double, std::size_t>> rema;
  long assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double target = static_cast<double>(n) * fractions[i];
    out[i] = static_cast<long>(std::floor(target));
    assigned += out[i];
    rema.emplace_back(target - std::floor(target), i);
  }
  std::stable_sort(rema.begin(), rema.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (long r = 0; r < n - assigned; ++r) out[rema[static_cast<std::size_t>(r)].second] += 1;
  return out;
}

DataSplit stratified_split(const LabeledDataset& data, const SplitFractions& fractions,
                           std::mt19937_64& rng) {
  const double total = fractions.train + fractions.val + fractions.test;
  if (std::abs(total - 1.0) > 1e-9 || fractions.train < 0 || fractions.val < 0 ||
      fractions.test < 0)
    throw ConfigError("split fractions must be nonnegative and sum to 1");

  DataSplit split;
  for (auto* part : {&split.train, &split.val, &split.test}) {
    part->dim = data.dim;
    part->num_classes = data.num_classes;
    part->provenance = data.provenance;
  }

  for (int c = 1; c <= data.num_classes; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < data.items.size(); ++i)
      if (data.items[i].label == c) idx.push_back(i);
    if (idx.size() < 3)
      throw DataError("stratified_split: class " + std::to_string(c) + " has only " +
                      std::to_string(idx.size()) + " items; need at least 3");
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto sizes = largest_remainder(static_cast<long>(idx.size()),
                                         {fractions.train, fractions.val, fractions.test});
    std::size_t cursor = 0;
    LabeledDataset* parts[3] = {&split.train, &split.val, &split.test};
    for (int p = 0; p < 3; ++p)
      for (long j = 0; j < sizes[static_cast<std::size_t>(p)]; ++j)
        parts[p]->items.push_back(data.items[idx[cursor++]]);
  }
  return split;
}

namespace {

constexpr char kMagic[5] = {'F', 'S', 'P', 'D', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double x) {
  const auto v = std::bit_cast<std::uint64_t>(x);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in, std::uint64_t& offset, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DataError(std::string("dataset file truncated reading ") + what + " at byte " +
                    std::to_string(offset));
  offset += 4;
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& in, std::uint64_t& offset, const char* what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw DataError(std::string("dataset file truncated reading ") + what + " at byte " +
                    std::to_string(offset));
  offset += 8;
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return std::bit_cast<double>(v);
}

}  // namespace

void save_dataset(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(data.dim));
  put_u32(out, static_cast<std::uint32_t>(data.num_classes));
  put_u32(out, static_cast<std::uint32_t>(data.items.size()));
  for (const auto& ex : data.items) {
    put_u32(out, static_cast<std::uint32_t>(ex.label));
    const Vector v = vech(ex.sigma.mat());
    for (Index i = 0; i < v.size(); ++i) put_f64(out, v(i));
  }
  if (!out) throw DataError("write failure on " + path);
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path + " for reading");
  std::uint64_t offset = 0;

  char magic[5];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("dataset file " + path + ": bad magic at byte 0");
  offset += sizeof(magic);

  const std::uint32_t dim = get_u32(in, offset, "dim");
  const std::uint32_t num_classes = get_u32(in, offset, "class count");
  const std::uint32_t count = get_u32(in, offset, "item count");
  if (dim == 0) throw DataError("dataset file " + path + ": zero dimension in header");
  if (num_classes < 2) throw DataError("dataset file " + path + ": fewer than 2 classes");

  LabeledDataset data;
  data.dim = static_cast<Index>(dim);
  data.num_classes = static_cast<int>(num_classes);
  data.provenance = path;
  data.items.reserve(count);
  const Index vlen = data.dim * (data.dim + 1) / 2;
  Vector v(vlen);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint32_t label = get_u32(in, offset, "record label");
    if (label < 1 || label > num_classes)
      throw DataError("dataset file " + path + ": label " + std::to_string(label) +
                      " out of range at byte " + std::to_string(offset - 4));
    for (Index i = 0; i < vlen; ++i) v(i) = get_f64(in, offset, "record entry");
    try {
      data.items.push_back({SpdMatrix(unvech(v)), static_cast<int>(label)});
    } catch (const Error& e) {
      throw DataError("dataset file " + path + ": record " + std::to_string(r) +
                      " ending at byte " + std::to_string(offset) + " is not SPD: " + e.what());
    }
  }
  if (in.peek() != std::ifstream::traits_type::eof())
    throw DataError("dataset file " + path + ": trailing bytes after " +
                    std::to_string(count) + " records at byte " + std::to_string(offset));
  return data;
}

}  // namespace fedspd
