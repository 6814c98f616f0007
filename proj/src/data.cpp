#include "rekd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

namespace rekd {

namespace {

// Stream tags under the dataset seed.
constexpr std::uint64_t kSignatureStream = 1;
constexpr std::uint64_t kSplitStreamBase = 10;

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.next_below(i)]);
}

std::vector<Sample> gen_split(const DatasetSpec& s, const Matrix& signatures, Rng rng,
                              int count) {
  std::vector<Sample> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Sample smp;
    smp.label = i % s.classes;  // exact balance; order shuffled below
    smp.x = gaussian_matrix(rng, s.features, s.embed_dim, s.noise_std);
    // Partial Fisher-Yates: first k_signal entries of a fresh permutation.
    std::vector<Index> pos(s.features);
    std::iota(pos.begin(), pos.end(), Index{0});
    std::vector<std::uint8_t> mask(s.features, 0);
    for (Index k = 0; k < s.k_signal; ++k) {
      const Index j = k + static_cast<Index>(rng.next_below(s.features - k));
      std::swap(pos[k], pos[j]);
      smp.x.row(pos[k]) = signatures.row(smp.label);
      mask[pos[k]] = 1;
    }
    smp.true_mask = std::move(mask);
    out.push_back(std::move(smp));
  }
  std::vector<std::size_t> order(out.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng order_rng = rng.fork(0);
  shuffle_indices(order, order_rng);
  std::vector<Sample> shuffled;
  shuffled.reserve(out.size());
  for (std::size_t i : order) shuffled.push_back(std::move(out[i]));
  return shuffled;
}

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, int line,
                             const std::string& what) {
  throw ConfigError(path.string() + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

void DatasetSpec::validate() const {
  if (features < 1) throw ConfigError("dataset L must be >= 1");
  if (embed_dim < 1) throw ConfigError("dataset D must be >= 1");
  if (classes < 2) throw ConfigError("dataset C must be >= 2");
  if (k_signal < 1 || k_signal > features)
    throw ConfigError("dataset k_signal must lie in [1, L]");
  if (n_train < 0 || n_dev < 0 || n_test < 0)
    throw ConfigError("dataset split sizes must be >= 0");
  for (int n : {n_train, n_dev, n_test})
    if (n % static_cast<int>(classes) != 0)
      throw ConfigError("dataset split sizes must be divisible by C for exact balance");
  if (!(noise_std >= 0.0)) throw ConfigError("dataset noise_std must be >= 0");
}

Matrix class_signatures(Index embed_dim, Index classes, std::uint64_t seed) {
  Rng rng = Rng(seed).fork(kSignatureStream);
  Matrix sig = gaussian_matrix(rng, classes, embed_dim, 1.0);
  // Gram-Schmidt; exactly orthonormal when D >= C, best-effort otherwise.
  for (Index c = 0; c < classes; ++c) {
    for (Index p = 0; p < std::min(c, embed_dim); ++p)
      sig.row(c) -= sig.row(c).dot(sig.row(p)) * sig.row(p);
    const double n = sig.row(c).norm();
    if (n < 1e-9) throw std::runtime_error("class_signatures: degenerate draw");
    sig.row(c) /= n;
  }
  return sig;
}

Dataset gen_planted(const DatasetSpec& spec) {
  spec.validate();
  const Matrix sig = class_signatures(spec.embed_dim, spec.classes, spec.seed);
  Rng root(spec.seed);
  Dataset d;
  d.train = gen_split(spec, sig, root.fork(kSplitStreamBase + 0), spec.n_train);
  d.dev = gen_split(spec, sig, root.fork(kSplitStreamBase + 1), spec.n_dev);
  d.test = gen_split(spec, sig, root.fork(kSplitStreamBase + 2), spec.n_test);
  return d;
}

std::vector<std::vector<Sample>> split(const std::vector<Sample>& samples,
                                       const std::vector<double>& fractions,
                                       std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split: need at least one fraction");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");

  // Group indices by label, preserving input order within a class.
  std::vector<Index> labels;
  for (const Sample& s : samples)
    if (std::find(labels.begin(), labels.end(), s.label) == labels.end())
      labels.push_back(s.label);
  std::sort(labels.begin(), labels.end());

  std::vector<std::vector<Sample>> out(fractions.size());
  Rng root(seed);
  for (Index label : labels) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].label == label) idx.push_back(i);
    Rng rng = root.fork(static_cast<std::uint64_t>(label));
    shuffle_indices(idx, rng);
    const std::size_t n = idx.size();
    double cum = 0.0;
    std::size_t taken = 0;
    for (std::size_t j = 0; j < fractions.size(); ++j) {
      cum += fractions[j];
      const auto upto = j + 1 == fractions.size()
                            ? n
                            : static_cast<std::size_t>(std::floor(n * cum + 1e-9));
      if (upto == taken)
        throw ConfigError("split: class " + std::to_string(label) +
                          " has no samples in split " + std::to_string(j));
      for (; taken < upto; ++taken) out[j].push_back(samples[idx[taken]]);
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    Rng& rng) {
  if (batch_size < 1) throw std::invalid_argument("epoch_batches: batch_size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_indices(order, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < n; at += batch_size) {
    const std::size_t end = std::min(n, at + batch_size);
    batches.emplace_back(order.begin() + at, order.begin() + end);
  }
  return batches;
}

void save_table(const std::filesystem::path& path, const std::vector<Sample>& samples,
                Index features, Index embed_dim, Index classes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_table: cannot open " + path.string());
  out << "#L=" << features << " D=" << embed_dim << " C=" << classes << "\n";
  for (const Sample& s : samples) {
    if (s.x.rows() != features || s.x.cols() != embed_dim)
      throw std::invalid_argument("save_table: sample shape mismatch");
    out << s.label;
    for (Index r = 0; r < features; ++r)
      for (Index c = 0; c < embed_dim; ++c) out << ',' << fmt17(s.x(r, c));
    if (s.true_mask) {
      out << '|';
      for (Index l = 0; l < features; ++l) {
        if (l) out << ',';
        out << int((*s.true_mask)[l]);
      }
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_table: write failed for " + path.string());
}

std::vector<Sample> load_table(const std::filesystem::path& path, Index features,
                               Index embed_dim, Index classes) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_table: cannot open " + path.string());
  std::vector<Sample> out;
  std::string line;
  int lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (!saw_header) {
      Index l = -1, d = -1, c = -1;
      if (std::sscanf(line.c_str(), "#L=%td D=%td C=%td", &l, &d, &c) != 3)
        parse_fail(path, lineno, "expected header '#L=<int> D=<int> C=<int>'");
      if (l != features || d != embed_dim || c != classes)
        parse_fail(path, lineno,
                   "header dims L=" + std::to_string(l) + " D=" + std::to_string(d) +
                       " C=" + std::to_string(c) + " do not match expected L=" +
                       std::to_string(features) + " D=" + std::to_string(embed_dim) +
                       " C=" + std::to_string(classes));
      saw_header = true;
      continue;
    }

    const auto bar = line.find('|');
    const std::string values = line.substr(0, bar);
    Sample smp;
    smp.x.resize(features, embed_dim);

    const char* p = values.c_str();
    char* end = nullptr;
    const long label = std::strtol(p, &end, 10);
    if (end == p || label < 0 || label >= classes)
      parse_fail(path, lineno, "bad label");
    smp.label = label;
    p = end;
    const Index total = features * embed_dim;
    for (Index i = 0; i < total; ++i) {
      if (*p != ',') parse_fail(path, lineno, "expected " + std::to_string(total) +
                                                  " values, found " + std::to_string(i));
      ++p;
      const double v = std::strtod(p, &end);
      if (end == p) parse_fail(path, lineno, "bad value at position " + std::to_string(i));
      smp.x(i / embed_dim, i % embed_dim) = v;
      p = end;
    }
    if (*p != '\0' && *p != '\r')
      parse_fail(path, lineno, "trailing characters after " + std::to_string(total) + " values");

    if (bar != std::string::npos) {
      std::vector<std::uint8_t> mask(features);
      p = line.c_str() + bar + 1;
      for (Index l = 0; l < features; ++l) {
        if (l) {
          if (*p != ',') parse_fail(path, lineno, "mask block must have L entries");
          ++p;
        }
        if (*p == '0')
          mask[l] = 0;
        else if (*p == '1')
          mask[l] = 1;
        else
          parse_fail(path, lineno, "mask entries must be 0 or 1");
        ++p;
      }
      if (*p != '\0' && *p != '\r') parse_fail(path, lineno, "trailing characters after mask");
      smp.true_mask = std::move(mask);
    }
    out.push_back(std::move(smp));
  }
  return out;
}

}  // namespace rekd
