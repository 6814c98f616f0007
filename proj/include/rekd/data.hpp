#pragma once

#include "rekd/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace rekd {

struct Sample {
  Matrix x;  // [L,D]
  Index label = 0;
  // Ground-truth signal positions, synthetic data only. Evaluation may score
  // against it; no loss ever reads it.
  std::optional<std::vector<std::uint8_t>> true_mask;
};

// Planted-rationale task: per sample, k_signal of the L feature rows carry
// the label's signature direction and the rest are isotropic noise.
struct DatasetSpec {
  Index features = 40;   // L
  Index embed_dim = 8;   // D
  Index classes = 4;     // C
  Index k_signal = 6;
  int n_train = 480;
  int n_dev = 160;
  int n_test = 320;
  double noise_std = 0.22;
  std::uint64_t seed = 1;

  void validate() const;  // ConfigError; split sizes must divide by classes
};

struct Dataset {
  std::vector<Sample> train, dev, test;
};

// Unit-norm class signature directions, shared by every split drawn from the
// same seed; orthonormal whenever D >= C.
Matrix class_signatures(Index embed_dim, Index classes, std::uint64_t seed);

// Deterministic in spec.seed; splits are drawn independently and each split
// is exactly class-balanced.
Dataset gen_planted(const DatasetSpec& spec);

// Stratified split by label. fractions must be positive and sum to 1 within
// 1e-9; per-class counts follow the fractions exactly when they divide
// evenly. A split left with an empty class is a ConfigError.
std::vector<std::vector<Sample>> split(const std::vector<Sample>& samples,
                                       const std::vector<double>& fractions,
                                       std::uint64_t seed);

// One epoch of index batches: a shuffle of [0, n) cut every batch_size; the
// final short batch is kept.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    Rng& rng);

// Text table format. Header line `#L=<int> D=<int> C=<int>`, then one sample
// per line: `label,v_0,...,v_{L*D-1}` (row-major) with an optional
// `|m_0,...,m_{L-1}` true-mask block. An empty file is an empty dataset.
void save_table(const std::filesystem::path& path, const std::vector<Sample>& samples,
                Index features, Index embed_dim, Index classes);
std::vector<Sample> load_table(const std::filesystem::path& path, Index features,
                               Index embed_dim, Index classes);

}  // namespace rekd
