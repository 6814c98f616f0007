#include <doctest.h>

#include "rekd/data.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

using namespace rekd;
namespace fs = std::filesystem;

namespace {

DatasetSpec small_spec() {
  DatasetSpec s;
  s.features = 10;
  s.embed_dim = 4;
  s.classes = 2;
  s.k_signal = 3;
  s.n_train = 24;
  s.n_dev = 8;
  s.n_test = 8;
  s.noise_std = 0.3;
  s.seed = 7;
  return s;
}

fs::path temp_file(const char* name) {
  return fs::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("spec validation") {
  DatasetSpec s = small_spec();
  CHECK_NOTHROW(s.validate());
  s.k_signal = 11;  // more signal rows than rows
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec();
  s.n_train = 25;  // not divisible by classes
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec();
  s.noise_std = -1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("class signatures are unit-norm and orthogonal when D >= C") {
  const Matrix sig = class_signatures(4, 2, 7);
  CHECK(sig.rows() == 2);
  CHECK(sig.cols() == 4);
  CHECK(sig.row(0).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sig.row(1).norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(sig.row(0).dot(sig.row(1))) < 1e-10);
  // Same seed, same directions.
  CHECK((sig - class_signatures(4, 2, 7)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("planted splits are balanced and carry the signature in the marked rows") {
  const DatasetSpec s = small_spec();
  const Dataset d = gen_planted(s);
  CHECK(d.train.size() == 24);
  CHECK(d.dev.size() == 8);
  CHECK(d.test.size() == 8);

  const Matrix sig = class_signatures(s.embed_dim, s.classes, s.seed);
  for (const auto* split : {&d.train, &d.dev, &d.test}) {
    std::map<Index, int> counts;
    for (const Sample& smp : *split) {
      counts[smp.label]++;
      REQUIRE(smp.true_mask.has_value());
      int ones = 0;
      for (Index l = 0; l < s.features; ++l) {
        if ((*smp.true_mask)[l]) {
          ++ones;
          CHECK((smp.x.row(l) - sig.row(smp.label)).cwiseAbs().maxCoeff() == 0.0);
        }
      }
      CHECK(ones == s.k_signal);
    }
    for (auto& [label, n] : counts)
      CHECK(n == static_cast<int>(split->size()) / static_cast<int>(s.classes));
  }
}

TEST_CASE("generation is deterministic in the seed") {
  const DatasetSpec s = small_spec();
  const Dataset a = gen_planted(s);
  const Dataset b = gen_planted(s);
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].label == b.train[i].label);
    CHECK((a.train[i].x - b.train[i].x).cwiseAbs().maxCoeff() == 0.0);
  }
  DatasetSpec s2 = s;
  s2.seed = 8;
  const Dataset c = gen_planted(s2);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.train.size() && !any_diff; ++i)
    any_diff = (a.train[i].x - c.train[i].x).cwiseAbs().maxCoeff() != 0.0;
  CHECK(any_diff);
}

TEST_CASE("table files round-trip bit-exactly") {
  const DatasetSpec s = small_spec();
  const Dataset d = gen_planted(s);
  const fs::path path = temp_file("rekd_table_roundtrip.txt");

  save_table(path, d.train, s.features, s.embed_dim, s.classes);
  const std::vector<Sample> back = load_table(path, s.features, s.embed_dim, s.classes);
  REQUIRE(back.size() == d.train.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].label == d.train[i].label);
    CHECK((back[i].x - d.train[i].x).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back[i].true_mask.has_value());
    CHECK(*back[i].true_mask == *d.train[i].true_mask);
  }
  fs::remove(path);
}

TEST_CASE("table loader rejects malformed input") {
  const fs::path path = temp_file("rekd_table_bad.txt");
  const DatasetSpec s = small_spec();

  std::FILE* f = std::fopen(path.c_str(), "w");
  std::fputs("#L=10 D=4 C=2\n0,1,2\n", f);  // too few values
  std::fclose(f);
  CHECK_THROWS_AS(load_table(path, s.features, s.embed_dim, s.classes), ConfigError);

  f = std::fopen(path.c_str(), "w");
  std::fputs("#L=9 D=4 C=2\n", f);  // header disagrees with the expected dims
  std::fclose(f);
  CHECK_THROWS_AS(load_table(path, s.features, s.embed_dim, s.classes), ConfigError);
  fs::remove(path);

  CHECK_THROWS_AS(load_table(temp_file("rekd_no_such_file.txt"), 10, 4, 2), ConfigError);
}

TEST_CASE("stratified split follows the fractions") {
  const DatasetSpec s = small_spec();
  const Dataset d = gen_planted(s);
  const auto parts = split(d.train, {0.5, 0.25, 0.25}, 99);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].size() == 12);
  CHECK(parts[1].size() == 6);
  CHECK(parts[2].size() == 6);
  for (const auto& part : parts) {
    std::map<Index, int> counts;
    for (const Sample& smp : part) counts[smp.label]++;
    CHECK(counts[0] == counts[1]);
  }
  CHECK_THROWS_AS(split(d.train, {}, 1), ConfigError);
  CHECK_THROWS_AS(split(d.train, {0.5, 0.4}, 1), ConfigError);
  CHECK_THROWS_AS(split(d.train, {0.5, -0.5, 1.0}, 1), ConfigError);
}

TEST_CASE("epoch batches cover every index exactly once") {
  Rng rng(17);
  const auto batches = epoch_batches(23, 8, rng);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 8);
  CHECK(batches[2].size() == 7);  // short tail kept
  std::set<std::size_t> seen;
  for (const auto& b : batches)
    for (std::size_t i : b) CHECK(seen.insert(i).second);
  CHECK(seen.size() == 23);

  // Same state, same order; a different state shuffles differently.
  Rng r2(17);
  const auto again = epoch_batches(23, 8, r2);
  CHECK(again == batches);
  Rng r3(18);
  CHECK(epoch_batches(23, 8, r3) != batches);
}
