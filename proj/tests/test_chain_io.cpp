#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "mvreprobit/chain_io.hpp"
#include "mvreprobit/random.hpp"

using namespace mvreprobit;

namespace {

ChainStore random_store(const Levels& levels, std::uint64_t seed) {
  ChainStore store;
  store.spec.outcomes = 3;
  store.spec.covariates = 2;
  store.spec.levels = levels;
  store.spec.seed = seed;
  RandomStream rng(seed, 0);
  for (std::size_t c = 0; c < 2; ++c) {
    ChainRecord rec;
    rec.chain = c;
    rec.seed = seed;
    rec.step_size = {0.05 * rng.uniform(), 0.1 / 3.0, 1e-7};
    rec.accepted = {10, 20, 30};
    rec.proposed = {100, 100, 100};
    for (int i = 0; i < 25; ++i) {
      ParameterState s = ParameterState::neutral(3, 2, levels);
      for (Eigen::Index k = 0; k < s.B.size(); ++k) s.B.data()[k] = rng.normal() * 1e3;
      for (Level l : kAllLevels) {
        if (!levels.active(l)) continue;
        s.sigma(l) = sample_inverse_wishart(Matrix::Identity(3, 3), 6, rng);
      }
      s.rho_e = CorrVector(3, {rng.uniform() - 0.5, 0.1 * rng.normal(), 1.0 / 7.0});
      rec.draws.push_back(s);
    }
    store.chains.push_back(rec);
  }
  return store;
}

}  // namespace

TEST(ChainIo, CsvRoundTripIsExact) {
  for (const Levels& lv : {Levels::two_level(), Levels::three_level()}) {
    const auto store = random_store(lv, 5);
    std::stringstream ss;
    write_chain_csv(ss, store.spec, store.chains[1]);
    const auto f = read_chain_csv(ss);
    EXPECT_EQ(f.outcomes, 3u);
    EXPECT_EQ(f.covariates, 2u);
    EXPECT_EQ(f.levels, lv);
    EXPECT_EQ(f.spec_hash, store.spec.hash());
    EXPECT_EQ(f.record.chain, 1u);
    EXPECT_EQ(f.record.seed, 5u);
    EXPECT_EQ(f.record.step_size, store.chains[1].step_size);
    EXPECT_EQ(f.record.accepted, store.chains[1].accepted);
    EXPECT_EQ(f.record.proposed, store.chains[1].proposed);
    ASSERT_EQ(f.record.draws.size(), store.chains[1].draws.size());
    for (std::size_t i = 0; i < f.record.draws.size(); ++i) EXPECT_TRUE(f.record.draws[i] == store.chains[1].draws[i]);
  }
}

TEST(ChainIo, HeaderAndColumns) {
  const auto store = random_store(Levels::two_level(), 6);
  std::stringstream ss;
  write_chain_csv(ss, store.spec, store.chains[0]);
  const std::string text = ss.str();
  EXPECT_NE(text.find("# spec_hash=" + store.spec.hash()), std::string::npos);
  EXPECT_NE(text.find("# seed=6"), std::string::npos);
  EXPECT_NE(text.find("\ndraw,B_1_1,B_1_2,B_2_1"), std::string::npos);
  EXPECT_NE(text.find("\n1,"), std::string::npos);
}

TEST(ChainIo, TruthSidecarUsesDrawZero) {
  const auto store = random_store(Levels::three_level(), 7);
  std::stringstream ss;
  write_truth_csv(ss, store.chains[0].draws[3]);
  EXPECT_NE(ss.str().find("\n0,"), std::string::npos);
  EXPECT_TRUE(read_truth_csv(ss) == store.chains[0].draws[3]);
}

TEST(ChainIo, DirectoryRoundTripAndMismatch) {
  const auto dir = std::filesystem::temp_directory_path() / "mvreprobit_chain_io_test";
  std::filesystem::remove_all(dir);
  const auto store = random_store(Levels::three_level(), 8);
  write_chain_store(dir, store);
  EXPECT_TRUE(std::filesystem::exists(dir / "chain_1.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "chain_2.csv"));
  const auto loaded = load_chain_store(dir);
  ASSERT_EQ(loaded.chains.size(), 2u);
  EXPECT_EQ(loaded.spec.levels, store.spec.levels);
  EXPECT_TRUE(loaded.chains[1].draws.back() == store.chains[1].draws.back());

  // A chain from a different model in the same directory is rejected.
  auto other = random_store(Levels::two_level(), 8);
  other.chains.resize(1);
  other.chains[0].chain = 2;
  write_chain_store(dir, other);
  EXPECT_THROW(load_chain_store(dir), ValidationError);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_chain_store(dir), ValidationError);
}

TEST(ChainIo, CorruptFilesRejected) {
  std::stringstream no_header("1,2,3\n");
  EXPECT_THROW(read_chain_csv(no_header), ValidationError);
  std::stringstream wrong_columns("# outcomes=1\n# covariates=1\n# levels=u\n# chain=0\n# seed=1\ndraw,B_1_1\n");
  EXPECT_THROW(read_chain_csv(wrong_columns), ValidationError);
  std::stringstream short_row(
      "# outcomes=1\n# covariates=1\n# levels=u\n# chain=0\n# seed=1\ndraw,B_1_1,sigma_u_1_1\n1,0.5\n");
  EXPECT_THROW(read_chain_csv(short_row), ValidationError);
}
