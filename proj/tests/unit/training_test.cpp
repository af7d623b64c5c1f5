#include "nfship/training.hpp"

#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace nfship::model {
namespace {

std::vector<std::size_t> flatten(const std::vector<std::vector<std::size_t>>& batches) {
  std::vector<std::size_t> all;
  for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  return all;
}

TEST(MakeBatches, CoversEveryRowOnce) {
  std::mt19937_64 rng(1);
  const auto batches = make_batches(70, 32, rng);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 32u);
  EXPECT_EQ(batches[2].size(), 6u);
  std::vector<std::size_t> expected(70);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(flatten(batches), expected);
}

TEST(MakeBatches, TrailingSingletonIsMerged) {
  std::mt19937_64 rng(2);
  const auto batches = make_batches(65, 32, rng);
  ASSERT_EQ(batches.size(), 2u);
  EXPECT_EQ(batches[1].size(), 33u);
  EXPECT_EQ(flatten(batches).size(), 65u);
}

TEST(MakeBatches, SameSeedSameOrder) {
  std::mt19937_64 a(3), b(3), c(4);
  EXPECT_EQ(make_batches(100, 16, a), make_batches(100, 16, b));
  std::mt19937_64 a2(3);
  EXPECT_NE(make_batches(100, 16, a2), make_batches(100, 16, c));
}

TEST(MakeBatches, SingleRowStaysAlone) {
  std::mt19937_64 rng(5);
  const auto batches = make_batches(1, 32, rng);
  ASSERT_EQ(batches.size(), 1u);
  EXPECT_EQ(batches[0].size(), 1u);
}

TEST(LossCsv, RoundTrips) {
  nfship::testing::TempDir dir;
  const std::vector<double> loss{1.6094379124341003, 1.25, 0.1 + 0.2};
  write_loss_csv(dir / "l.csv", loss);
  EXPECT_EQ(read_loss_csv(dir / "l.csv"), loss);
  EXPECT_EQ(nfship::testing::read_bytes(dir / "l.csv").substr(0, 11), "epoch,loss\n");
}

TEST(TrainOptions, ValidationAndJson) {
  TrainOptions o;
  o.epochs = 7;
  o.seed = 9;
  o.dropout = false;
  const auto back = train_options_from_json(to_json(o));
  EXPECT_EQ(to_json(back), to_json(o));
  o.batch_size = 0;
  EXPECT_THROW(o.validate(), std::invalid_argument);
  o = {};
  o.learning_rate = -1;
  EXPECT_THROW(o.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace nfship::model
