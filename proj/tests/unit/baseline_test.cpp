#include "nfship/baseline.hpp"

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "test_util.hpp"

namespace nfship::model {
namespace {

using nfship::testing::kSmallShape;
using nfship::testing::synthetic_vc;

BaselineConfig small_baseline(std::uint64_t seed = 0) {
  BaselineConfig cfg;
  cfg.branch.feature_shape = kSmallShape;
  cfg.branch.conv1 = {4, 3, 1};
  cfg.branch.conv2 = {2, 3, 1};
  cfg.branch.a1_width = 8;
  cfg.b1_width = cfg.b2_width = cfg.b3_width = 6;
  cfg.bilinear_width = 5;
  cfg.train.seed = seed;
  cfg.train.epochs = 3;
  cfg.train.batch_size = 8;
  cfg.train.learning_rate = 1e-3;
  return cfg;
}

TEST(Baseline, ProbabilitiesAreDistributions) {
  const auto ds = synthetic_vc(30, 1);
  BaselineModel model(ds.label_names, small_baseline());
  const auto probs = model.probabilities(ds, all_rows(ds));
  ASSERT_EQ(probs.size(), ds.size());
  for (const auto& p : probs) {
    ASSERT_EQ(p.size(), ds.num_classes());
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-5);
  }
}

TEST(Baseline, TrainingIsDeterministic) {
  const auto ds = synthetic_vc(30, 2);
  BaselineModel a(ds.label_names, small_baseline(4));
  BaselineModel b(ds.label_names, small_baseline(4));
  EXPECT_EQ(a.train(ds).epoch_loss, b.train(ds).epoch_loss);
  EXPECT_EQ(a.classify(ds), b.classify(ds));
}

TEST(Baseline, SaveLoadReproducesProbabilities) {
  nfship::testing::TempDir dir;
  const auto ds = synthetic_vc(30, 3);
  BaselineModel model(ds.label_names, small_baseline());
  model.train(ds);
  model.save(dir / "b.ckpt");
  auto loaded = BaselineModel::load(dir / "b.ckpt");
  EXPECT_EQ(loaded.labels(), ds.label_names);
  EXPECT_EQ(model.probabilities(ds, all_rows(ds)), loaded.probabilities(ds, all_rows(ds)));
}

TEST(Baseline, LoadingANeuroFuzzyCheckpointFails) {
  nfship::testing::TempDir dir;
  const auto ds = synthetic_vc(30, 4);
  const auto fit = nfship::testing::small_rules(ds);
  NeuroFuzzyModel nf(fit.rules, nfship::testing::small_config());
  nf.save(dir / "nf.ckpt");
  EXPECT_THROW(BaselineModel::load(dir / "nf.ckpt"), FormatError);
}

TEST(Baseline, ConfigJsonRoundTrip) {
  const auto cfg = small_baseline(5);
  EXPECT_EQ(to_json(baseline_config_from_json(to_json(cfg))), to_json(cfg));
}

}  // namespace
}  // namespace nfship::model
