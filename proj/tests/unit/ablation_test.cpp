#include "nfship/ablation.hpp"

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace nfship::pipeline {
namespace {

TEST(FitRules, UsesDistinctVesselsAndDatasetLabels) {
  const auto ds = nfship::testing::synthetic_vc(60, 1);
  const auto fit = nfship::testing::small_rules(ds);
  ASSERT_EQ(fit.trees.size(), ds.num_classes());
  ASSERT_EQ(fit.rules.rules.size(), ds.num_classes());
  for (std::size_t c = 0; c < ds.num_classes(); ++c) EXPECT_EQ(fit.rules.rules[c].label, ds.label_names[c]);
  cart::CartParams p;
  p.max_depth = 4;
  p.min_samples_leaf = 1;
  const auto back = rule_fit_from_json(to_json(fit, p));
  EXPECT_EQ(cart::to_json(back.rules), cart::to_json(fit.rules));
  EXPECT_EQ(back.trees.size(), fit.trees.size());
}

TEST(Ablation, SweepsEveryCellInOrder) {
  const auto train = nfship::testing::synthetic_vc(100, 2, 0.4);
  const auto test = nfship::testing::synthetic_vc(40, 3, 0.4);
  AblationOptions o;
  o.cart.min_samples_leaf = 1;
  o.model = nfship::testing::small_config();
  o.model.slope_mode = model::SlopeMode::kGlobal;
  o.model.train.epochs = 2;
  const auto report = ablation_sweep(train, test, o);
  ASSERT_EQ(report.cells.size(), 12u);
  std::size_t i = 0;
  for (std::size_t d : {4, 6, 8, 10}) {
    for (double r : {14.0, 5.4, 2.14}) {
      const auto& c = report.cells[i++];
      EXPECT_EQ(c.depth, d);
      EXPECT_EQ(c.r, r);
      EXPECT_TRUE(c.error.empty()) << c.error;
      ASSERT_TRUE(c.macro_f1.has_value());
      EXPECT_GE(*c.macro_f1, 0.0);
      EXPECT_LE(*c.macro_f1, 1.0);
      EXPECT_EQ(c.epoch_loss.size(), 2u);
    }
  }
  EXPECT_EQ(report.at(6, 5.4).label, "high");
  EXPECT_EQ(report.at(4, 14.0).label, "very high");
  EXPECT_EQ(report.at(4, 2.14).label, "medium high");
  // Deeper trees never yield fewer comparisons or conditions.
  for (double r : {14.0, 5.4, 2.14}) {
    for (auto [lo, hi] : {std::pair<std::size_t, std::size_t>{4, 6}, {6, 8}, {8, 10}}) {
      EXPECT_LE(report.at(lo, r).comparisons, report.at(hi, r).comparisons);
      EXPECT_LE(report.at(lo, r).conditions, report.at(hi, r).conditions);
    }
  }
  const auto table = report.render();
  EXPECT_NE(table.find("D=10"), std::string::npos);
  EXPECT_NE(table.find("# comparisons"), std::string::npos);
  EXPECT_EQ(report.to_json().at("cells").size(), 12u);
}

TEST(Ablation, SweepIsDeterministic) {
  const auto train = nfship::testing::synthetic_vc(60, 4, 0.4);
  const auto test = nfship::testing::synthetic_vc(30, 5, 0.4);
  AblationOptions o;
  o.depths = {4};
  o.orness = {5.4};
  o.cart.min_samples_leaf = 1;
  o.model = nfship::testing::small_config(3);
  o.model.train.epochs = 2;
  EXPECT_EQ(ablation_sweep(train, test, o).to_json(), ablation_sweep(train, test, o).to_json());
}

}  // namespace
}  // namespace nfship::pipeline
