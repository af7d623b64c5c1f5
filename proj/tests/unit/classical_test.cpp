#include "nfship/classical.hpp"

#include <numeric>

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace nfship::classical {
namespace {

AisVector at(double v0, double v1 = 0) { return {v0, v1, 0, 0, 0, 0, 0}; }

TEST(Knn, MajorityOfNearest) {
  KnnClassifier knn({at(0), at(1), at(2), at(10), at(11)}, {0, 0, 0, 1, 1}, 2, 3);
  EXPECT_EQ(knn.predict(at(0.5)), 0);
  EXPECT_EQ(knn.predict(at(10.4)), 1);
  const auto s = knn.scores(at(10.4));
  EXPECT_NEAR(s[1], 2.0 / 3.0, 1e-12);
}

TEST(Knn, VoteTieGoesToSmallerDistanceSum) {
  KnnClassifier knn({at(0), at(3), at(5), at(9)}, {0, 0, 1, 1}, 2, 2);
  // Nearest two to 4.2 are 3 (class 0) and 5 (class 1); 5 is closer.
  EXPECT_EQ(knn.predict(at(4.2)), 1);
  EXPECT_EQ(knn.predict(at(3.8)), 0);
}

TEST(Knn, OversizedKIsClamped) {
  KnnClassifier knn({at(0), at(1)}, {0, 1}, 2, 9);
  EXPECT_EQ(knn.k(), 2u);
}

TEST(GaussianNb, SeparatesDistinctMeans) {
  std::vector<AisVector> X;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    X.push_back(at(i % 5 * 0.1, 1));
    y.push_back(0);
    X.push_back(at(10 + i % 5 * 0.1, 2));
    y.push_back(1);
  }
  GaussianNb nb(X, y, 2);
  EXPECT_EQ(nb.predict(at(0.2, 1)), 0);
  EXPECT_EQ(nb.predict(at(9.9, 2)), 1);
  const auto s = nb.scores(at(0.2, 1));
  EXPECT_NEAR(std::accumulate(s.begin(), s.end(), 0.0), 1.0, 1e-12);
}

TEST(GaussianNb, ConstantFeaturesDoNotBreakPosteriors) {
  std::vector<AisVector> X{at(1), at(1), at(2), at(2)};
  std::vector<int> y{0, 0, 1, 1};
  GaussianNb nb(X, y, 3);  // class 2 absent
  const auto s = nb.scores(at(1));
  EXPECT_NEAR(s[0], 1.0, 1e-12);
  EXPECT_EQ(s[2], 0.0);
}

TEST(Logistic, FitsLinearlySeparableData) {
  std::vector<AisVector> X;
  std::vector<int> y;
  for (int i = 0; i < 30; ++i) {
    X.push_back(at(i, 30 - i));
    y.push_back(i < 10 ? 0 : (i < 20 ? 1 : 2));
  }
  LogisticRegression lr(X, y, 3);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < X.size(); ++i) correct += lr.predict(X[i]) == y[i];
  EXPECT_GE(correct, 27u);
  EXPECT_LT(lr.final_loss(), 0.5);
}

TEST(CrispRules, AgreeWithTreesOnSeparableData) {
  const auto ds = nfship::testing::synthetic_vc(100, 1);
  const auto fit = nfship::testing::small_rules(ds, 6);
  CrispRuleClassifier crisp(fit.rules, fit.trees);
  std::size_t correct = 0;
  for (const auto& r : ds.rows) correct += crisp.predict(r.ais) == r.label;
  EXPECT_EQ(correct, ds.size());
  const auto s = crisp.scores(ds.rows[0].ais);
  EXPECT_NEAR(std::accumulate(s.begin(), s.end(), 0.0), 1.0, 1e-12);
}

TEST(CrispRules, NoFiringRuleFallsBackToLeafFractions) {
  cart::RuleSet rs;
  rs.feature_names = cart::ais_feature_names();
  rs.rules = {{"a", {{{{0, cart::Op::kGreater, 100.0}}}}}, {"b", {{{{0, cart::Op::kGreater, 200.0}}}}}};
  cart::Tree ta, tb;
  ta.nodes = {{-1, 0, -1, -1, 0.3, 10, 0}};
  tb.nodes = {{-1, 0, -1, -1, 0.6, 10, 0}};
  CrispRuleClassifier crisp(rs, {ta, tb});
  EXPECT_EQ(crisp.fired(at(5)), (std::vector<bool>{false, false}));
  EXPECT_EQ(crisp.predict(at(5)), 1);
  EXPECT_EQ(crisp.predict(at(150)), 0);
}

}  // namespace
}  // namespace nfship::classical
