#include "nfship/fuzzy.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

namespace nfship::fuzzy {
namespace {

// Direct formulas in extended precision, no shifting or clamping.
long double oracle_and(const std::vector<long double>& c, long double r) {
  long double s = 0;
  for (auto v : c) s += std::exp(r * v);
  return std::log(s / static_cast<long double>(c.size())) / r;
}

long double oracle_or(const std::vector<long double>& c, const std::vector<long double>& w,
                      long double r) {
  long double s = 0;
  for (std::size_t i = 0; i < c.size(); ++i) s += w[i] * std::exp(r * c[i]);
  return std::log(s) / r;
}

TEST(Membership, CentreIsExactlyHalf) {
  for (double s : {0.0, 0.3, 1.0, 200.0, -4.0}) {
    EXPECT_EQ(membership_gt(7.5, s, 7.5), 0.5);
    EXPECT_EQ(membership_le(7.5, s, 7.5), 0.5);
  }
}

TEST(Membership, ClosedFormValues) {
  EXPECT_NEAR(membership_gt(5, 1, 0), 0.9933071, 1e-7);
  EXPECT_NEAR(membership_le(5, 1, 0), 0.0066929, 1e-7);
  EXPECT_NEAR(membership_gt(1, 3, 0), 0.9525741268, 1e-9);
  EXPECT_NEAR(membership_gt(1, 1, 0), 0.7310585786, 1e-9);
}

TEST(Membership, ComplementsSumToOne) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> x(-100, 100), s(-50, 50);
  for (int i = 0; i < 1000; ++i) {
    const double a = x(rng), b = s(rng), v = x(rng);
    EXPECT_NEAR(membership_le(a, b, v) + membership_gt(a, b, v), 1.0, 1e-12);
  }
}

TEST(Membership, ExtremeArgumentsStayFinite) {
  EXPECT_EQ(membership_gt(1e6, 1e6, 0), 1.0);
  EXPECT_LT(membership_gt(-1e6, 1e6, 0), 1e-200);
  EXPECT_TRUE(std::isfinite(membership_le(1e300, 1e300, 0)));
}

TEST(WemAnd, PointValuesAgainstOracle) {
  const double c[2] = {0, 1};
  EXPECT_NEAR(wem_and(c, -14), 0.0495105, 1e-6);
  EXPECT_NEAR(wem_and(c, -5.4), 0.1275261, 1e-6);
  EXPECT_NEAR(wem_and(c, -14), static_cast<double>(oracle_and({0, 1}, -14)), 1e-12);
  EXPECT_NEAR(wem_and(c, -5.4), static_cast<double>(oracle_and({0, 1}, -5.4)), 1e-12);
}

TEST(WemAnd, IdempotentOnEqualInputs) {
  const double c[4] = {0.7, 0.7, 0.7, 0.7};
  for (double r : {-0.5, -5.4, -14.0, -200.0}) EXPECT_NEAR(wem_and(c, r), 0.7, 1e-12);
}

TEST(WemAnd, RandomInputsMatchOracleAndStayInBounds) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1), r(-60, -0.1);
  std::uniform_int_distribution<int> n(1, 9);
  for (int t = 0; t < 10000; ++t) {
    std::vector<double> c(static_cast<std::size_t>(n(rng)));
    for (auto& v : c) v = u(rng);
    const double rr = r(rng);
    const double got = wem_and(c, rr);
    EXPECT_GE(got, *std::min_element(c.begin(), c.end()));
    EXPECT_LE(got, *std::max_element(c.begin(), c.end()));
    std::vector<long double> cl(c.begin(), c.end());
    EXPECT_NEAR(got, static_cast<double>(oracle_and(cl, rr)), 1e-9);
  }
}

TEST(WemAnd, RejectsBadInput) {
  const double c[1] = {0.5};
  EXPECT_THROW(wem_and(c, 1.0), ContractViolation);
  EXPECT_THROW(wem_and(std::span<const double>(), -1.0), ContractViolation);
}

TEST(WemOr, PointValueAgainstOracle) {
  const double c[2] = {0, 1};
  const double w[2] = {0.5, 0.5};
  EXPECT_NEAR(wem_or(c, w, 5.4), 0.8724, 1e-4);
  EXPECT_NEAR(wem_or(c, w, 5.4), static_cast<double>(oracle_or({0, 1}, {0.5, 0.5}, 5.4)), 1e-12);
}

TEST(WemOr, SingleConditionIsUnchanged) {
  const double c[1] = {0.3141};
  const double w[1] = {1.0};
  EXPECT_NEAR(wem_or(c, w, 5.4), 0.3141, 1e-15);
}

TEST(WemOr, RandomInputsMatchOracleAndStayInBounds) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1), r(0.1, 60);
  std::uniform_int_distribution<int> n(1, 9);
  for (int t = 0; t < 10000; ++t) {
    const auto k = static_cast<std::size_t>(n(rng));
    std::vector<double> c(k), w(k);
    double sum = 0;
    for (std::size_t i = 0; i < k; ++i) {
      c[i] = u(rng);
      w[i] = u(rng) + 1e-3;
      sum += w[i];
    }
    for (auto& v : w) v /= sum;
    const double rr = r(rng);
    const double got = wem_or(c, w, rr);
    EXPECT_GE(got, *std::min_element(c.begin(), c.end()));
    EXPECT_LE(got, *std::max_element(c.begin(), c.end()));
    EXPECT_NEAR(got,
                static_cast<double>(oracle_or({c.begin(), c.end()}, {w.begin(), w.end()}, rr)),
                1e-9);
    std::vector<double> same(k, c[0]);
    EXPECT_NEAR(wem_or(same, w, rr), c[0], 1e-12);
  }
}

TEST(WemOr, TugWeightsAreAccepted) {
  const std::vector<double> w{0.1799, 0.1035, 0.1089, 0.2242, 0.3835};
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
  EXPECT_NO_THROW(validate_simplex(w));
  const std::vector<double> c{0.1, 0.2, 0.3, 0.4, 0.5};
  EXPECT_NO_THROW(wem_or(c, w, 5.4));
}

TEST(WemOr, OffSimplexWeightsThrow) {
  const double c[2] = {0, 1};
  const double heavy[2] = {0.6, 0.6};
  const double negative[2] = {1.2, -0.2};
  EXPECT_THROW(wem_or(c, heavy, 5.4), ContractViolation);
  EXPECT_THROW(wem_or(c, negative, 5.4), ContractViolation);
  EXPECT_THROW(wem_or(c, heavy, -1.0), ContractViolation);
}

cart::ClassRule tug_like_rule() {
  cart::ClassRule r;
  r.label = "Tug";
  r.conditions.push_back({{{5, cart::Op::kLessEqual, 27.5}, {6, cart::Op::kGreater, 3.75}}});
  r.conditions.push_back({{{5, cart::Op::kLessEqual, 57.5}, {5, cart::Op::kGreater, 27.5}}});
  return r;
}

TEST(CrispRule, FiresWhenOneConditionHolds) {
  const auto rule = tug_like_rule();
  EXPECT_TRUE(eval_rule_crisp(rule, AisVector{0, 0, 0, 0, 0, 20, 4}));
  EXPECT_TRUE(eval_rule_crisp(rule, AisVector{0, 0, 0, 0, 0, 40, 1}));
  EXPECT_FALSE(eval_rule_crisp(rule, AisVector{0, 0, 0, 0, 0, 20, 3}));
  EXPECT_FALSE(eval_rule_crisp(rule, AisVector{0, 0, 0, 0, 0, 60, 9}));
}

TEST(FuzzyRule, AllMembershipsAtCentreGiveHalf) {
  cart::ClassRule r;
  r.conditions.push_back({{{0, cart::Op::kLessEqual, 1.0}, {1, cart::Op::kGreater, 2.0}}});
  r.conditions.push_back({{{2, cart::Op::kGreater, 3.0}}});
  const AisVector x{1, 2, 3, 0, 0, 0, 0};
  const double w[2] = {0.3, 0.7};
  const double s[3] = {1, 2, 3};
  EXPECT_NEAR(eval_rule_fuzzy(r, x, w, s, -5.4, 5.4), 0.5, 1e-12);
}

TEST(FuzzyRule, SingleComparisonEqualsMembership) {
  cart::ClassRule r;
  r.conditions.push_back({{{6, cart::Op::kGreater, 3.75}}});
  const AisVector x{0, 0, 0, 0, 0, 0, 4.2};
  const double w[1] = {1.0};
  const double s[1] = {2.5};
  EXPECT_NEAR(eval_rule_fuzzy(r, x, w, s, -5.4, 5.4), membership_gt(4.2, 2.5, 3.75), 1e-15);
}

TEST(FuzzyRule, EmptyRuleScoresZero) {
  EXPECT_EQ(eval_rule_fuzzy(cart::ClassRule{}, AisVector{}, {}, {}, -5.4, 5.4), 0.0);
}

// With slope 200, r = +-50 and every value at least 0.1 from each threshold,
// a comparison is within 2e-9 of crisp. The conjunction of n comparisons
// with one failing is bounded by ln(n) / 50, the disjunction of a firing
// condition with weight w is at least 1 + ln(w) / 50.
TEST(FuzzyRule, CrispLimitWithinAnalyticBound) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 100);
  const auto rule = tug_like_rule();
  const double w[2] = {0.5, 0.5};
  const std::vector<double> s(rule.comparison_count(), 200.0);
  const double bound = std::max(std::log(2.0), -std::log(0.5)) / 50.0 + 1e-6;
  int checked = 0;
  while (checked < 5000) {
    AisVector x{};
    x[5] = u(rng);
    x[6] = u(rng) / 10;
    if (std::abs(x[5] - 27.5) < 0.1 || std::abs(x[5] - 57.5) < 0.1 || std::abs(x[6] - 3.75) < 0.1) {
      continue;
    }
    const double crisp = eval_rule_crisp(rule, x) ? 1.0 : 0.0;
    EXPECT_LE(std::abs(eval_rule_fuzzy(rule, x, w, s, -50, 50) - crisp), bound);
    ++checked;
  }
}

TEST(FuzzyRule, CrispLimitSingleComparisonWithinOnePercent) {
  cart::ClassRule r;
  r.conditions.push_back({{{0, cart::Op::kGreater, 10.0}}});
  const double w[1] = {1.0};
  const double s[1] = {200.0};
  for (double x0 : {9.9, 9.0, 0.0, 10.1, 11.0, 50.0}) {
    const AisVector x{x0, 0, 0, 0, 0, 0, 0};
    const double crisp = eval_rule_crisp(r, x) ? 1.0 : 0.0;
    EXPECT_LT(std::abs(eval_rule_fuzzy(r, x, w, s, -50, 50) - crisp), 0.01);
  }
}

TEST(NormalizeL1, Examples) {
  const double a[3] = {1, 1, 2};
  EXPECT_EQ(normalize_scores_l1(a).values, (std::vector<double>{0.25, 0.25, 0.5}));
  const double onehot[3] = {0, 1, 0};
  EXPECT_EQ(normalize_scores_l1(onehot).values, (std::vector<double>{0, 1, 0}));
  const double zero[2] = {0, 0};
  const auto z = normalize_scores_l1(zero);
  EXPECT_TRUE(z.degenerate);
  EXPECT_EQ(z.values, (std::vector<double>{0.5, 0.5}));
}

TEST(NormalizeL1, ArgmaxIsPreserved) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 3);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> s(5);
    for (auto& v : s) v = u(rng);
    const auto n = normalize_scores_l1(s).values;
    EXPECT_EQ(std::max_element(s.begin(), s.end()) - s.begin(),
              std::max_element(n.begin(), n.end()) - n.begin());
  }
}

TEST(FuzzyRuleSet, UniformWeightsAndValidation) {
  cart::RuleSet rs;
  rs.feature_names = cart::ais_feature_names();
  rs.rules = {tug_like_rule(), cart::ClassRule{"Cargo", {{{{5, cart::Op::kGreater, 100}}}}}};
  auto frs = FuzzyRuleSet::uniform(rs, 1.0, -5.4, 5.4);
  EXPECT_EQ(frs.weights[0], (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(frs.slope_offset(1), 4u);
  EXPECT_NO_THROW(frs.validate());
  const auto scores = frs.scores(AisVector{0, 0, 0, 0, 0, 150, 9});
  EXPECT_GT(scores[1], scores[0]);
  frs.weights[0] = {0.9, 0.9};
  EXPECT_THROW(frs.validate(), ContractViolation);
  const auto j = to_json(FuzzyRuleSet::uniform(rs, 1.0, -5.4, 5.4));
  EXPECT_EQ(j["classes"][0]["conditions"][0]["comparisons"][1]["slope_id"], "s1_2");
  EXPECT_NE(render_fuzzy_rule(frs, 0).find("f<=(length; s11, 27.5)"), std::string::npos);
}

TEST(RuleLayout, RangesCoverComparisons) {
  cart::RuleSet rs;
  rs.rules = {tug_like_rule(), cart::ClassRule{"Empty", {}}};
  const auto layout = RuleLayout::from(rs);
  EXPECT_EQ(layout.comparison_count(), 4u);
  EXPECT_EQ(layout.condition_count(), 2u);
  EXPECT_EQ(layout.rule[0].size(), 2u);
  EXPECT_EQ(layout.rule[1].size(), 0u);
  EXPECT_EQ(layout.condition[1].begin, 2u);
}

TEST(OrnessLabel, PresentationLabels) {
  EXPECT_EQ(orness_label(14), "very high");
  EXPECT_EQ(orness_label(-5.4), "high");
  EXPECT_EQ(orness_label(2.14), "medium high");
  EXPECT_EQ(orness_label(3), "r=3");
}

}  // namespace
}  // namespace nfship::fuzzy
