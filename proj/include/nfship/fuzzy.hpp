#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfship/cart.hpp"

namespace nfship::fuzzy {

// Sigmoid arguments are clamped to this magnitude before exponentiation.
inline constexpr double kSigmoidClamp = 500.0;
inline constexpr double kSimplexTolerance = 1e-6;

// Default andness/orness levels: conjunction uses -r, disjunction +r.
inline constexpr double kDefaultOrness = 5.4;

namespace detail {

template <typename T>
T sigmoid(T z) {
  z = std::clamp(z, static_cast<T>(-kSigmoidClamp), static_cast<T>(kSigmoidClamp));
  if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
  const T e = std::exp(z);
  return e / (T(1) + e);
}

// Signed distance that the sigmoid scales for a comparison: x - v for '>',
// v - x for '<='.
template <typename T>
T comparison_offset(cart::Op op, T x, T v) {
  return op == cart::Op::kGreater ? x - v : v - x;
}

// (1/r) ln((1/n) sum e^{r c_i}) with the largest exponent shifted out.
template <typename T>
T wem_mean(std::span<const T> c, T r) {
  T peak = r * c[0];
  for (T v : c) peak = std::max(peak, r * v);
  T sum = 0;
  for (T v : c) sum += std::exp(r * v - peak);
  return (peak + std::log(sum / static_cast<T>(c.size()))) / r;
}

// (1/r) ln(sum w_i e^{r c_i}), shifted over terms with non-zero weight.
template <typename T>
T wem_weighted(std::span<const T> c, std::span<const T> w, T r) {
  T peak = -std::numeric_limits<T>::infinity();
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (w[i] > T(0)) peak = std::max(peak, r * c[i]);
  }
  T sum = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (w[i] > T(0)) sum += w[i] * std::exp(r * c[i] - peak);
  }
  return (peak + std::log(sum)) / r;
}

}  // namespace detail

// 1 / (1 + e^{-s(x - v)})
double membership_gt(double x, double s, double v);
// 1 / (1 + e^{-s(v - x)})
double membership_le(double x, double s, double v);
double membership(cart::Op op, double x, double s, double v);

// Weighted-exponential-mean conjunction; requires r_and < 0 and non-empty c.
double wem_and(std::span<const double> c, double r_and);

// Weighted-exponential-mean disjunction over simplex weights; requires
// r_or > 0. Weights off the simplex by more than 1e-6 throw
// ContractViolation.
double wem_or(std::span<const double> c, std::span<const double> w, double r_or);

void validate_simplex(std::span<const double> w, double tol = kSimplexTolerance);

bool eval_rule_crisp(const cart::ClassRule& rule, std::span<const double> x);

// Truth degree of a rule: wem_or over conditions of wem_and over sigmoid
// memberships. `slopes` lists one slope per comparison in rule order.
double eval_rule_fuzzy(const cart::ClassRule& rule, std::span<const double> x,
                       std::span<const double> weights, std::span<const double> slopes,
                       double r_and, double r_or);

struct NormalizedScores {
  std::vector<double> values;
  bool degenerate = false;  // all inputs were zero; uniform returned
};

NormalizedScores normalize_scores_l1(std::span<const double> scores);

// Rules plus per-condition weights W, per-comparison slopes S and the
// andness/orness levels.
struct FuzzyRuleSet {
  cart::RuleSet rules;
  std::vector<std::vector<double>> weights;  // weights[i][j] for rule i condition j
  std::vector<double> slopes;                // flattened over rules, conditions, comparisons
  double r_and = -kDefaultOrness;
  double r_or = kDefaultOrness;

  // Uniform weights and constant slopes.
  static FuzzyRuleSet uniform(cart::RuleSet rules, double slope, double r_and, double r_or);

  void validate() const;
  // Offset of rule i's first slope in `slopes`.
  std::size_t slope_offset(std::size_t rule) const;
  std::vector<double> scores(std::span<const double> x) const;
};

nlohmann::json to_json(const FuzzyRuleSet& frs);

// Table-style rendering of one fuzzified rule, e.g.
//   R_Tug = max'{ 0.1799 min'{ f<=(l; s11, 27.5), ... }, ... }
std::string render_fuzzy_rule(const FuzzyRuleSet& frs, std::size_t rule);

// Flattened view of a RuleSet for vectorised evaluation: comparisons in
// rule/condition order, with [begin, end) ranges for conditions and rules.
struct RuleLayout {
  struct Range {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
  };

  std::vector<std::size_t> feature;
  std::vector<cart::Op> op;
  std::vector<double> threshold;
  std::vector<Range> condition;  // into comparisons
  std::vector<Range> rule;       // into conditions

  static RuleLayout from(const cart::RuleSet& rules);

  std::size_t comparison_count() const { return feature.size(); }
  std::size_t condition_count() const { return condition.size(); }
  std::size_t rule_count() const { return rule.size(); }
};

// Presentation label for an orness magnitude.
std::string orness_label(double r);

}  // namespace nfship::fuzzy
