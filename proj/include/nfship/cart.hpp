#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfship/common.hpp"

namespace nfship::cart {

struct CartParams {
  std::size_t max_depth = 6;
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 5;

  void validate() const;
};

// Flat binary tree. Internal nodes route x[feature] <= threshold to `left`.
struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double positive_fraction = 0.0;
  std::size_t sample_count = 0;
  std::size_t depth = 0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t depth() const;
  std::size_t leaf_count() const;
};

struct TreePrediction {
  bool positive = false;
  double positive_fraction = 0.0;
};

using Matrix = std::vector<std::vector<double>>;

// Candidate split considered at a node, exposed for audits of split choice.
struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

double gini(std::size_t positives, std::size_t total);

// Every admissible (feature, midpoint) candidate at a node holding `rows`,
// ordered by feature then threshold.
std::vector<SplitCandidate> enumerate_splits(const Matrix& X, std::span<const std::uint8_t> y,
                                             std::span<const std::size_t> rows,
                                             std::size_t min_samples_leaf);

// Greedy Gini CART for a binary target. Ties in gain resolve to the lowest
// feature index, then the lowest threshold.
Tree fit_tree(const Matrix& X, std::span<const std::uint8_t> y, const CartParams& params);

TreePrediction predict_tree(const Tree& tree, std::span<const double> x);

// One tree per class, class i positive and all others negative.
std::vector<Tree> fit_one_vs_all(const Matrix& X, std::span<const int> y, std::size_t num_classes,
                                 const CartParams& params);

enum class Op { kGreater, kLessEqual };

struct Comparison {
  std::size_t feature = 0;
  Op op = Op::kLessEqual;
  double threshold = 0.0;

  bool holds(double x) const { return op == Op::kGreater ? x > threshold : x <= threshold; }
};

// Conjunction of comparisons along one root-to-leaf path.
struct Condition {
  std::vector<Comparison> comparisons;
};

struct ClassRule {
  std::string label;
  std::vector<Condition> conditions;  // disjunction

  std::size_t comparison_count() const;
};

struct RuleSet {
  std::vector<std::string> feature_names;
  std::vector<ClassRule> rules;  // one per class, indexed by class

  std::size_t comparison_count() const;
  std::size_t condition_count() const;
};

struct ExtractResult {
  RuleSet rules;
  std::vector<std::string> warnings;
};

// One condition per leaf with positive_fraction > 0.5, in left-to-right leaf
// order, comparisons in root-to-leaf order.
ExtractResult extract_rules(std::span<const Tree> trees, std::span<const std::string> class_names,
                            std::span<const std::string> feature_names);

struct ConditionStats {
  std::size_t covered = 0;
  std::size_t true_positives = 0;
  std::optional<double> precision;  // empty when nothing is covered
};

// Crisp coverage and precision (TP / covered) of each condition of `rule`,
// treating rows labelled `positive_label` as positives.
std::vector<ConditionStats> rule_stats(const ClassRule& rule, const std::vector<AisVector>& X,
                                       std::span<const int> y, int positive_label);

std::string to_string(Op op);
std::string render_condition(const Condition& c, std::span<const std::string> feature_names);
std::string render_rule(const ClassRule& rule, std::span<const std::string> feature_names);

// Short symbols used in the rule tables (l, w, d, te, to, tb, ts).
std::vector<std::string> ais_feature_names();
std::vector<std::string> ais_feature_symbols();

nlohmann::json to_json(const RuleSet& rules);
RuleSet rules_from_json(const nlohmann::json& j);

// Node list as compact arrays [feature, threshold, left, right,
// positive_fraction, sample_count, depth].
nlohmann::json to_json(const Tree& tree);
Tree tree_from_json(const nlohmann::json& j);

}  // namespace nfship::cart
