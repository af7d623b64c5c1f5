#include "nfship/cart.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "nfship/log.hpp"

namespace nfship::cart {
namespace {

constexpr double kGainTieTolerance = 1e-12;

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, std::span<const std::uint8_t> y, const CartParams& p)
      : X_(X), y_(y), p_(p) {}

  Tree build() {
    std::vector<std::size_t> rows(X_.size());
    std::iota(rows.begin(), rows.end(), 0);
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  int grow(const std::vector<std::size_t>& rows, std::size_t depth) {
    std::size_t positives = 0;
    for (auto r : rows) positives += y_[r] ? 1 : 0;
    const int id = static_cast<int>(tree_.nodes.size());
    TreeNode node;
    node.sample_count = rows.size();
    node.positive_fraction = static_cast<double>(positives) / static_cast<double>(rows.size());
    node.depth = depth;
    tree_.nodes.push_back(node);

    const bool pure = positives == 0 || positives == rows.size();
    if (pure || depth >= p_.max_depth || rows.size() < p_.min_samples_split) return id;

    const auto candidates = enumerate_splits(X_, y_, rows, p_.min_samples_leaf);
    if (candidates.empty()) return id;
    const SplitCandidate* best = &candidates.front();
    for (const auto& c : candidates) {
      if (c.gain > best->gain + kGainTieTolerance) best = &c;
    }

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (X_[r][static_cast<std::size_t>(best->feature)] <= best->threshold ? left : right).push_back(r);
    }
    tree_.nodes[id].feature = best->feature;
    tree_.nodes[id].threshold = best->threshold;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  const Matrix& X_;
  std::span<const std::uint8_t> y_;
  const CartParams& p_;
  Tree tree_;
};

void render_comparison(std::ostream& os, const Comparison& c,
                       std::span<const std::string> names) {
  const std::string name = c.feature < names.size() ? names[c.feature]
                                                     : "x" + std::to_string(c.feature);
  os << name << ' ' << to_string(c.op) << ' ' << c.threshold;
}

}  // namespace

void CartParams::validate() const {
  if (max_depth < 1) throw std::invalid_argument("max_depth must be >= 1");
  if (min_samples_leaf < 1) throw std::invalid_argument("min_samples_leaf must be >= 1");
}

std::size_t Tree::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

double gini(std::size_t positives, std::size_t total) {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(positives) / static_cast<double>(total);
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

std::vector<SplitCandidate> enumerate_splits(const Matrix& X, std::span<const std::uint8_t> y,
                                             std::span<const std::size_t> rows,
                                             std::size_t min_samples_leaf) {
  std::vector<SplitCandidate> out;
  if (rows.empty()) return out;
  const std::size_t n = rows.size();
  const std::size_t d = X[rows[0]].size();
  std::size_t total_pos = 0;
  for (auto r : rows) total_pos += y[r] ? 1 : 0;
  const double parent = gini(total_pos, n);

  std::vector<std::size_t> order(rows.begin(), rows.end());
  for (std::size_t f = 0; f < d; ++f) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return X[a][f] < X[b][f]; });
    std::size_t left_pos = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_pos += y[order[i]] ? 1 : 0;
      const double lo = X[order[i]][f];
      const double hi = X[order[i + 1]][f];
      if (!(lo < hi)) continue;
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
      const double child = (static_cast<double>(nl) * gini(left_pos, nl) +
                            static_cast<double>(nr) * gini(total_pos - left_pos, nr)) /
                           static_cast<double>(n);
      out.push_back({static_cast<int>(f), lo + (hi - lo) / 2.0, parent - child});
    }
  }
  return out;
}

Tree fit_tree(const Matrix& X, std::span<const std::uint8_t> y, const CartParams& params) {
  params.validate();
  if (X.empty() || X.size() != y.size()) {
    throw std::invalid_argument("fit_tree needs a non-empty X with one label per row");
  }
  return TreeBuilder(X, y, params).build();
}

TreePrediction predict_tree(const Tree& tree, std::span<const double> x) {
  std::size_t id = 0;
  while (!tree.nodes[id].is_leaf()) {
    const auto& n = tree.nodes[id];
    id = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                       : n.right);
  }
  const double frac = tree.nodes[id].positive_fraction;
  return {frac > 0.5, frac};
}

std::vector<Tree> fit_one_vs_all(const Matrix& X, std::span<const int> y, std::size_t num_classes,
                                 const CartParams& params) {
  if (num_classes < 2) throw std::invalid_argument("one-vs-all needs at least two classes");
  if (X.size() != y.size()) throw std::invalid_argument("X and y lengths differ");
  std::vector<Tree> trees;
  trees.reserve(num_classes);
  std::vector<std::uint8_t> target(y.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t positives = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      target[i] = y[i] == static_cast<int>(c) ? 1 : 0;
      positives += target[i];
    }
    if (positives == 0) {
      throw std::invalid_argument("class " + std::to_string(c) +
                                  " has no training rows; its positive set is empty");
    }
    trees.push_back(fit_tree(X, target, params));
  }
  return trees;
}

std::size_t ClassRule::comparison_count() const {
  std::size_t n = 0;
  for (const auto& c : conditions) n += c.comparisons.size();
  return n;
}

std::size_t RuleSet::comparison_count() const {
  std::size_t n = 0;
  for (const auto& r : rules) n += r.comparison_count();
  return n;
}

std::size_t RuleSet::condition_count() const {
  std::size_t n = 0;
  for (const auto& r : rules) n += r.conditions.size();
  return n;
}

ExtractResult extract_rules(std::span<const Tree> trees, std::span<const std::string> class_names,
                            std::span<const std::string> feature_names) {
  if (trees.size() != class_names.size()) {
    throw std::invalid_argument("one class name per tree is required");
  }
  ExtractResult res;
  res.rules.feature_names.assign(feature_names.begin(), feature_names.end());
  for (std::size_t t = 0; t < trees.size(); ++t) {
    ClassRule rule;
    rule.label = class_names[t];
    const Tree& tree = trees[t];
    std::vector<Comparison> path;
    // Depth-first, left before right.
    auto walk = [&](auto&& self, std::size_t id) -> void {
      const auto& n = tree.nodes[id];
      if (n.is_leaf()) {
        if (n.positive_fraction > 0.5 && !path.empty()) {
          rule.conditions.push_back({path});
        } else if (n.positive_fraction > 0.5) {
          // Root leaf that is positive: the rule holds everywhere.
          rule.conditions.push_back({});
        }
        return;
      }
      const auto f = static_cast<std::size_t>(n.feature);
      path.push_back({f, Op::kLessEqual, n.threshold});
      self(self, static_cast<std::size_t>(n.left));
      path.back().op = Op::kGreater;
      self(self, static_cast<std::size_t>(n.right));
      path.pop_back();
    };
    walk(walk, 0);
    if (rule.conditions.empty()) {
      res.warnings.push_back("tree for class '" + rule.label +
                             "' has no positive leaves; its rule is empty");
      log::warn(res.warnings.back());
    }
    res.rules.rules.push_back(std::move(rule));
  }
  return res;
}

std::vector<ConditionStats> rule_stats(const ClassRule& rule, const std::vector<AisVector>& X,
                                       std::span<const int> y, int positive_label) {
  std::vector<ConditionStats> out(rule.conditions.size());
  for (std::size_t i = 0; i < X.size(); ++i) {
    for (std::size_t c = 0; c < rule.conditions.size(); ++c) {
      const auto& comps = rule.conditions[c].comparisons;
      const bool covered = std::all_of(comps.begin(), comps.end(), [&](const Comparison& cmp) {
        return cmp.holds(X[i][cmp.feature]);
      });
      if (!covered) continue;
      ++out[c].covered;
      if (y[i] == positive_label) ++out[c].true_positives;
    }
  }
  for (auto& s : out) {
    if (s.covered > 0) {
      s.precision = static_cast<double>(s.true_positives) / static_cast<double>(s.covered);
    }
  }
  return out;
}

std::string to_string(Op op) { return op == Op::kGreater ? ">" : "<="; }

std::string render_condition(const Condition& c, std::span<const std::string> feature_names) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < c.comparisons.size(); ++i) {
    if (i > 0) os << " AND ";
    render_comparison(os, c.comparisons[i], feature_names);
  }
  if (c.comparisons.empty()) os << "TRUE";
  os << ')';
  return os.str();
}

std::string render_rule(const ClassRule& rule, std::span<const std::string> feature_names) {
  std::ostringstream os;
  os << "IF ";
  if (rule.conditions.empty()) os << "FALSE";
  for (std::size_t i = 0; i < rule.conditions.size(); ++i) {
    if (i > 0) os << "\n   OR ";
    os << render_condition(rule.conditions[i], feature_names);
  }
  os << "\nTHEN " << rule.label;
  return os.str();
}

std::vector<std::string> ais_feature_names() {
  return {kAisFieldNames.begin(), kAisFieldNames.end()};
}

std::vector<std::string> ais_feature_symbols() {
  return {kAisFieldSymbols.begin(), kAisFieldSymbols.end()};
}

nlohmann::json to_json(const RuleSet& rules) {
  using nlohmann::json;
  json classes = json::array();
  for (std::size_t i = 0; i < rules.rules.size(); ++i) {
    const auto& r = rules.rules[i];
    json conds = json::array();
    for (const auto& c : r.conditions) {
      json comps = json::array();
      for (const auto& cmp : c.comparisons) {
        comps.push_back({{"feature", cmp.feature < rules.feature_names.size()
                                         ? rules.feature_names[cmp.feature]
                                         : std::string()},
                         {"feature_index", cmp.feature},
                         {"op", to_string(cmp.op)},
                         {"threshold", cmp.threshold}});
      }
      conds.push_back({{"comparisons", std::move(comps)}});
    }
    classes.push_back({{"class", r.label}, {"index", i}, {"conditions", std::move(conds)}});
  }
  return {{"format", "nfship-rules"},
          {"version", 1},
          {"features", rules.feature_names},
          {"comparison_count", rules.comparison_count()},
          {"condition_count", rules.condition_count()},
          {"classes", std::move(classes)}};
}

RuleSet rules_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "nfship-rules") throw FormatError("not an nfship rules document");
  if (j.value("version", -1) != 1) throw VersionError("unsupported rules version");
  RuleSet rs;
  rs.feature_names = j.at("features").get<std::vector<std::string>>();
  for (const auto& jc : j.at("classes")) {
    ClassRule rule;
    rule.label = jc.at("class").get<std::string>();
    for (const auto& jcond : jc.at("conditions")) {
      Condition cond;
      for (const auto& jcmp : jcond.at("comparisons")) {
        Comparison cmp;
        cmp.feature = jcmp.at("feature_index").get<std::size_t>();
        const auto op = jcmp.at("op").get<std::string>();
        if (op == ">") {
          cmp.op = Op::kGreater;
        } else if (op == "<=") {
          cmp.op = Op::kLessEqual;
        } else {
          throw FormatError("unknown comparison operator '" + op + "'");
        }
        cmp.threshold = jcmp.at("threshold").get<double>();
        cond.comparisons.push_back(cmp);
      }
      rule.conditions.push_back(std::move(cond));
    }
    rs.rules.push_back(std::move(rule));
  }
  return rs;
}

nlohmann::json to_json(const Tree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({n.feature, n.threshold, n.left, n.right, n.positive_fraction, n.sample_count,
                     n.depth});
  }
  return nodes;
}

Tree tree_from_json(const nlohmann::json& j) {
  Tree t;
  for (const auto& n : j) {
    if (!n.is_array() || n.size() != 7) throw FormatError("malformed tree node");
    TreeNode node;
    node.feature = n[0].get<int>();
    node.threshold = n[1].get<double>();
    node.left = n[2].get<int>();
    node.right = n[3].get<int>();
    node.positive_fraction = n[4].get<double>();
    node.sample_count = n[5].get<std::size_t>();
    node.depth = n[6].get<std::size_t>();
    t.nodes.push_back(node);
  }
  const auto count = static_cast<int>(t.nodes.size());
  if (count == 0) throw FormatError("tree has no nodes");
  for (const auto& node : t.nodes) {
    if (!node.is_leaf() && (node.left <= 0 || node.right <= 0 || node.left >= count ||
                            node.right >= count)) {
      throw FormatError("tree node links out of range");
    }
  }
  return t;
}

}  // namespace nfship::cart
