#include "nfship/fuzzy.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>

#include "nfship/log.hpp"

namespace nfship::fuzzy {

double membership_gt(double x, double s, double v) { return detail::sigmoid(s * (x - v)); }

double membership_le(double x, double s, double v) { return detail::sigmoid(s * (v - x)); }

double membership(cart::Op op, double x, double s, double v) {
  return op == cart::Op::kGreater ? membership_gt(x, s, v) : membership_le(x, s, v);
}

double wem_and(std::span<const double> c, double r_and) {
  if (c.empty()) throw ContractViolation("wem_and needs at least one input");
  if (!(r_and < 0.0)) throw ContractViolation("wem_and needs a negative andness level");
  return std::clamp(detail::wem_mean(c, r_and), *std::min_element(c.begin(), c.end()),
                    *std::max_element(c.begin(), c.end()));
}

void validate_simplex(std::span<const double> w, double tol) {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= -tol && v <= 1.0 + tol)) {
      throw ContractViolation("weight " + std::to_string(v) + " lies outside [0, 1]");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol) {
    throw ContractViolation("weights sum to " + std::to_string(sum) + ", not 1");
  }
}

double wem_or(std::span<const double> c, std::span<const double> w, double r_or) {
  if (c.empty() || c.size() != w.size()) {
    throw ContractViolation("wem_or needs one weight per input");
  }
  if (!(r_or > 0.0)) throw ContractViolation("wem_or needs a positive orness level");
  validate_simplex(w);
  return std::clamp(detail::wem_weighted(c, w, r_or), *std::min_element(c.begin(), c.end()),
                    *std::max_element(c.begin(), c.end()));
}

bool eval_rule_crisp(const cart::ClassRule& rule, std::span<const double> x) {
  return std::any_of(rule.conditions.begin(), rule.conditions.end(), [&](const auto& cond) {
    return std::all_of(cond.comparisons.begin(), cond.comparisons.end(),
                       [&](const cart::Comparison& c) { return c.holds(x[c.feature]); });
  });
}

double eval_rule_fuzzy(const cart::ClassRule& rule, std::span<const double> x,
                       std::span<const double> weights, std::span<const double> slopes,
                       double r_and, double r_or) {
  if (rule.conditions.empty()) return 0.0;
  if (slopes.size() != rule.comparison_count()) {
    throw ContractViolation("rule has " + std::to_string(rule.comparison_count()) +
                            " comparisons but " + std::to_string(slopes.size()) +
                            " slopes were given");
  }
  std::vector<double> degrees;
  degrees.reserve(rule.conditions.size());
  std::vector<double> memberships;
  std::size_t k = 0;
  for (const auto& cond : rule.conditions) {
    memberships.clear();
    for (const auto& cmp : cond.comparisons) {
      memberships.push_back(membership(cmp.op, x[cmp.feature], slopes[k++], cmp.threshold));
    }
    degrees.push_back(memberships.empty() ? 1.0 : wem_and(memberships, r_and));
  }
  return wem_or(degrees, weights, r_or);
}

NormalizedScores normalize_scores_l1(std::span<const double> scores) {
  NormalizedScores out;
  double sum = 0.0;
  for (double s : scores) {
    if (s < 0.0) throw ContractViolation("L1 normalisation expects non-negative scores");
    sum += s;
  }
  if (sum <= 0.0) {
    out.degenerate = true;
    out.values.assign(scores.size(), 1.0 / static_cast<double>(scores.size()));
    log::warn("all rule scores are zero; returning a uniform distribution");
    return out;
  }
  out.values.reserve(scores.size());
  for (double s : scores) out.values.push_back(s / sum);
  return out;
}

FuzzyRuleSet FuzzyRuleSet::uniform(cart::RuleSet rules, double slope, double r_and, double r_or) {
  FuzzyRuleSet frs;
  for (const auto& r : rules.rules) {
    const auto n = r.conditions.size();
    frs.weights.emplace_back(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
  }
  frs.slopes.assign(rules.comparison_count(), slope);
  frs.rules = std::move(rules);
  frs.r_and = r_and;
  frs.r_or = r_or;
  return frs;
}

void FuzzyRuleSet::validate() const {
  if (weights.size() != rules.rules.size()) {
    throw ContractViolation("one weight vector per rule is required");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].size() != rules.rules[i].conditions.size()) {
      throw ContractViolation("rule '" + rules.rules[i].label + "' needs one weight per condition");
    }
    if (!weights[i].empty()) validate_simplex(weights[i]);
  }
  if (slopes.size() != rules.comparison_count()) {
    throw ContractViolation("slope count " + std::to_string(slopes.size()) +
                            " differs from comparison count " +
                            std::to_string(rules.comparison_count()));
  }
  if (!(r_and < 0.0) || !(r_or > 0.0)) {
    throw ContractViolation("andness must be negative and orness positive");
  }
}

std::size_t FuzzyRuleSet::slope_offset(std::size_t rule) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < rule; ++i) off += rules.rules[i].comparison_count();
  return off;
}

std::vector<double> FuzzyRuleSet::scores(std::span<const double> x) const {
  std::vector<double> out;
  out.reserve(rules.rules.size());
  std::size_t off = 0;
  for (std::size_t i = 0; i < rules.rules.size(); ++i) {
    const auto& rule = rules.rules[i];
    const auto k = rule.comparison_count();
    out.push_back(eval_rule_fuzzy(rule, x, weights[i],
                                  std::span<const double>(slopes).subspan(off, k), r_and, r_or));
    off += k;
  }
  return out;
}

nlohmann::json to_json(const FuzzyRuleSet& frs) {
  using nlohmann::json;
  json classes = json::array();
  std::size_t off = 0;
  for (std::size_t i = 0; i < frs.rules.rules.size(); ++i) {
    const auto& rule = frs.rules.rules[i];
    json conds = json::array();
    for (std::size_t j = 0; j < rule.conditions.size(); ++j) {
      json comps = json::array();
      for (std::size_t k = 0; k < rule.conditions[j].comparisons.size(); ++k) {
        const auto& cmp = rule.conditions[j].comparisons[k];
        comps.push_back(
            {{"feature", cmp.feature < frs.rules.feature_names.size()
                             ? frs.rules.feature_names[cmp.feature]
                             : std::string()},
             {"feature_index", cmp.feature},
             {"membership", cmp.op == cart::Op::kGreater ? "f>" : "f<="},
             {"slope_id", "s" + std::to_string(j + 1) + "_" + std::to_string(k + 1)},
             {"slope", off < frs.slopes.size() ? frs.slopes[off] : 0.0},
             {"threshold", cmp.threshold}});
        ++off;
      }
      conds.push_back({{"weight", frs.weights[i][j]}, {"comparisons", std::move(comps)}});
    }
    classes.push_back({{"class", rule.label}, {"conditions", std::move(conds)}});
  }
  return {{"format", "nfship-fuzzy-rules"},
          {"version", 1},
          {"r_and", frs.r_and},
          {"r_or", frs.r_or},
          {"features", frs.rules.feature_names},
          {"classes", std::move(classes)}};
}

std::string render_fuzzy_rule(const FuzzyRuleSet& frs, std::size_t rule_index) {
  const auto& rule = frs.rules.rules.at(rule_index);
  const auto& names = frs.rules.feature_names;
  std::ostringstream os;
  os << "R_" << rule.label << " = max'{";
  for (std::size_t j = 0; j < rule.conditions.size(); ++j) {
    os << (j == 0 ? "\n  " : ",\n  ");
    os << std::fixed << std::setprecision(4) << frs.weights[rule_index][j] << " min'{";
    os.unsetf(std::ios::floatfield);
    os << std::setprecision(6);
    const auto& comps = rule.conditions[j].comparisons;
    for (std::size_t k = 0; k < comps.size(); ++k) {
      if (k > 0) os << ", ";
      const auto& c = comps[k];
      os << (c.op == cart::Op::kGreater ? "f>(" : "f<=(")
         << (c.feature < names.size() ? names[c.feature] : "x" + std::to_string(c.feature))
         << "; s" << j + 1 << k + 1 << ", " << c.threshold << ')';
    }
    os << '}';
  }
  os << "\n}";
  return os.str();
}

RuleLayout RuleLayout::from(const cart::RuleSet& rules) {
  RuleLayout layout;
  for (const auto& rule : rules.rules) {
    Range rr{layout.condition.size(), layout.condition.size()};
    for (const auto& cond : rule.conditions) {
      Range cr{layout.feature.size(), layout.feature.size()};
      for (const auto& cmp : cond.comparisons) {
        layout.feature.push_back(cmp.feature);
        layout.op.push_back(cmp.op);
        layout.threshold.push_back(cmp.threshold);
      }
      cr.end = layout.feature.size();
      layout.condition.push_back(cr);
    }
    rr.end = layout.condition.size();
    layout.rule.push_back(rr);
  }
  return layout;
}

std::string orness_label(double r) {
  const double a = std::abs(r);
  if (std::abs(a - 14.0) < 1e-9) return "very high";
  if (std::abs(a - 5.4) < 1e-9) return "high";
  if (std::abs(a - 2.14) < 1e-9) return "medium high";
  std::ostringstream os;
  os << "r=" << a;
  return os.str();
}

}  // namespace nfship::fuzzy
