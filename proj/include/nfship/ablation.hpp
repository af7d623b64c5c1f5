#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfship/cart.hpp"
#include "nfship/data_model.hpp"
#include "nfship/neurofuzzy.hpp"

namespace nfship::pipeline {

struct RuleFit {
  std::vector<cart::Tree> trees;
  cart::RuleSet rules;
  std::vector<std::string> warnings;
};

// One-vs-all trees on the distinct vessels of `train` (one AIS vector per
// MMSI), then rule extraction with the dataset's label names.
RuleFit fit_rules(const data::Dataset& train, const cart::CartParams& params);

nlohmann::json to_json(const RuleFit& fit, const cart::CartParams& params);
RuleFit rule_fit_from_json(const nlohmann::json& j);

struct AblationOptions {
  std::vector<std::size_t> depths{4, 6, 8, 10};
  std::vector<double> orness{14.0, 5.4, 2.14};
  cart::CartParams cart;
  model::NeuroFuzzyConfig model;  // r levels are overridden per cell
};

struct AblationCell {
  std::size_t depth = 0;
  double r = 0.0;
  std::string label;  // orness label of r
  std::uint64_t seed = 0;
  std::size_t comparisons = 0;
  std::size_t conditions = 0;
  std::optional<double> macro_f1;
  std::vector<double> epoch_loss;
  std::string error;  // set when the cell failed
};

struct AblationReport {
  std::vector<AblationCell> cells;  // depth-major, in option order
  std::uint64_t seed = 0;
  std::string config_hash;

  const AblationCell& at(std::size_t depth, double r) const;
  nlohmann::json to_json() const;
  // Rows per orness level with one column per depth, then the comparison
  // and condition counts.
  std::string render() const;
};

// Runs every (D, r) cell: fit trees at depth D, extract rules, train the
// neuro-fuzzy model with r_and = -r and r_or = r, and score macro F1 on
// `test`. A failing cell records its error and the sweep continues.
AblationReport ablation_sweep(const data::Dataset& train, const data::Dataset& test,
                              const AblationOptions& options);

}  // namespace nfship::pipeline
