#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfship/ad/tape.hpp"
#include "nfship/cart.hpp"
#include "nfship/data_model.hpp"
#include "nfship/fuzzy.hpp"
#include "nfship/model/layers.hpp"
#include "nfship/training.hpp"

namespace nfship::model {

enum class SlopeMode {
  kPerSample,  // slopes predicted from the image feature of each sample
  kGlobal,     // one free slope per comparison, no image branch
};

enum class SlopeActivation {
  kLeakyRelu,  // slopes may turn negative
  kSoftplus,   // slopes forced positive
};

std::string to_string(SlopeMode mode);
SlopeMode parse_slope_mode(const std::string& text);

struct NeuroFuzzyConfig {
  BranchConfig branch;
  std::size_t a2_width = 256;
  // Width of the slope head. 0 takes the rule set's comparison count; any
  // other value must equal it.
  std::size_t o1_width = 0;
  double dropout = 0.5;
  double leaky_slope = 0.01;
  double r_and = -fuzzy::kDefaultOrness;
  double r_or = fuzzy::kDefaultOrness;
  SlopeMode slope_mode = SlopeMode::kPerSample;
  SlopeActivation slope_activation = SlopeActivation::kLeakyRelu;
  double initial_slope = 1.0;  // starting value of free slopes (global mode)
  // Constant slope for every comparison, bypassing the slope head.
  std::optional<double> slope_override;
  TrainOptions train;

  void validate() const;
};

nlohmann::json to_json(const NeuroFuzzyConfig& cfg);
NeuroFuzzyConfig neurofuzzy_config_from_json(const nlohmann::json& j);
// FNV-1a of the canonical config JSON.
std::string config_hash(const nlohmann::json& config);

struct ComparisonTrace {
  std::string feature;
  cart::Op op = cart::Op::kGreater;
  double threshold = 0.0;
  double value = 0.0;
  double slope = 0.0;
  double membership = 0.0;
};

struct ConditionTrace {
  std::string tag;  // (a), (b), ...
  double weight = 0.0;
  double degree = 0.0;
  std::vector<ComparisonTrace> comparisons;
};

// How the winning class's rule fired for one sample.
struct Explanation {
  std::string label;
  double score = 0.0;  // R of the winning rule
  std::vector<ConditionTrace> conditions;

  std::string render() const;
  nlohmann::json to_json() const;
};

struct Prediction {
  int label = 0;
  std::vector<double> probabilities;  // softmax over rule scores
  std::vector<double> scores;         // rule scores R_i
  Explanation explanation;
};

template <typename T>
class NeuroFuzzyModelT {
 public:
  using Scalar = T;

  struct Outputs {
    ad::Var slopes;      // [B, K] or [K]
    ad::Var conditions;  // [B, conditions]
    ad::Var scores;      // [B, m] rule scores R
  };

  NeuroFuzzyModelT(cart::RuleSet rules, NeuroFuzzyConfig cfg);

  const cart::RuleSet& rules() const { return rules_; }
  const fuzzy::RuleLayout& layout() const { return layout_; }
  const NeuroFuzzyConfig& config() const { return cfg_; }
  ad::ParamStore<T>& store() { return store_; }
  const ad::ParamStore<T>& store() const { return store_; }
  std::size_t num_classes() const { return rules_.rules.size(); }
  std::size_t comparison_count() const { return layout_.comparison_count(); }

  bool needs_features() const;
  // Model kind written to checkpoints: "neurofuzzy" or "global-slopes".
  std::string kind() const;

  Outputs forward(ad::Tape<T>& tape, const Batch<T>& batch, const ad::Mode& mode);
  ad::Var loss(ad::Tape<T>& tape, const Batch<T>& batch, const ad::Mode& mode);
  void after_step() {}

  // Effective disjunction weights, one simplex vector per rule.
  std::vector<std::vector<double>> disjunction_weights() const;

  // Eval-mode rule scores R [rows, m] and softmax probabilities.
  std::vector<std::vector<double>> scores(const data::Dataset& ds,
                                          std::span<const std::size_t> rows);
  std::vector<std::vector<double>> probabilities(const data::Dataset& ds,
                                                 std::span<const std::size_t> rows);
  std::vector<int> classify(const data::Dataset& ds);

  Prediction predict(const data::Dataset& ds, std::size_t row);

  TrainResult train(const data::Dataset& ds, const StepCallback& on_step = {});

  nlohmann::json manifest() const;
  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static NeuroFuzzyModelT load(const std::filesystem::path& path);

 private:
  ad::Var slopes(ad::Tape<T>& tape, const Batch<T>& batch, const ad::Mode& mode);

  cart::RuleSet rules_;
  NeuroFuzzyConfig cfg_;
  fuzzy::RuleLayout layout_;
  ad::ParamStore<T> store_;
};

extern template class NeuroFuzzyModelT<float>;
extern template class NeuroFuzzyModelT<double>;

using NeuroFuzzyModel = NeuroFuzzyModelT<float>;

}  // namespace nfship::model
