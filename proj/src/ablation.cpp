#include "nfship/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "nfship/evaluation.hpp"
#include "nfship/fuzzy.hpp"
#include "nfship/log.hpp"

namespace nfship::pipeline {

RuleFit fit_rules(const data::Dataset& train, const cart::CartParams& params) {
  const auto vessels = data::distinct_vessels(train);
  if (vessels.ais.empty()) throw EmptyDatasetError("cannot fit rules on an empty dataset");
  cart::Matrix X;
  X.reserve(vessels.ais.size());
  for (const auto& a : vessels.ais) X.emplace_back(a.begin(), a.end());
  RuleFit fit;
  fit.trees = cart::fit_one_vs_all(X, vessels.labels, train.num_classes(), params);
  auto extracted = cart::extract_rules(fit.trees, train.label_names, cart::ais_feature_names());
  fit.rules = std::move(extracted.rules);
  fit.warnings = std::move(extracted.warnings);
  for (const auto& w : fit.warnings) log::warn(w);
  return fit;
}

nlohmann::json to_json(const RuleFit& fit, const cart::CartParams& params) {
  auto j = cart::to_json(fit.rules);
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : fit.trees) trees.push_back(cart::to_json(t));
  j["trees"] = trees;
  j["cart"] = {{"max_depth", params.max_depth},
               {"min_samples_split", params.min_samples_split},
               {"min_samples_leaf", params.min_samples_leaf},
               {"criterion", "gini"}};
  j["warnings"] = fit.warnings;
  return j;
}

RuleFit rule_fit_from_json(const nlohmann::json& j) {
  RuleFit fit;
  fit.rules = cart::rules_from_json(j);
  if (j.contains("trees")) {
    for (const auto& t : j.at("trees")) fit.trees.push_back(cart::tree_from_json(t));
  }
  if (j.contains("warnings")) fit.warnings = j.at("warnings").get<std::vector<std::string>>();
  return fit;
}

const AblationCell& AblationReport::at(std::size_t depth, double r) const {
  for (const auto& c : cells) {
    if (c.depth == depth && std::abs(c.r - r) < 1e-12) return c;
  }
  throw std::out_of_range("no ablation cell for D=" + std::to_string(depth));
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json jc = nlohmann::json::array();
  for (const auto& c : cells) {
    jc.push_back({{"depth", c.depth},
                  {"r", c.r},
                  {"label", c.label},
                  {"seed", c.seed},
                  {"comparisons", c.comparisons},
                  {"conditions", c.conditions},
                  {"macro_f1", c.macro_f1 ? nlohmann::json(*c.macro_f1) : nlohmann::json()},
                  {"epoch_loss", c.epoch_loss},
                  {"error", c.error}});
  }
  return {{"format", "nfship-ablation"},
          {"version", 1},
          {"seed", seed},
          {"config_hash", config_hash},
          {"cells", jc}};
}

std::string AblationReport::render() const {
  std::vector<std::size_t> depths;
  std::vector<std::pair<double, std::string>> levels;
  for (const auto& c : cells) {
    if (std::find(depths.begin(), depths.end(), c.depth) == depths.end()) depths.push_back(c.depth);
    bool known = false;
    for (const auto& l : levels) known = known || std::abs(l.first - c.r) < 1e-12;
    if (!known) levels.emplace_back(c.r, c.label);
  }
  std::ostringstream os;
  os << std::left << std::setw(22) << "Orness";
  for (auto d : depths) os << std::right << std::setw(9) << ("D=" + std::to_string(d));
  os << '\n';
  for (const auto& [r, label] : levels) {
    std::ostringstream name;
    name << label << " (r=" << r << ")";
    os << std::left << std::setw(22) << name.str();
    for (auto d : depths) {
      const auto& c = at(d, r);
      std::ostringstream v;
      if (c.macro_f1) {
        v << std::fixed << std::setprecision(1) << 100.0 * *c.macro_f1;
      } else {
        v << "fail";
      }
      os << std::right << std::setw(9) << v.str();
    }
    os << '\n';
  }
  for (bool comparisons : {true, false}) {
    os << std::left << std::setw(22) << (comparisons ? "# comparisons" : "# conditions");
    for (auto d : depths) {
      const auto& c = at(d, levels.front().first);
      os << std::right << std::setw(9) << (comparisons ? c.comparisons : c.conditions);
    }
    os << '\n';
  }
  return os.str();
}

AblationReport ablation_sweep(const data::Dataset& train, const data::Dataset& test,
                              const AblationOptions& options) {
  if (options.depths.empty() || options.orness.empty()) {
    throw std::invalid_argument("ablation grids must be non-empty");
  }
  AblationReport report;
  report.seed = options.model.train.seed;
  nlohmann::json cfg = model::to_json(options.model);
  cfg["depths"] = options.depths;
  cfg["orness"] = options.orness;
  cfg["cart"] = {{"min_samples_split", options.cart.min_samples_split},
                 {"min_samples_leaf", options.cart.min_samples_leaf}};
  report.config_hash = model::config_hash(cfg);
  const auto truth_rows = model::all_rows(test);
  std::vector<int> truth;
  for (const auto& row : test.rows) truth.push_back(row.label);

  for (std::size_t depth : options.depths) {
    // Tree growth is deterministic, so one fit per depth serves every r.
    std::optional<RuleFit> fit;
    std::string fit_error;
    try {
      cart::CartParams p = options.cart;
      p.max_depth = depth;
      fit = fit_rules(train, p);
    } catch (const std::exception& e) {
      fit_error = e.what();
    }
    for (double r : options.orness) {
      AblationCell cell;
      cell.depth = depth;
      cell.r = r;
      cell.label = fuzzy::orness_label(r);
      cell.seed = options.model.train.seed;
      if (!fit) {
        cell.error = fit_error;
        report.cells.push_back(std::move(cell));
        continue;
      }
      cell.comparisons = fit->rules.comparison_count();
      cell.conditions = fit->rules.condition_count();
      try {
        auto cfg_cell = options.model;
        cfg_cell.r_and = -r;
        cfg_cell.r_or = r;
        cfg_cell.o1_width = 0;
        model::NeuroFuzzyModel m(fit->rules, cfg_cell);
        cell.epoch_loss = m.train(train).epoch_loss;
        const auto pred = m.classify(test);
        cell.macro_f1 = eval::macro_f1(pred, truth, test.num_classes()).macro;
      } catch (const std::exception& e) {
        cell.error = e.what();
        log::warn("ablation cell D=" + std::to_string(depth) + " r=" + std::to_string(r) +
                  " failed: " + e.what());
      }
      log::info("ablation D=" + std::to_string(depth) + " r=" + std::to_string(r) + " done");
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

}  // namespace nfship::pipeline
