#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace nfship::eval {

struct F1Result {
  double macro = 0.0;
  std::vector<double> per_class;
  std::vector<std::size_t> support;    // true count per class
  std::vector<std::size_t> predicted;  // predicted count per class
  // Classes with no support and no predictions; they count as F1 = 0.
  std::vector<bool> undefined;
};

F1Result macro_f1(std::span<const int> predicted, std::span<const int> truth, std::size_t num_classes);

// Area under the all-point interpolated precision-recall curve. Samples with
// equal scores form one threshold. Empty when there are no positives.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> truth);

struct MapResult {
  std::optional<double> mean;  // over classes with a defined AP
  std::vector<std::optional<double>> per_class;
};

// scores[i][c] is the confidence that sample i belongs to class c.
MapResult mean_average_precision(const std::vector<std::vector<double>>& scores,
                                 std::span<const int> truth, std::size_t num_classes);

// confusion[t][p] counts samples of true class t predicted as p.
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> predicted,
                                                       std::span<const int> truth,
                                                       std::size_t num_classes);

struct EvalReport {
  std::string model_id;
  std::string variant;  // "ic" or "vc"
  std::uint64_t seed = 0;
  std::string config_hash;
  // Headline metric: "macro_f1" for vessel-centred data, "classification_ap"
  // for image-centred data (per-image confidences, no box matching).
  std::string metric;
  std::vector<std::string> labels;
  F1Result f1;
  MapResult ap;
  std::vector<std::vector<std::size_t>> confusion;

  // Per-class values of the headline metric.
  std::vector<std::optional<double>> per_class() const;
  std::optional<double> aggregate() const;

  nlohmann::json to_json() const;
  std::string render() const;
};

EvalReport make_report(std::string model_id, std::string variant, std::vector<std::string> labels,
                       std::span<const int> truth, std::span<const int> predicted,
                       const std::vector<std::vector<double>>& scores);

// Side-by-side table of several reports on the same labels: one column per
// model, one row per class plus the aggregate.
std::string render_comparison(std::span<const EvalReport> reports);

}  // namespace nfship::eval
