#include "nfship/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace nfship::eval {
namespace {

void check_labels(std::span<const int> labels, std::size_t m) {
  for (int c : labels) {
    if (c < 0 || static_cast<std::size_t>(c) >= m) {
      throw std::out_of_range("label " + std::to_string(c) + " outside [0, " + std::to_string(m) +
                              ")");
    }
  }
}

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json();
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * *v;
  return os.str();
}

}  // namespace

F1Result macro_f1(std::span<const int> predicted, std::span<const int> truth, std::size_t m) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction/truth length mismatch");
  if (truth.empty()) throw std::invalid_argument("macro F1 of an empty set is undefined");
  if (m == 0) throw std::invalid_argument("macro F1 needs at least one class");
  check_labels(predicted, m);
  check_labels(truth, m);
  F1Result r;
  r.support.assign(m, 0);
  r.predicted.assign(m, 0);
  std::vector<std::size_t> tp(m, 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++r.support[static_cast<std::size_t>(truth[i])];
    ++r.predicted[static_cast<std::size_t>(predicted[i])];
    if (truth[i] == predicted[i]) ++tp[static_cast<std::size_t>(truth[i])];
  }
  for (std::size_t c = 0; c < m; ++c) {
    const std::size_t denom = r.support[c] + r.predicted[c];
    r.undefined.push_back(denom == 0);
    r.per_class.push_back(denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom));
  }
  r.macro = std::accumulate(r.per_class.begin(), r.per_class.end(), 0.0) / static_cast<double>(m);
  return r;
}

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw std::invalid_argument("score/truth length mismatch");
  const auto positives = static_cast<std::size_t>(std::count_if(truth.begin(), truth.end(),
                                                                [](std::uint8_t t) { return t != 0; }));
  if (positives == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  // Precision/recall after each distinct threshold.
  std::vector<double> precision, recall;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += truth[order[j]] != 0 ? 1 : 0;
      ++j;
    }
    seen = j;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(seen));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    i = j;
  }
  for (std::size_t k = precision.size(); k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < precision.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

MapResult mean_average_precision(const std::vector<std::vector<double>>& scores,
                                 std::span<const int> truth, std::size_t m) {
  if (scores.size() != truth.size()) throw std::invalid_argument("score/truth length mismatch");
  check_labels(truth, m);
  MapResult r;
  double sum = 0.0;
  std::size_t defined = 0;
  std::vector<double> col(scores.size());
  std::vector<std::uint8_t> bin(scores.size());
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].size() != m) throw std::invalid_argument("score row has the wrong width");
      col[i] = scores[i][c];
      bin[i] = static_cast<std::size_t>(truth[i]) == c ? 1 : 0;
    }
    auto ap = average_precision(col, bin);
    if (ap) {
      sum += *ap;
      ++defined;
    }
    r.per_class.push_back(ap);
  }
  if (defined > 0) r.mean = sum / static_cast<double>(defined);
  return r;
}

std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> predicted,
                                                       std::span<const int> truth, std::size_t m) {
  if (predicted.size() != truth.size()) throw std::invalid_argument("prediction/truth length mismatch");
  check_labels(predicted, m);
  check_labels(truth, m);
  std::vector<std::vector<std::size_t>> cm(m, std::vector<std::size_t>(m, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return cm;
}

std::vector<std::optional<double>> EvalReport::per_class() const {
  if (metric == "classification_ap") return ap.per_class;
  return {f1.per_class.begin(), f1.per_class.end()};
}

std::optional<double> EvalReport::aggregate() const {
  if (metric == "classification_ap") return ap.mean;
  return f1.macro;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json classes = nlohmann::json::array();
  for (std::size_t c = 0; c < labels.size(); ++c) {
    classes.push_back({{"class", labels[c]},
                       {"f1", f1.per_class[c]},
                       {"f1_undefined", static_cast<bool>(f1.undefined[c])},
                       {"ap", opt_json(ap.per_class[c])},
                       {"support", f1.support[c]},
                       {"predicted", f1.predicted[c]}});
  }
  return {{"format", "nfship-eval-report"},
          {"version", 1},
          {"model", model_id},
          {"variant", variant},
          {"seed", seed},
          {"config_hash", config_hash},
          {"metric", metric},
          {"ap_mode", "classification AP over per-sample class confidences, all-point interpolation"},
          {"aggregate", opt_json(aggregate())},
          {"macro_f1", f1.macro},
          {"map", opt_json(ap.mean)},
          {"classes", classes},
          {"confusion", confusion}};
}

std::string EvalReport::render() const {
  const EvalReport* self = this;
  return render_comparison(std::span<const EvalReport>(self, 1));
}

EvalReport make_report(std::string model_id, std::string variant, std::vector<std::string> labels,
                       std::span<const int> truth, std::span<const int> predicted,
                       const std::vector<std::vector<double>>& scores) {
  EvalReport r;
  r.model_id = std::move(model_id);
  r.variant = std::move(variant);
  r.metric = r.variant == "ic" ? "classification_ap" : "macro_f1";
  r.labels = std::move(labels);
  r.f1 = macro_f1(predicted, truth, r.labels.size());
  r.ap = mean_average_precision(scores, truth, r.labels.size());
  r.confusion = confusion_matrix(predicted, truth, r.labels.size());
  return r;
}

std::string render_comparison(std::span<const EvalReport> reports) {
  if (reports.empty()) return {};
  const auto& labels = reports.front().labels;
  std::size_t w0 = 10;
  for (const auto& l : labels) w0 = std::max(w0, l.size() + 2);
  std::ostringstream os;
  const auto& metric = reports.front().metric;
  os << (metric == "classification_ap" ? "Image centred (classification AP, %)"
                                       : "Vessel centred (macro F1, %)")
     << '\n';
  os << std::left << std::setw(static_cast<int>(w0)) << "Class";
  for (const auto& r : reports) os << std::right << std::setw(14) << r.model_id;
  os << '\n';
  for (std::size_t c = 0; c < labels.size(); ++c) {
    os << std::left << std::setw(static_cast<int>(w0)) << labels[c];
    for (const auto& r : reports) os << std::right << std::setw(14) << fmt(r.per_class().at(c));
    os << '\n';
  }
  os << std::left << std::setw(static_cast<int>(w0))
     << (metric == "classification_ap" ? "mAP" : "Macro F1");
  for (const auto& r : reports) os << std::right << std::setw(14) << fmt(r.aggregate());
  os << '\n';
  return os.str();
}

}  // namespace nfship::eval
