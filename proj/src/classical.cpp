#include "nfship/classical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nfship/fuzzy.hpp"
#include "nfship/log.hpp"

namespace nfship::classical {
namespace {

void check_training(std::size_t n, std::size_t labels, std::span<const int> y, std::size_t m) {
  if (n == 0) throw EmptyDatasetError("classifier needs at least one training row");
  if (n != labels) throw std::invalid_argument("feature and label counts differ");
  if (m < 2) throw std::invalid_argument("classifier needs at least 2 classes");
  for (int c : y) {
    if (c < 0 || static_cast<std::size_t>(c) >= m) {
      throw std::out_of_range("label " + std::to_string(c) + " outside [0, " + std::to_string(m) +
                              ")");
    }
  }
}

void require_two_classes(std::span<const int> y) {
  if (std::adjacent_find(y.begin(), y.end(), std::not_equal_to<>()) == y.end()) {
    throw std::invalid_argument("training data holds a single class");
  }
}

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<double> softmax(std::vector<double> z) {
  const double peak = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) sum += (v = std::isfinite(v) ? std::exp(v - peak) : 0.0);
  for (double& v : z) v /= sum;
  return z;
}

}  // namespace

KnnClassifier::KnnClassifier(std::vector<AisVector> X, std::vector<int> y, std::size_t num_classes,
                             std::size_t k)
    : X_(std::move(X)), y_(std::move(y)), m_(num_classes), k_(k) {
  check_training(X_.size(), y_.size(), y_, m_);
  if (k_ == 0) throw std::invalid_argument("k must be at least 1");
  if (k_ > X_.size()) {
    log::warn("k = " + std::to_string(k_) + " exceeds the " + std::to_string(X_.size()) +
              " training rows; clamping");
    k_ = X_.size();
  }
}

KnnClassifier::Vote KnnClassifier::vote(const AisVector& x) const {
  std::vector<std::pair<double, std::size_t>> dist(X_.size());
  for (std::size_t i = 0; i < X_.size(); ++i) {
    double d = 0.0;
    for (std::size_t f = 0; f < kAisFieldCount; ++f) d += (X_[i][f] - x[f]) * (X_[i][f] - x[f]);
    dist[i] = {std::sqrt(d), i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
  Vote v{std::vector<double>(m_, 0.0), std::vector<double>(m_, 0.0)};
  for (std::size_t j = 0; j < k_; ++j) {
    const auto c = static_cast<std::size_t>(y_[dist[j].second]);
    v.counts[c] += 1.0;
    v.distance_sums[c] += dist[j].first;
  }
  return v;
}

int KnnClassifier::predict(const AisVector& x) const {
  const Vote v = vote(x);
  int best = -1;
  for (std::size_t c = 0; c < m_; ++c) {
    if (v.counts[c] == 0.0) continue;
    if (best < 0) {
      best = static_cast<int>(c);
      continue;
    }
    const auto b = static_cast<std::size_t>(best);
    if (v.counts[c] > v.counts[b] ||
        (v.counts[c] == v.counts[b] && v.distance_sums[c] < v.distance_sums[b])) {
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<double> KnnClassifier::scores(const AisVector& x) const {
  auto counts = vote(x).counts;
  for (double& c : counts) c /= static_cast<double>(k_);
  return counts;
}

GaussianNb::GaussianNb(const std::vector<AisVector>& X, std::span<const int> y,
                       std::size_t num_classes, double var_floor)
    : m_(num_classes),
      log_prior_(num_classes, -std::numeric_limits<double>::infinity()),
      mean_(num_classes, AisVector{}),
      var_(num_classes, AisVector{}) {
  check_training(X.size(), y.size(), y, m_);
  require_two_classes(y);
  std::vector<std::size_t> count(m_, 0);
  for (std::size_t i = 0; i < X.size(); ++i) {
    const auto c = static_cast<std::size_t>(y[i]);
    ++count[c];
    for (std::size_t f = 0; f < kAisFieldCount; ++f) mean_[c][f] += X[i][f];
  }
  for (std::size_t c = 0; c < m_; ++c) {
    if (count[c] == 0) continue;
    for (auto& v : mean_[c]) v /= static_cast<double>(count[c]);
  }
  for (std::size_t i = 0; i < X.size(); ++i) {
    const auto c = static_cast<std::size_t>(y[i]);
    for (std::size_t f = 0; f < kAisFieldCount; ++f) {
      const double d = X[i][f] - mean_[c][f];
      var_[c][f] += d * d;
    }
  }
  for (std::size_t c = 0; c < m_; ++c) {
    if (count[c] == 0) continue;
    log_prior_[c] = std::log(static_cast<double>(count[c]) / static_cast<double>(X.size()));
    for (auto& v : var_[c]) v = std::max(v / static_cast<double>(count[c]), var_floor);
  }
}

std::vector<double> GaussianNb::scores(const AisVector& x) const {
  std::vector<double> z(m_);
  constexpr double kLog2Pi = 1.8378770664093453;
  for (std::size_t c = 0; c < m_; ++c) {
    z[c] = log_prior_[c];
    if (!std::isfinite(z[c])) continue;
    for (std::size_t f = 0; f < kAisFieldCount; ++f) {
      const double d = x[f] - mean_[c][f];
      z[c] -= 0.5 * (kLog2Pi + std::log(var_[c][f]) + d * d / var_[c][f]);
    }
  }
  return softmax(std::move(z));
}

int GaussianNb::predict(const AisVector& x) const { return argmax(scores(x)); }

LogisticRegression::LogisticRegression(const std::vector<AisVector>& X, std::span<const int> y,
                                       std::size_t num_classes, LogisticOptions options)
    : m_(num_classes), W_(num_classes, std::vector<double>(kAisFieldCount + 1, 0.0)) {
  check_training(X.size(), y.size(), y, m_);
  require_two_classes(y);
  const auto n = static_cast<double>(X.size());
  for (const auto& row : X)
    for (std::size_t f = 0; f < kAisFieldCount; ++f) mean_[f] += row[f] / n;
  for (const auto& row : X)
    for (std::size_t f = 0; f < kAisFieldCount; ++f)
      scale_[f] += (row[f] - mean_[f]) * (row[f] - mean_[f]) / n;
  for (auto& s : scale_) s = s > 0.0 ? std::sqrt(s) : 1.0;

  std::vector<AisVector> Z(X.size());
  for (std::size_t i = 0; i < X.size(); ++i)
    for (std::size_t f = 0; f < kAisFieldCount; ++f) Z[i][f] = (X[i][f] - mean_[f]) / scale_[f];

  std::vector<std::vector<double>> grad(m_, std::vector<double>(kAisFieldCount + 1));
  for (std::size_t it = 0; it < options.iterations; ++it) {
    for (auto& g : grad) std::fill(g.begin(), g.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < Z.size(); ++i) {
      std::vector<double> z(m_);
      for (std::size_t c = 0; c < m_; ++c) {
        z[c] = W_[c][kAisFieldCount];
        for (std::size_t f = 0; f < kAisFieldCount; ++f) z[c] += W_[c][f] * Z[i][f];
      }
      const auto p = softmax(z);
      loss -= std::log(std::max(p[static_cast<std::size_t>(y[i])], 1e-300));
      for (std::size_t c = 0; c < m_; ++c) {
        const double e = p[c] - (static_cast<std::size_t>(y[i]) == c ? 1.0 : 0.0);
        for (std::size_t f = 0; f < kAisFieldCount; ++f) grad[c][f] += e * Z[i][f];
        grad[c][kAisFieldCount] += e;
      }
    }
    final_loss_ = loss / n;
    for (std::size_t c = 0; c < m_; ++c) {
      for (std::size_t f = 0; f <= kAisFieldCount; ++f) {
        const double reg = f < kAisFieldCount ? options.l2 * W_[c][f] : 0.0;
        W_[c][f] -= options.learning_rate * (grad[c][f] / n + reg);
      }
    }
  }
}

std::vector<double> LogisticRegression::logits(const AisVector& x) const {
  std::vector<double> z(m_);
  for (std::size_t c = 0; c < m_; ++c) {
    z[c] = W_[c][kAisFieldCount];
    for (std::size_t f = 0; f < kAisFieldCount; ++f) z[c] += W_[c][f] * (x[f] - mean_[f]) / scale_[f];
  }
  return z;
}

std::vector<double> LogisticRegression::scores(const AisVector& x) const {
  return softmax(logits(x));
}

int LogisticRegression::predict(const AisVector& x) const { return argmax(logits(x)); }

CrispRuleClassifier::CrispRuleClassifier(cart::RuleSet rules, std::vector<cart::Tree> trees)
    : rules_(std::move(rules)), trees_(std::move(trees)) {
  if (rules_.rules.size() != trees_.size()) {
    throw std::invalid_argument("crisp classifier needs one tree per rule");
  }
  if (rules_.rules.size() < 2) throw std::invalid_argument("crisp classifier needs 2+ classes");
}

std::vector<bool> CrispRuleClassifier::fired(const AisVector& x) const {
  std::vector<bool> out;
  out.reserve(rules_.rules.size());
  for (const auto& r : rules_.rules) out.push_back(fuzzy::eval_rule_crisp(r, x));
  return out;
}

int CrispRuleClassifier::predict(const AisVector& x) const {
  const auto f = fired(x);
  const bool any = std::find(f.begin(), f.end(), true) != f.end();
  int best = -1;
  double best_frac = -1.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (any && !f[i]) continue;
    const double frac = cart::predict_tree(trees_[i], x).positive_fraction;
    if (frac > best_frac) {
      best_frac = frac;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<double> CrispRuleClassifier::scores(const AisVector& x) const {
  const auto f = fired(x);
  std::vector<double> s(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    s[i] = cart::predict_tree(trees_[i], x).positive_fraction + (f[i] ? 1.0 : 0.0);
  }
  return fuzzy::normalize_scores_l1(s).values;
}

}  // namespace nfship::classical
