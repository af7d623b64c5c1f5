#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "nfship/cart.hpp"
#include "nfship/common.hpp"

namespace nfship::classical {

// Majority vote among the k nearest training rows (Euclidean over the raw AIS
// fields). Vote ties go to the class with the smallest summed distance, then
// the lowest index. k larger than the training set is clamped with a warning.
class KnnClassifier {
 public:
  KnnClassifier(std::vector<AisVector> X, std::vector<int> y, std::size_t num_classes,
                std::size_t k = 5);

  int predict(const AisVector& x) const;
  // Vote shares over classes.
  std::vector<double> scores(const AisVector& x) const;
  std::size_t k() const { return k_; }

 private:
  struct Vote {
    std::vector<double> counts;
    std::vector<double> distance_sums;
  };
  Vote vote(const AisVector& x) const;

  std::vector<AisVector> X_;
  std::vector<int> y_;
  std::size_t m_;
  std::size_t k_;
};

// Gaussian naive Bayes with per-class, per-feature variances floored at
// `var_floor`.
class GaussianNb {
 public:
  GaussianNb(const std::vector<AisVector>& X, std::span<const int> y, std::size_t num_classes,
             double var_floor = 1e-9);

  std::vector<double> scores(const AisVector& x) const;  // posterior
  int predict(const AisVector& x) const;

 private:
  std::size_t m_;
  std::vector<double> log_prior_;  // -inf for classes absent from training
  std::vector<AisVector> mean_;
  std::vector<AisVector> var_;
};

struct LogisticOptions {
  double learning_rate = 0.5;
  std::size_t iterations = 2000;
  double l2 = 0.0;
};

// Multinomial logistic regression on standardised features, fitted by
// full-batch gradient descent on the mean cross-entropy from zero weights.
class LogisticRegression {
 public:
  LogisticRegression(const std::vector<AisVector>& X, std::span<const int> y,
                     std::size_t num_classes, LogisticOptions options = {});

  std::vector<double> scores(const AisVector& x) const;  // softmax
  int predict(const AisVector& x) const;
  double final_loss() const { return final_loss_; }

 private:
  std::vector<double> logits(const AisVector& x) const;

  std::size_t m_;
  AisVector mean_{};
  AisVector scale_{};
  std::vector<std::vector<double>> W_;  // [m][7 + 1], last entry is the bias
  double final_loss_ = 0.0;
};

// Rules-only crisp classifier: the class whose DNF rule fires. When several
// or no rules fire, the candidate whose one-vs-all tree leaf has the highest
// positive fraction wins (lowest index on ties).
class CrispRuleClassifier {
 public:
  CrispRuleClassifier(cart::RuleSet rules, std::vector<cart::Tree> trees);

  int predict(const AisVector& x) const;
  // Leaf positive fractions, plus 1 for every firing rule, L1-normalised.
  std::vector<double> scores(const AisVector& x) const;
  std::vector<bool> fired(const AisVector& x) const;

 private:
  cart::RuleSet rules_;
  std::vector<cart::Tree> trees_;
};

}  // namespace nfship::classical
