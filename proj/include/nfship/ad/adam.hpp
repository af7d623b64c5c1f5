#pragma once

#include <cstdint>
#include <vector>

#include "nfship/ad/tape.hpp"

namespace nfship::ad {

struct AdamOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias-corrected moments. Moment buffers are created lazily, one per
// parameter in store order; non-trainable parameters are skipped.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  // Applies one update from the gradients currently held by `store`. A
  // non-finite gradient throws NumericError before any parameter changes.
  void step(ParamStore<T>& store);

  std::uint64_t step_count() const { return steps_; }
  const AdamOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }

 private:
  AdamOptions options_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace nfship::ad
