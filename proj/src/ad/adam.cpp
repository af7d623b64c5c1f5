#include "nfship/ad/adam.hpp"

#include <cmath>

#include "nfship/common.hpp"

namespace nfship::ad {

template <typename T>
void Adam<T>::step(ParamStore<T>& store) {
  auto& params = store.params();
  for (const auto& p : params) {
    if (!p.trainable) continue;
    if (!p.grad.all_finite()) {
      throw NumericError("adam: non-finite gradient in parameter '" + p.name + "' at step " +
                         std::to_string(steps_ + 1));
    }
  }
  if (m_.size() != params.size()) {
    m_.resize(params.size());
    v_.resize(params.size());
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  const T b1 = static_cast<T>(options_.beta1), b2 = static_cast<T>(options_.beta2);
  const T step_size = static_cast<T>(options_.learning_rate / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  const T eps = static_cast<T>(options_.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    if (m.size() != p.value.size()) {
      m.assign(p.value.size(), T(0));
      v.assign(p.value.size(), T(0));
    }
    for (std::size_t k = 0; k < m.size(); ++k) {
      const T g = p.grad[k];
      m[k] = b1 * m[k] + (T(1) - b1) * g;
      v[k] = b2 * v[k] + (T(1) - b2) * g * g;
      p.value[k] -= step_size * m[k] / (std::sqrt(v[k] * inv_bc2) + eps);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace nfship::ad
