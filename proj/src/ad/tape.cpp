#include "nfship/ad/tape.hpp"

#include <algorithm>

namespace nfship::ad {

template <typename T>
Param<T>& ParamStore<T>::add(const std::string& name, Tensor<T> value, bool trainable) {
  if (index_.contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  index_.emplace(name, params_.size());
  Param<T> p;
  p.name = name;
  p.grad = Tensor<T>(value.shape());
  p.value = std::move(value);
  p.trainable = trainable;
  params_.push_back(std::move(p));
  return params_.back();
}

template <typename T>
Param<T>& ParamStore<T>::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return params_[it->second];
}

template <typename T>
const Param<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return params_[it->second];
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& p : params_) p.grad.fill(T(0));
}

template <typename T>
std::size_t ParamStore<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.trainable ? p.value.size() : 0;
  return n;
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return {nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::leaf(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, true, nullptr, {}});
  return {nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::param(Param<T>& p) {
  nodes_.push_back(Node{{}, {}, p.trainable, p.trainable ? &p : nullptr, {}, &p.value});
  return {nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (Var in : inputs) needs = needs || (in.valid() && nodes_.at(in.id).requires_grad);
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(backward) : nullptr});
  return {nodes_.size() - 1};
}

template <typename T>
Tensor<T>& Tape<T>::grad(Var v) {
  Node& n = nodes_.at(v.id);
  const Tensor<T>& val = n.external != nullptr ? *n.external : n.value;
  if (n.grad.empty() && !val.empty()) n.grad = Tensor<T>(val.shape());
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var root) {
  if (value(root).size() != 1) {
    throw ShapeError("backward() needs a scalar root, got shape " +
                     shape_string(value(root).shape()));
  }
  grad(root)[0] = T(1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) n.backward(*this);
    if (n.param != nullptr) {
      auto& g = n.param->grad;
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }
}

template struct Param<float>;
template struct Param<double>;
template class ParamStore<float>;
template class ParamStore<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace nfship::ad
