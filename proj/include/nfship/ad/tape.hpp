#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "nfship/ad/tensor.hpp"

namespace nfship::ad {

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;  // false for buffers such as batch-norm running stats
};

// Named parameters in insertion order, each with a gradient buffer of the
// same shape.
template <typename T>
class ParamStore {
 public:
  Param<T>& add(const std::string& name, Tensor<T> value, bool trainable = true);
  Param<T>& at(const std::string& name);
  const Param<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::deque<Param<T>>& params() { return params_; }
  const std::deque<Param<T>>& params() const { return params_; }

  void zero_grad();
  std::size_t trainable_count() const;

  bool training() const { return training_; }
  void set_training(bool training) { training_ = training; }

 private:
  std::deque<Param<T>> params_;
  std::map<std::string, std::size_t> index_;
  bool training_ = false;
};

struct Var {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::size_t id = kNone;
  bool valid() const { return id != kNone; }
};

// Records forward values and the closures that propagate gradients back
// through them. Nodes are appended in evaluation order, so reverse order is a
// valid topological order for backward().
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&)>;

  Var constant(Tensor<T> value);
  // A leaf whose gradient can be read back with grad() after backward().
  Var leaf(Tensor<T> value);
  // A leaf bound to a parameter; backward() accumulates into param.grad.
  // The parameter value is read in place and must outlive the tape.
  Var param(Param<T>& p);
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor<T>& value(Var v) const {
    const Node& n = nodes_.at(v.id);
    return n.external != nullptr ? *n.external : n.value;
  }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  bool has_grad(Var v) const { return !nodes_.at(v.id).grad.empty(); }
  // Gradient buffer of v, allocated as zeros on first access.
  Tensor<T>& grad(Var v);

  // Seeds d(root)/d(root) = 1; root must hold a single value.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Param<T>* param = nullptr;
    BackwardFn backward;
    const Tensor<T>* external = nullptr;  // parameter value, read in place
  };
  std::vector<Node> nodes_;
};

// Forward-pass switches shared by every primitive of a model.
struct Mode {
  bool training = false;
  bool dropout = true;  // only consulted when training
  std::mt19937_64* rng = nullptr;
};

extern template struct Param<float>;
extern template struct Param<double>;
extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace nfship::ad
