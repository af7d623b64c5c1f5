#include "nfship/model/layers.hpp"

#include <cmath>

namespace nfship::model {
namespace {

template <typename T>
ad::Tensor<T> uniform(ad::Shape shape, double bound, std::mt19937_64& rng) {
  ad::Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

ConvSpec conv_from_json(const nlohmann::json& j) {
  return {j.at("out_channels").get<std::size_t>(), j.at("kernel").get<std::size_t>(),
          j.at("padding").get<std::size_t>()};
}

nlohmann::json conv_to_json(const ConvSpec& c) {
  return {{"out_channels", c.out_channels}, {"kernel", c.kernel}, {"padding", c.padding}};
}

}  // namespace

void BranchConfig::validate() const {
  if (feature_shape.size() == 0) throw std::invalid_argument("feature shape must be non-empty");
  for (const auto* c : {&conv1, &conv2}) {
    if (c->out_channels == 0 || c->kernel == 0) {
      throw std::invalid_argument("conv layers need positive channels and kernel size");
    }
  }
  if (a1_width == 0) throw std::invalid_argument("a1 width must be positive");
  flat_width();
}

std::size_t BranchConfig::flat_width() const {
  std::size_t h = feature_shape.height, w = feature_shape.width;
  for (const auto* c : {&conv1, &conv2}) {
    if (h + 2 * c->padding < c->kernel || w + 2 * c->padding < c->kernel) {
      throw std::invalid_argument("conv kernel larger than its padded input");
    }
    h = h + 2 * c->padding - c->kernel + 1;
    w = w + 2 * c->padding - c->kernel + 1;
  }
  return conv2.out_channels * h * w;
}

nlohmann::json to_json(const BranchConfig& c) {
  return {{"feature_shape", {c.feature_shape.channels, c.feature_shape.height, c.feature_shape.width}},
          {"conv1", conv_to_json(c.conv1)},
          {"conv2", conv_to_json(c.conv2)},
          {"a1_width", c.a1_width}};
}

BranchConfig branch_config_from_json(const nlohmann::json& j) {
  BranchConfig c;
  const auto& s = j.at("feature_shape");
  c.feature_shape = {s.at(0).get<std::uint32_t>(), s.at(1).get<std::uint32_t>(),
                     s.at(2).get<std::uint32_t>()};
  c.conv1 = conv_from_json(j.at("conv1"));
  c.conv2 = conv_from_json(j.at("conv2"));
  c.a1_width = j.at("a1_width").get<std::size_t>();
  return c;
}

template <typename T>
void add_dense(ad::ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  store.add(name + ".weight", uniform<T>({out, in}, bound, rng));
  store.add(name + ".bias", uniform<T>({out}, bound, rng));
}

template <typename T>
void add_conv(ad::ParamStore<T>& store, const std::string& name, std::size_t in_channels,
              const ConvSpec& spec, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels * spec.kernel * spec.kernel));
  store.add(name + ".weight",
            uniform<T>({spec.out_channels, in_channels, spec.kernel, spec.kernel}, bound, rng));
  store.add(name + ".bias", uniform<T>({spec.out_channels}, bound, rng));
}

template <typename T>
void add_batch_norm(ad::ParamStore<T>& store, const std::string& name, std::size_t features) {
  store.add(name + ".gamma", ad::Tensor<T>({features}, T(1)));
  store.add(name + ".beta", ad::Tensor<T>({features}, T(0)));
  store.add(name + ".running_mean", ad::Tensor<T>({features}, T(0)), false);
  store.add(name + ".running_var", ad::Tensor<T>({features}, T(1)), false);
}

template <typename T>
void add_branch(ad::ParamStore<T>& store, const BranchConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  add_conv(store, "conv1", cfg.feature_shape.channels, cfg.conv1, rng);
  add_conv(store, "conv2", cfg.conv1.out_channels, cfg.conv2, rng);
  add_dense(store, "a1", cfg.flat_width(), cfg.a1_width, rng);
}

template <typename T>
ad::Var dense_layer(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& name,
                    ad::Var x) {
  return ad::dense(tape, x, tape.param(store.at(name + ".weight")),
                   tape.param(store.at(name + ".bias")));
}

template <typename T>
ad::Var batch_norm_layer(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& name,
                         ad::Var x, const ad::Mode& mode) {
  return ad::batch_norm(tape, x, tape.param(store.at(name + ".gamma")),
                        tape.param(store.at(name + ".beta")), store.at(name + ".running_mean"),
                        store.at(name + ".running_var"), mode);
}

template <typename T>
ad::Var hidden_block(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& name,
                     ad::Var x, T dropout_rate, const ad::Mode& mode) {
  ad::Var h = dense_layer(tape, store, name, x);
  h = batch_norm_layer(tape, store, name + ".bn", h, mode);
  h = ad::relu(tape, h);
  return ad::dropout(tape, h, dropout_rate, mode);
}

template <typename T>
ad::Var branch_forward(ad::Tape<T>& tape, ad::ParamStore<T>& store, const BranchConfig& cfg,
                       ad::Var features) {
  ad::Var h = ad::conv2d(tape, features, tape.param(store.at("conv1.weight")),
                         tape.param(store.at("conv1.bias")), cfg.conv1.padding);
  h = ad::relu(tape, h);
  h = ad::conv2d(tape, h, tape.param(store.at("conv2.weight")), tape.param(store.at("conv2.bias")),
                 cfg.conv2.padding);
  h = ad::relu(tape, h);
  h = ad::flatten(tape, h);
  return ad::relu(tape, dense_layer(tape, store, "a1", h));
}

#define NFSHIP_INSTANTIATE_LAYERS(T)                                                           \
  template void add_dense<T>(ad::ParamStore<T>&, const std::string&, std::size_t, std::size_t, \
                             std::mt19937_64&);                                                \
  template void add_conv<T>(ad::ParamStore<T>&, const std::string&, std::size_t,               \
                            const ConvSpec&, std::mt19937_64&);                                \
  template void add_batch_norm<T>(ad::ParamStore<T>&, const std::string&, std::size_t);        \
  template void add_branch<T>(ad::ParamStore<T>&, const BranchConfig&, std::mt19937_64&);      \
  template ad::Var dense_layer<T>(ad::Tape<T>&, ad::ParamStore<T>&, const std::string&,        \
                                  ad::Var);                                                    \
  template ad::Var batch_norm_layer<T>(ad::Tape<T>&, ad::ParamStore<T>&, const std::string&,   \
                                       ad::Var, const ad::Mode&);                              \
  template ad::Var hidden_block<T>(ad::Tape<T>&, ad::ParamStore<T>&, const std::string&,       \
                                   ad::Var, T, const ad::Mode&);                               \
  template ad::Var branch_forward<T>(ad::Tape<T>&, ad::ParamStore<T>&, const BranchConfig&,    \
                                     ad::Var);

NFSHIP_INSTANTIATE_LAYERS(float)
NFSHIP_INSTANTIATE_LAYERS(double)

}  // namespace nfship::model
