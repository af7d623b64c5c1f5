#pragma once

#include <random>
#include <string>

#include "json.hpp"
#include "nfship/ad/ops.hpp"
#include "nfship/ad/tape.hpp"
#include "nfship/nff.hpp"

namespace nfship::model {

struct ConvSpec {
  std::size_t out_channels = 64;
  std::size_t kernel = 3;
  std::size_t padding = 1;
};

// Shared image branch: conv -> ReLU -> conv -> ReLU -> flatten -> a1 -> ReLU.
struct BranchConfig {
  data::FeatureShape feature_shape = data::kRoiFeatureShape;
  ConvSpec conv1{64, 3, 1};
  ConvSpec conv2{32, 3, 1};
  std::size_t a1_width = 512;

  void validate() const;
  // Flattened width after conv2.
  std::size_t flat_width() const;
};

nlohmann::json to_json(const BranchConfig& c);
BranchConfig branch_config_from_json(const nlohmann::json& j);

// Fan-in scaled uniform initialisation: U(-1/sqrt(fan_in), 1/sqrt(fan_in))
// for weights and biases.
template <typename T>
void add_dense(ad::ParamStore<T>& store, const std::string& name, std::size_t in, std::size_t out,
               std::mt19937_64& rng);
template <typename T>
void add_conv(ad::ParamStore<T>& store, const std::string& name, std::size_t in_channels,
              const ConvSpec& spec, std::mt19937_64& rng);
template <typename T>
void add_batch_norm(ad::ParamStore<T>& store, const std::string& name, std::size_t features);
template <typename T>
void add_branch(ad::ParamStore<T>& store, const BranchConfig& cfg, std::mt19937_64& rng);

template <typename T>
ad::Var dense_layer(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& name,
                    ad::Var x);
template <typename T>
ad::Var batch_norm_layer(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& name,
                         ad::Var x, const ad::Mode& mode);
// Linear -> batch norm -> ReLU -> dropout.
template <typename T>
ad::Var hidden_block(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& name,
                     ad::Var x, T dropout_rate, const ad::Mode& mode);
// features [B, C, H, W] -> a1 activations [B, a1_width].
template <typename T>
ad::Var branch_forward(ad::Tape<T>& tape, ad::ParamStore<T>& store, const BranchConfig& cfg,
                       ad::Var features);

}  // namespace nfship::model
