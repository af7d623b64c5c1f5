#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfship/ad/tape.hpp"
#include "nfship/data_model.hpp"
#include "nfship/model/layers.hpp"
#include "nfship/training.hpp"

namespace nfship::model {

// Bilinear fusion of the image branch (through a1) and an AIS branch
// b1 -> b2 -> b3, followed by a softmax head.
struct BaselineConfig {
  BranchConfig branch;
  std::size_t b1_width = 256;
  std::size_t b2_width = 256;
  std::size_t b3_width = 256;
  std::size_t bilinear_width = 256;
  double dropout = 0.5;
  TrainOptions train;

  void validate() const;
};

nlohmann::json to_json(const BaselineConfig& cfg);
BaselineConfig baseline_config_from_json(const nlohmann::json& j);

template <typename T>
class BaselineModelT {
 public:
  using Scalar = T;

  BaselineModelT(std::vector<std::string> labels, BaselineConfig cfg);

  const std::vector<std::string>& labels() const { return labels_; }
  const BaselineConfig& config() const { return cfg_; }
  ad::ParamStore<T>& store() { return store_; }
  const ad::ParamStore<T>& store() const { return store_; }
  std::size_t num_classes() const { return labels_.size(); }
  bool needs_features() const { return true; }

  // Logits [B, m].
  ad::Var forward(ad::Tape<T>& tape, const Batch<T>& batch, const ad::Mode& mode);
  ad::Var loss(ad::Tape<T>& tape, const Batch<T>& batch, const ad::Mode& mode);
  void after_step() {}

  std::vector<std::vector<double>> probabilities(const data::Dataset& ds,
                                                 std::span<const std::size_t> rows);
  std::vector<int> classify(const data::Dataset& ds);

  TrainResult train(const data::Dataset& ds, const StepCallback& on_step = {});

  nlohmann::json manifest() const;
  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static BaselineModelT load(const std::filesystem::path& path);

 private:
  std::vector<std::string> labels_;
  BaselineConfig cfg_;
  ad::ParamStore<T> store_;
};

extern template class BaselineModelT<float>;
extern template class BaselineModelT<double>;

using BaselineModel = BaselineModelT<float>;

}  // namespace nfship::model
