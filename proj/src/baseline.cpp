#include "nfship/baseline.hpp"

#include <algorithm>
#include <cmath>

#include "nfship/ad/checkpoint.hpp"
#include "nfship/ad/ops.hpp"
#include "nfship/common.hpp"
#include "nfship/neurofuzzy.hpp"

namespace nfship::model {
namespace {

constexpr std::size_t kEvalChunk = 64;

}  // namespace

void BaselineConfig::validate() const {
  branch.validate();
  if (b1_width == 0 || b2_width == 0 || b3_width == 0 || bilinear_width == 0) {
    throw std::invalid_argument("baseline layer widths must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  train.validate();
}

nlohmann::json to_json(const BaselineConfig& cfg) {
  return {{"branch", to_json(cfg.branch)},     {"b1_width", cfg.b1_width},
          {"b2_width", cfg.b2_width},          {"b3_width", cfg.b3_width},
          {"bilinear_width", cfg.bilinear_width}, {"dropout", cfg.dropout},
          {"train", to_json(cfg.train)}};
}

BaselineConfig baseline_config_from_json(const nlohmann::json& j) {
  BaselineConfig cfg;
  cfg.branch = branch_config_from_json(j.at("branch"));
  cfg.b1_width = j.at("b1_width").get<std::size_t>();
  cfg.b2_width = j.at("b2_width").get<std::size_t>();
  cfg.b3_width = j.at("b3_width").get<std::size_t>();
  cfg.bilinear_width = j.at("bilinear_width").get<std::size_t>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.train = train_options_from_json(j.at("train"));
  return cfg;
}

template <typename T>
BaselineModelT<T>::BaselineModelT(std::vector<std::string> labels, BaselineConfig cfg)
    : labels_(std::move(labels)), cfg_(std::move(cfg)) {
  cfg_.validate();
  if (labels_.size() < 2) throw ContractViolation("the baseline needs at least 2 classes");
  std::mt19937_64 rng(cfg_.train.seed);
  add_branch(store_, cfg_.branch, rng);
  add_dense(store_, "b1", kAisFieldCount, cfg_.b1_width, rng);
  add_dense(store_, "b2", cfg_.b1_width, cfg_.b2_width, rng);
  add_batch_norm(store_, "b2.bn", cfg_.b2_width);
  add_dense(store_, "b3", cfg_.b2_width, cfg_.b3_width, rng);
  add_batch_norm(store_, "b3.bn", cfg_.b3_width);
  {
    // Bilinear weights share the fan-in bound of its first input.
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg_.branch.a1_width));
    std::uniform_real_distribution<double> dist(-bound, bound);
    ad::Tensor<T> w({cfg_.bilinear_width, cfg_.branch.a1_width, cfg_.b3_width});
    for (auto& v : w.values()) v = static_cast<T>(dist(rng));
    ad::Tensor<T> b({cfg_.bilinear_width});
    for (auto& v : b.values()) v = static_cast<T>(dist(rng));
    store_.add("bilinear.weight", std::move(w));
    store_.add("bilinear.bias", std::move(b));
  }
  add_batch_norm(store_, "bilinear.bn", cfg_.bilinear_width);
  add_dense(store_, "head", cfg_.bilinear_width, labels_.size(), rng);
}

template <typename T>
ad::Var BaselineModelT<T>::forward(ad::Tape<T>& tape, const Batch<T>& batch, const ad::Mode& mode) {
  const T rate = static_cast<T>(cfg_.dropout);
  ad::Var a = branch_forward(tape, store_, cfg_.branch, tape.constant(batch.features));
  ad::Var b = ad::relu(tape, dense_layer(tape, store_, "b1", tape.constant(batch.ais)));
  b = hidden_block(tape, store_, "b2", b, rate, mode);
  b = hidden_block(tape, store_, "b3", b, rate, mode);
  ad::Var z = ad::bilinear(tape, a, b, tape.param(store_.at("bilinear.weight")),
                           tape.param(store_.at("bilinear.bias")));
  z = batch_norm_layer(tape, store_, "bilinear.bn", z, mode);
  z = ad::dropout(tape, ad::relu(tape, z), rate, mode);
  ad::Var logits = dense_layer(tape, store_, "head", z);
  if (!tape.value(logits).all_finite()) throw NumericError("baseline head produced non-finite values");
  return logits;
}

template <typename T>
ad::Var BaselineModelT<T>::loss(ad::Tape<T>& tape, const Batch<T>& batch, const ad::Mode& mode) {
  return ad::softmax_cross_entropy(tape, forward(tape, batch, mode),
                                   std::span<const int>(batch.labels));
}

template <typename T>
std::vector<std::vector<double>> BaselineModelT<T>::probabilities(const data::Dataset& ds,
                                                                  std::span<const std::size_t> rows) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  const std::size_t m = num_classes();
  for (std::size_t i = 0; i < rows.size(); i += kEvalChunk) {
    const auto chunk = rows.subspan(i, std::min(kEvalChunk, rows.size() - i));
    const auto batch = make_batch<T>(ds, chunk, true);
    ad::Tape<T> tape;
    const auto p = tape.value(ad::softmax(tape, forward(tape, batch, ad::Mode{})));
    for (std::size_t b = 0; b < chunk.size(); ++b) {
      out.emplace_back(p.data() + b * m, p.data() + (b + 1) * m);
    }
  }
  return out;
}

template <typename T>
std::vector<int> BaselineModelT<T>::classify(const data::Dataset& ds) {
  const auto rows = all_rows(ds);
  std::vector<int> out;
  for (const auto& p : probabilities(ds, rows)) {
    out.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  }
  return out;
}

template <typename T>
TrainResult BaselineModelT<T>::train(const data::Dataset& ds, const StepCallback& on_step) {
  if (ds.num_classes() != num_classes()) {
    throw ContractViolation("dataset has " + std::to_string(ds.num_classes()) +
                            " classes but the model has " + std::to_string(num_classes()));
  }
  return train_loop(*this, ds, cfg_.train, on_step);
}

template <typename T>
nlohmann::json BaselineModelT<T>::manifest() const {
  const auto cfg = to_json(cfg_);
  return {{"format", "nfship-model"},
          {"model", "baseline"},
          {"scalar", sizeof(T) == 4 ? "f32" : "f64"},
          {"labels", labels_},
          {"config", cfg},
          {"seed", cfg_.train.seed},
          {"config_hash", config_hash(cfg)}};
}

template <typename T>
void BaselineModelT<T>::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  auto m = manifest();
  if (extra.is_object()) {
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  }
  ad::save_checkpoint(path, m, store_);
}

template <typename T>
BaselineModelT<T> BaselineModelT<T>::load(const std::filesystem::path& path) {
  const auto m = ad::read_checkpoint_manifest(path);
  if (m.value("format", "") != "nfship-model" || m.value("model", "") != "baseline") {
    throw FormatError(path.string() + " is not a baseline model checkpoint");
  }
  BaselineModelT model(m.at("labels").get<std::vector<std::string>>(),
                       baseline_config_from_json(m.at("config")));
  ad::load_checkpoint(path, model.store_);
  return model;
}

template class BaselineModelT<float>;
template class BaselineModelT<double>;

}  // namespace nfship::model
