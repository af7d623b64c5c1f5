#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfship/ad/adam.hpp"
#include "nfship/ad/tape.hpp"
#include "nfship/common.hpp"
#include "nfship/data_model.hpp"

namespace nfship::model {

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  std::uint64_t seed = 0;
  bool dropout = true;

  void validate() const;
};

nlohmann::json to_json(const TrainOptions& o);
TrainOptions train_options_from_json(const nlohmann::json& j);

struct StepInfo {
  std::size_t epoch = 0;  // 1-based
  std::size_t batch = 0;  // 0-based within the epoch
  std::uint64_t step = 0; // optimiser steps taken so far
  double loss = 0.0;
};

using StepCallback = std::function<void(const StepInfo&)>;

struct TrainResult {
  std::vector<double> epoch_loss;  // sample-weighted mean batch loss per epoch
  std::uint64_t steps = 0;
};

// Shuffled mini-batches over n rows. A trailing batch of one row is merged
// into the previous batch so batch statistics stay defined.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::mt19937_64& rng);

template <typename T>
struct Batch {
  ad::Tensor<T> features;  // [B, C, H, W]; empty when not requested
  ad::Tensor<T> ais;       // [B, 7]
  std::vector<int> labels;
};

template <typename T>
Batch<T> make_batch(const data::Dataset& ds, std::span<const std::size_t> rows, bool with_features);

std::vector<std::size_t> all_rows(const data::Dataset& ds);

// "epoch,loss" with one line per epoch.
void write_loss_csv(const std::filesystem::path& path, std::span<const double> epoch_loss);
std::vector<double> read_loss_csv(const std::filesystem::path& path);

// Mini-batch Adam on the model's cross-entropy loss. The model provides
// store(), needs_features() and loss(tape, batch, mode); after each step
// model.after_step() runs and then `on_step`.
template <typename Model>
TrainResult train_loop(Model& model, const data::Dataset& ds, const TrainOptions& options,
                       const StepCallback& on_step = {}) {
  using T = typename Model::Scalar;
  options.validate();
  if (ds.empty()) throw EmptyDatasetError("cannot train on an empty dataset");
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ULL);
  ad::Adam<T> adam({options.learning_rate});
  ad::Mode mode{true, options.dropout, &rng};
  auto& store = model.store();
  TrainResult result;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto batches = make_batches(ds.size(), options.batch_size, rng);
    double total = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto batch = make_batch<T>(ds, batches[b], model.needs_features());
      store.zero_grad();
      double loss = 0.0;
      try {
        ad::Tape<T> tape;
        const ad::Var l = model.loss(tape, batch, mode);
        loss = static_cast<double>(tape.value(l)[0]);
        if (!std::isfinite(loss)) throw NumericError("loss is not finite");
        tape.backward(l);
        adam.step(store);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) +
                           ": " + e.what());
      }
      model.after_step();
      total += loss * static_cast<double>(batches[b].size());
      ++result.steps;
      if (on_step) on_step({epoch, b, result.steps, loss});
    }
    result.epoch_loss.push_back(total / static_cast<double>(ds.size()));
  }
  return result;
}

}  // namespace nfship::model
