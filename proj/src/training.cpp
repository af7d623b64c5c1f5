#include "nfship/training.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace nfship::model {

void TrainOptions::validate() const {
  if (epochs == 0) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 2) throw std::invalid_argument("batch size must be at least 2");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
}

nlohmann::json to_json(const TrainOptions& o) {
  return {{"epochs", o.epochs},
          {"batch_size", o.batch_size},
          {"learning_rate", o.learning_rate},
          {"seed", o.seed},
          {"dropout", o.dropout}};
}

TrainOptions train_options_from_json(const nlohmann::json& j) {
  TrainOptions o;
  o.epochs = j.at("epochs").get<std::size_t>();
  o.batch_size = j.at("batch_size").get<std::size_t>();
  o.learning_rate = j.at("learning_rate").get<double>();
  o.seed = j.at("seed").get<std::uint64_t>();
  o.dropout = j.value("dropout", true);
  return o;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(n, i + batch_size)));
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back()[0]);
    batches.pop_back();
  }
  return batches;
}

template <typename T>
Batch<T> make_batch(const data::Dataset& ds, std::span<const std::size_t> rows, bool with_features) {
  Batch<T> b;
  const std::size_t n = rows.size();
  b.ais = ad::Tensor<T>({n, kAisFieldCount});
  b.labels.reserve(n);
  if (with_features) {
    b.features = ad::Tensor<T>({n, ds.shape.channels, ds.shape.height, ds.shape.width});
  }
  const std::size_t fs = ds.shape.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = ds.rows.at(rows[i]);
    for (std::size_t f = 0; f < kAisFieldCount; ++f) {
      b.ais[i * kAisFieldCount + f] = static_cast<T>(row.ais[f]);
    }
    b.labels.push_back(row.label);
    if (with_features) {
      if (row.feature.size() != fs) {
        throw FormatError("row " + row.image_id + " has " + std::to_string(row.feature.size()) +
                          " feature values, expected " + std::to_string(fs));
      }
      std::copy(row.feature.begin(), row.feature.end(), b.features.data() + i * fs);
    }
  }
  return b;
}

template Batch<float> make_batch<float>(const data::Dataset&, std::span<const std::size_t>, bool);
template Batch<double> make_batch<double>(const data::Dataset&, std::span<const std::size_t>, bool);

std::vector<std::size_t> all_rows(const data::Dataset& ds) {
  std::vector<std::size_t> rows(ds.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const double> epoch_loss) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,loss\n";
  out.precision(17);
  for (std::size_t i = 0; i < epoch_loss.size(); ++i) out << i + 1 << ',' << epoch_loss[i] << '\n';
}

std::vector<double> read_loss_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,loss", 0) != 0) {
    throw FormatError(path.string() + ": expected header 'epoch,loss'");
  }
  std::vector<double> losses;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": missing comma");
    }
    try {
      losses.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad loss value");
    }
  }
  return losses;
}

}  // namespace nfship::model
