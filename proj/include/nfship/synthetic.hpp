#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "nfship/common.hpp"
#include "nfship/data_model.hpp"
#include "nfship/nff.hpp"

namespace nfship::synthetic {

enum class Profile {
  kUniform,  // equal vessel counts per class
  kTable3,   // 2412 : 864 : 53 : 42 : 32 over the five ship types
};

std::string to_string(Profile p);
Profile parse_profile(const std::string& text);

struct SyntheticOptions {
  std::size_t vessels = 500;
  std::size_t classes = 5;
  // AIS noise level in [0, 1]: multiplicative Gaussian jitter with standard
  // deviation noise * kJitterScale on the transceiver distances and draught.
  double noise = 0.0;
  std::uint64_t seed = 0;
  Profile profile = Profile::kUniform;
  data::FeatureShape shape = data::kRoiFeatureShape;
  std::size_t min_images = 1;
  std::size_t max_images = 5;
  // Standard deviation of per-vessel feature noise around the class
  // template; per-image noise uses half of it.
  double feature_noise = 1.0;
  std::uint64_t first_mmsi = 200000000;

  void validate() const;
};

inline constexpr double kJitterScale = 0.2;

nlohmann::json to_json(const SyntheticOptions& o);

// The generated ship-type names: the five customary types, then Class6, ...
std::vector<std::string> class_names(std::size_t classes);

// Vessels per class. Table 3 ratios are apportioned by largest remainder;
// classes beyond the fifth get the smallest ratio.
std::vector<std::size_t> class_counts(const SyntheticOptions& o);

struct SyntheticData {
  data::AisTable ais;
  std::vector<data::ImageFeatureRecord> images;
  std::vector<AisVector> clean_ais;  // pre-noise fields, parallel to ais.records
  nlohmann::json truth;
};

// Threshold-separable AIS boxes per class (disjoint at noise 0, after
// rounding to whole meters and 0.1 m draught), width = starboard + port and
// length = bow + stern, plus class-template image features. All randomness
// comes from one mt19937_64 seeded with options.seed.
SyntheticData generate(const SyntheticOptions& options);

struct WrittenFiles {
  std::filesystem::path ais_csv;
  std::filesystem::path features;
  std::filesystem::path truth;
};

// Writes ais.csv, features.nff and truth.json into `dir`.
WrittenFiles write(const SyntheticData& data, const data::FeatureShape& shape,
                   const std::filesystem::path& dir);

}  // namespace nfship::synthetic
