#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "nfship/common.hpp"
#include "nfship/nff.hpp"

namespace nfship::data {

// One vessel's retained static AIS fields. Distances are in meters.
struct AisStaticRecord {
  std::uint64_t mmsi = 0;
  AisVector fields{};
  std::string ship_type;
};

struct AisTable {
  std::vector<AisStaticRecord> records;
  // Label set in canonical order; every record's ship_type is in here.
  std::vector<std::string> labels;
  std::size_t dropped_incomplete = 0;
  std::size_t parse_errors = 0;
  std::size_t duplicates = 0;

  int label_index(const std::string& ship_type) const;
};

// The five ship types come first in their customary order, any other label
// follows in lexicographic order.
std::vector<std::string> canonical_label_order(std::vector<std::string> labels);

// Reads a UTF-8 CSV with a named header. Required columns: mmsi, the seven
// AIS fields and ship_type (any order, extra columns ignored). Rows with an
// empty retained field are dropped; rows with non-numeric or negative
// values are counted as parse errors and skipped. Duplicate MMSIs keep the
// first row.
AisTable parse_ais_csv(std::istream& in);
AisTable load_ais_csv(const std::filesystem::path& path);

void write_ais_csv(const std::filesystem::path& path, std::span<const AisStaticRecord> records);

enum class DatasetVariant { kImageCentred, kVesselCentred };

std::string to_string(DatasetVariant variant);
DatasetVariant parse_variant(const std::string& text);

struct DatasetRow {
  std::uint64_t mmsi = 0;
  std::string image_id;
  AisVector ais{};
  int label = 0;
  float confidence = 1.0f;
  std::vector<float> feature;
};

struct Dataset {
  DatasetVariant variant = DatasetVariant::kVesselCentred;
  std::vector<std::string> label_names;
  FeatureShape shape = kRoiFeatureShape;
  std::vector<DatasetRow> rows;

  std::size_t num_classes() const { return label_names.size(); }
  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }
};

struct BuildStats {
  std::size_t excluded_images = 0;
};

// Inner join on MMSI: one row per image whose vessel is in the AIS table.
Dataset build_image_centred(std::span<const ImageFeatureRecord> images, const AisTable& ais,
                            FeatureShape shape = kRoiFeatureShape, BuildStats* stats = nullptr);

// Per-MMSI elementwise mean of the image features, joined with the AIS table.
// Rows come out in ascending MMSI order.
Dataset build_vessel_centred(std::span<const ImageFeatureRecord> images, const AisTable& ais,
                             FeatureShape shape = kRoiFeatureShape, BuildStats* stats = nullptr);

std::vector<std::size_t> vessels_per_class(const Dataset& ds);

// Drops every class with at most `min_vessels` distinct vessels and
// re-compacts label indices. Throws EmptyDatasetError if nothing remains.
Dataset filter_rare_classes(const Dataset& ds, std::size_t min_vessels = 20);

struct SplitSpec {
  double train_fraction = 0.75;
  std::uint64_t seed = 0;
  bool by_mmsi = true;
};

struct SplitResult {
  Dataset train;
  Dataset test;
  // Parallel to the input rows: true where the row went to train.
  std::vector<bool> in_train;
  std::vector<std::string> warnings;
};

// Stratified, seeded split. Units are vessels when by_mmsi is set, rows
// otherwise. Each class's units are shuffled and the first quota go to train;
// quotas are apportioned by largest remainder so the train total is
// round(fraction * units).
SplitResult split(const Dataset& ds, const SplitSpec& spec);

// Rebuilds train/test views from a stored partition.
SplitResult apply_partition(const Dataset& ds, const std::vector<bool>& in_train);

// Distinct vessels' AIS vectors and labels, in first-appearance order.
struct VesselTable {
  std::vector<std::uint64_t> mmsi;
  std::vector<AisVector> ais;
  std::vector<int> labels;
};
VesselTable distinct_vessels(const Dataset& ds);

struct StoredDataset {
  Dataset data;
  std::vector<bool> in_train;  // empty when no split was recorded
  SplitSpec split;
  std::string config_hash;
};

inline constexpr int kDatasetManifestVersion = 1;

// Writes `manifest` (JSON) and the feature blob next to it (same stem, .nff).
void save_dataset(const std::filesystem::path& manifest, const StoredDataset& stored);
StoredDataset load_dataset(const std::filesystem::path& manifest);

}  // namespace nfship::data
