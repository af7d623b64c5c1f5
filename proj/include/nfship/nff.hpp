#pragma once

// "NFF1" feature interchange files: RoI-pooled detector features keyed by
// image id and MMSI. Layout (all integers and floats little-endian):
//
//   "NFF1" | u32 record count | u32 channels | u32 height | u32 width
//   per record: u64 mmsi | u16 id length | id bytes | f32 confidence |
//               channels*height*width f32 values

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nfship::data {

struct FeatureShape {
  std::uint32_t channels = 256;
  std::uint32_t height = 7;
  std::uint32_t width = 7;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  bool operator==(const FeatureShape&) const = default;
};

// Shape of the RoI pooling output the pipeline is built around.
inline constexpr FeatureShape kRoiFeatureShape{256, 7, 7};

std::string to_string(const FeatureShape& shape);

struct ImageFeatureRecord {
  std::string image_id;
  std::uint64_t mmsi = 0;
  float confidence = 1.0f;
  std::vector<float> feature;
};

struct NffReadOptions {
  // Records with confidence below this are rejected as malformed.
  std::optional<float> min_confidence;
};

// Streams records to disk; the record count in the header is patched on
// finish(). Destruction without finish() leaves a file with count 0.
class NffWriter {
 public:
  NffWriter(const std::filesystem::path& path, FeatureShape shape);
  ~NffWriter();
  NffWriter(const NffWriter&) = delete;
  NffWriter& operator=(const NffWriter&) = delete;

  void write(const ImageFeatureRecord& record);
  void finish();
  std::uint32_t count() const { return count_; }

 private:
  std::ofstream out_;
  FeatureShape shape_;
  std::uint32_t count_ = 0;
  bool finished_ = false;
};

struct NffFile {
  FeatureShape shape;
  std::vector<ImageFeatureRecord> records;
};

void write_nff(const std::filesystem::path& path, FeatureShape shape,
               std::span<const ImageFeatureRecord> records);

NffFile read_nff(const std::filesystem::path& path, const NffReadOptions& options = {});

// Visits records one at a time without holding the whole file in memory.
// Returns the header shape.
FeatureShape for_each_nff_record(const std::filesystem::path& path,
                                 const std::function<void(ImageFeatureRecord&&)>& visit,
                                 const NffReadOptions& options = {});

}  // namespace nfship::data
