#include "nfship/nff.hpp"

#include <cstring>

#include <gtest/gtest.h>

#include "nfship/common.hpp"
#include "test_util.hpp"

namespace nfship::data {
namespace {

using nfship::testing::read_bytes;
using nfship::testing::TempDir;
using nfship::testing::write_bytes;

std::vector<ImageFeatureRecord> sample_records(const FeatureShape& shape, std::size_t n) {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> normal;
  std::vector<ImageFeatureRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    ImageFeatureRecord r;
    r.image_id = "img_" + std::to_string(i);
    r.mmsi = 200000000 + i;
    r.confidence = 0.7f + 0.01f * static_cast<float>(i);
    r.feature.resize(shape.size());
    for (auto& v : r.feature) v = normal(rng);
    out.push_back(std::move(r));
  }
  return out;
}

TEST(Nff, RoiShapeHas12544Values) { EXPECT_EQ(kRoiFeatureShape.size(), 12544u); }

TEST(Nff, RoundTripIsBitExact) {
  TempDir dir;
  const auto records = sample_records(kRoiFeatureShape, 3);
  write_nff(dir / "f.nff", kRoiFeatureShape, records);
  const auto file = read_nff(dir / "f.nff");
  EXPECT_EQ(file.shape, kRoiFeatureShape);
  ASSERT_EQ(file.records.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(file.records[i].image_id, records[i].image_id);
    EXPECT_EQ(file.records[i].mmsi, records[i].mmsi);
    EXPECT_EQ(file.records[i].confidence, records[i].confidence);
    ASSERT_EQ(file.records[i].feature.size(), 12544u);
    EXPECT_EQ(std::memcmp(file.records[i].feature.data(), records[i].feature.data(),
                          12544 * sizeof(float)),
              0);
  }
}

TEST(Nff, HeaderLayoutIsLittleEndian) {
  TempDir dir;
  const FeatureShape shape{2, 1, 3};
  write_nff(dir / "f.nff", shape, sample_records(shape, 2));
  const auto bytes = read_bytes(dir / "f.nff");
  ASSERT_GE(bytes.size(), 20u);
  EXPECT_EQ(bytes.substr(0, 4), "NFF1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2);  // record count
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 2);  // channels
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 3);
  // Each record: 8 + 2 + id + 4 + 6 * 4 bytes.
  EXPECT_EQ(bytes.size(), 20u + 2 * (8 + 2 + 5 + 4 + 24));
}

TEST(Nff, StreamingVisitsRecordsInOrder) {
  TempDir dir;
  const FeatureShape shape{1, 2, 2};
  const auto records = sample_records(shape, 4);
  {
    NffWriter w(dir / "f.nff", shape);
    for (const auto& r : records) w.write(r);
    w.finish();
    EXPECT_EQ(w.count(), 4u);
  }
  std::vector<std::string> ids;
  const auto got = for_each_nff_record(dir / "f.nff", [&](ImageFeatureRecord&& r) {
    ids.push_back(r.image_id);
  });
  EXPECT_EQ(got, shape);
  EXPECT_EQ(ids, (std::vector<std::string>{"img_0", "img_1", "img_2", "img_3"}));
}

TEST(Nff, TruncatedFileIsRejected) {
  TempDir dir;
  const FeatureShape shape{1, 2, 2};
  write_nff(dir / "f.nff", shape, sample_records(shape, 2));
  auto bytes = read_bytes(dir / "f.nff");
  write_bytes(dir / "cut.nff", bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_nff(dir / "cut.nff"), FormatError);
}

TEST(Nff, BadMagicIsRejected) {
  TempDir dir;
  write_bytes(dir / "bad.nff", "NFF2" + std::string(16, '\0'));
  EXPECT_THROW(read_nff(dir / "bad.nff"), FormatError);
}

TEST(Nff, WrongFeatureLengthIsRejectedOnWrite) {
  TempDir dir;
  NffWriter w(dir / "f.nff", {1, 2, 2});
  ImageFeatureRecord r;
  r.image_id = "x";
  r.feature.assign(3, 0.0f);
  EXPECT_THROW(w.write(r), FormatError);
}

TEST(Nff, MinConfidenceRejectsLowRecords) {
  TempDir dir;
  const FeatureShape shape{1, 1, 1};
  auto records = sample_records(shape, 1);
  records[0].confidence = 0.6f;
  write_nff(dir / "f.nff", shape, records);
  EXPECT_NO_THROW(read_nff(dir / "f.nff"));
  EXPECT_THROW(read_nff(dir / "f.nff", {0.7f}), FormatError);
}

TEST(Nff, NonFiniteValuesAreRejected) {
  TempDir dir;
  const FeatureShape shape{1, 1, 2};
  auto records = sample_records(shape, 1);
  records[0].feature[1] = std::numeric_limits<float>::quiet_NaN();
  write_nff(dir / "f.nff", shape, records);
  EXPECT_THROW(read_nff(dir / "f.nff"), FormatError);
}

}  // namespace
}  // namespace nfship::data
