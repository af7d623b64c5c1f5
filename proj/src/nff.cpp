#include "nfship/nff.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "nfship/common.hpp"

namespace nfship::data {
namespace {

constexpr char kMagic[4] = {'N', 'F', 'F', '1'};

template <typename U>
void put_le(std::ostream& out, U value) {
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const char* what) {
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw FormatError(std::string("NFF1: truncated while reading ") + what);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(bytes[i]) << (8 * i);
  }
  return value;
}

void put_f32(std::ostream& out, float value) {
  put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(value));
}

void put_f32_block(std::ostream& out, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    for (float v : values) put_f32(out, v);
  }
}

void get_f32_block(std::istream& in, std::span<float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(values.data()),
                 static_cast<std::streamsize>(values.size() * sizeof(float)))) {
      throw FormatError("NFF1: truncated feature block");
    }
  } else {
    for (float& v : values) v = std::bit_cast<float>(get_le<std::uint32_t>(in, "feature"));
  }
}

void write_header(std::ostream& out, std::uint32_t count, FeatureShape shape) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, count);
  put_le<std::uint32_t>(out, shape.channels);
  put_le<std::uint32_t>(out, shape.height);
  put_le<std::uint32_t>(out, shape.width);
}

void write_record(std::ostream& out, FeatureShape shape, const ImageFeatureRecord& r) {
  if (r.feature.size() != shape.size()) {
    throw FormatError("NFF1: record '" + r.image_id + "' has " +
                      std::to_string(r.feature.size()) + " values, expected " +
                      std::to_string(shape.size()));
  }
  if (r.image_id.size() > 0xffff) throw FormatError("NFF1: image id longer than 65535 bytes");
  put_le<std::uint64_t>(out, r.mmsi);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(r.image_id.size()));
  out.write(r.image_id.data(), static_cast<std::streamsize>(r.image_id.size()));
  put_f32(out, r.confidence);
  put_f32_block(out, r.feature);
}

}  // namespace

std::string to_string(const FeatureShape& shape) {
  return std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" +
         std::to_string(shape.width);
}

NffWriter::NffWriter(const std::filesystem::path& path, FeatureShape shape)
    : out_(path, std::ios::binary | std::ios::trunc), shape_(shape) {
  if (!out_) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  write_header(out_, 0, shape_);
}

NffWriter::~NffWriter() {
  if (!finished_) {
    try {
      finish();
    } catch (...) {
    }
  }
}

void NffWriter::write(const ImageFeatureRecord& record) {
  write_record(out_, shape_, record);
  ++count_;
}

void NffWriter::finish() {
  if (finished_) return;
  finished_ = true;
  out_.seekp(4);
  put_le<std::uint32_t>(out_, count_);
  out_.flush();
  if (!out_) throw std::runtime_error("NFF1: write failed");
  out_.close();
}

void write_nff(const std::filesystem::path& path, FeatureShape shape,
               std::span<const ImageFeatureRecord> records) {
  NffWriter writer(path, shape);
  for (const auto& r : records) writer.write(r);
  writer.finish();
}

FeatureShape for_each_nff_record(const std::filesystem::path& path,
                                 const std::function<void(ImageFeatureRecord&&)>& visit,
                                 const NffReadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("'" + path.string() + "' is not an NFF1 file (bad magic)");
  }
  const auto count = get_le<std::uint32_t>(in, "record count");
  FeatureShape shape;
  shape.channels = get_le<std::uint32_t>(in, "dims");
  shape.height = get_le<std::uint32_t>(in, "dims");
  shape.width = get_le<std::uint32_t>(in, "dims");
  if (shape.size() == 0) throw FormatError("NFF1: zero-sized feature dims");

  for (std::uint32_t i = 0; i < count; ++i) {
    ImageFeatureRecord r;
    r.mmsi = get_le<std::uint64_t>(in, "mmsi");
    const auto id_len = get_le<std::uint16_t>(in, "id length");
    r.image_id.resize(id_len);
    if (id_len > 0 && !in.read(r.image_id.data(), id_len)) {
      throw FormatError("NFF1: truncated image id");
    }
    r.confidence = std::bit_cast<float>(get_le<std::uint32_t>(in, "confidence"));
    if (!(r.confidence >= 0.0f && r.confidence <= 1.0f)) {
      throw FormatError("NFF1: record '" + r.image_id + "' confidence outside [0,1]");
    }
    if (options.min_confidence && r.confidence < *options.min_confidence) {
      throw FormatError("NFF1: record '" + r.image_id + "' confidence below retention threshold");
    }
    r.feature.resize(shape.size());
    get_f32_block(in, r.feature);
    for (float v : r.feature) {
      if (!std::isfinite(v)) {
        throw FormatError("NFF1: record '" + r.image_id + "' has non-finite feature values");
      }
    }
    visit(std::move(r));
  }
  return shape;
}

NffFile read_nff(const std::filesystem::path& path, const NffReadOptions& options) {
  NffFile file;
  file.shape = for_each_nff_record(
      path, [&](ImageFeatureRecord&& r) { file.records.push_back(std::move(r)); }, options);
  return file;
}

}  // namespace nfship::data
