#include "nfship/ad/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "nfship/common.hpp"

namespace nfship::ad {
namespace {

constexpr char kMagic[4] = {'N', 'F', 'C', 'K'};

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
  }
}

template <typename T>
void put_scalar(std::string& out, T value) {
  if constexpr (sizeof(T) == 4) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, 4);
    put_le(out, bits);
  } else {
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    put_le(out, bits);
  }
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) throw FormatError("checkpoint: unexpected end of data");
  }

  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t crc_of(const std::string& bytes, std::size_t n) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(n)));
}

// Verifies framing and returns a reader positioned after the manifest.
Reader open_verified(const std::string& bytes, const std::filesystem::path& path,
                     nlohmann::json& manifest) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), kMagic, 4) == 0) {
      throw ChecksumError("checkpoint " + path.string() + " is truncated");
    }
    throw FormatError(path.string() + " is not a checkpoint file");
  }
  const std::size_t body = bytes.size() - 4;
  Reader trailer(bytes, bytes.size());
  trailer.take(body);
  const auto stored = trailer.get<std::uint32_t>();
  if (stored != crc_of(bytes, body)) {
    throw ChecksumError("checkpoint " + path.string() + " failed its checksum (truncated or corrupt)");
  }
  Reader r(bytes, body);
  r.take(4);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint " + path.string() + " has version " + std::to_string(version) +
                       "; this build reads version " + std::to_string(kCheckpointVersion));
  }
  const auto mlen = r.get<std::uint32_t>();
  manifest = nlohmann::json::parse(r.take(mlen));
  return r;
}

}  // namespace

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& manifest,
                     const ParamStore<T>& store) {
  std::string out(kMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  const std::string mtext = manifest.dump();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(mtext.size()));
  out += mtext;
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(store.params().size()));
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : store.params()) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
    out += p.name;
    out.push_back(static_cast<char>(p.trainable ? 1 : 0));
    out.push_back(static_cast<char>(sizeof(T)));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put_le<std::uint64_t>(out, d);
    for (T v : p.value.values()) put_scalar(out, v);
    tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"trainable", p.trainable}});
  }
  put_le<std::uint32_t>(out, crc_of(out, out.size()));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("failed writing checkpoint " + path.string());

  nlohmann::json side = manifest;
  side["checkpoint_version"] = kCheckpointVersion;
  side["scalar_bytes"] = sizeof(T);
  side["tensors"] = std::move(tensors);
  std::ofstream s(path.string() + ".json", std::ios::trunc);
  s << side.dump(2) << '\n';
}

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  nlohmann::json manifest;
  open_verified(bytes, path, manifest);
  return manifest;
}

template <typename T>
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore<T>& store) {
  const std::string bytes = read_file(path);
  nlohmann::json manifest;
  Reader r = open_verified(bytes, path, manifest);
  const auto count = r.get<std::uint32_t>();
  if (count != store.params().size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, model expects " +
                      std::to_string(store.params().size()));
  }
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.take(r.get<std::uint16_t>());
    r.get<std::uint8_t>();  // trainable flag; the model decides
    const auto width = r.get<std::uint8_t>();
    if (width != sizeof(T)) {
      throw FormatError("checkpoint tensor '" + name + "' stores " + std::to_string(width) +
                        "-byte scalars, model uses " + std::to_string(sizeof(T)));
    }
    Shape shape(r.get<std::uint32_t>());
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>());
    if (!store.contains(name)) throw FormatError("checkpoint tensor '" + name + "' is unknown");
    auto& p = store.at(name);
    if (p.value.shape() != shape) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(shape) +
                        ", model expects " + shape_string(p.value.shape()));
    }
    for (auto& v : p.value.values()) {
      if constexpr (sizeof(T) == 4) {
        const auto bits = r.get<std::uint32_t>();
        std::memcpy(&v, &bits, 4);
      } else {
        const auto bits = r.get<std::uint64_t>();
        std::memcpy(&v, &bits, 8);
      }
    }
    if (!seen.insert(name).second) throw FormatError("checkpoint repeats tensor '" + name + "'");
  }
  return manifest;
}

template void save_checkpoint<float>(const std::filesystem::path&, const nlohmann::json&,
                                     const ParamStore<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const nlohmann::json&,
                                      const ParamStore<double>&);
template nlohmann::json load_checkpoint<float>(const std::filesystem::path&, ParamStore<float>&);
template nlohmann::json load_checkpoint<double>(const std::filesystem::path&, ParamStore<double>&);

}  // namespace nfship::ad
