#pragma once

#include <cstdint>
#include <filesystem>

#include "json.hpp"
#include "nfship/ad/tape.hpp"

namespace nfship::ad {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout: "NFCK", u32 version, u32 manifest length, manifest JSON,
// u32 tensor count, then per tensor {u16 name length, name, u8 trainable,
// u8 scalar bytes, u32 rank, u64 dims, little-endian values}, closed by the
// CRC-32 of everything before it. A JSON sidecar `<path>.json` repeats the
// manifest and tensor shapes for inspection.
template <typename T>
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& manifest,
                     const ParamStore<T>& store);

// Reads only the manifest, after verifying magic, version and checksum.
nlohmann::json read_checkpoint_manifest(const std::filesystem::path& path);

// Restores every tensor into an existing store with matching names and
// shapes. Throws ChecksumError, VersionError or FormatError.
template <typename T>
nlohmann::json load_checkpoint(const std::filesystem::path& path, ParamStore<T>& store);

extern template void save_checkpoint<float>(const std::filesystem::path&, const nlohmann::json&,
                                            const ParamStore<float>&);
extern template void save_checkpoint<double>(const std::filesystem::path&, const nlohmann::json&,
                                             const ParamStore<double>&);
extern template nlohmann::json load_checkpoint<float>(const std::filesystem::path&,
                                                      ParamStore<float>&);
extern template nlohmann::json load_checkpoint<double>(const std::filesystem::path&,
                                                       ParamStore<double>&);

}  // namespace nfship::ad
