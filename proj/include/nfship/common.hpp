#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nfship {

// Number of AIS static fields fed to the rules and baselines.
inline constexpr std::size_t kAisFieldCount = 7;

// Fixed field order used everywhere a 7-vector of AIS values appears.
enum class AisField : std::size_t {
  kToBow = 0,
  kToStern = 1,
  kToStarboard = 2,
  kToPort = 3,
  kWidth = 4,
  kLength = 5,
  kDraught = 6,
};

using AisVector = std::array<double, kAisFieldCount>;

// Column names as they appear in CSV headers and JSON artifacts.
inline constexpr std::array<std::string_view, kAisFieldCount> kAisFieldNames = {
    "to_bow", "to_stern", "to_starboard", "to_port", "width", "length", "draught"};

// Short symbols used when rendering rules in table form.
inline constexpr std::array<std::string_view, kAisFieldCount> kAisFieldSymbols = {
    "tb", "te", "ts", "to", "w", "l", "d"};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class EmptyDatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ChecksumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a, rendered as 16 hex digits. Used for config hashes.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace nfship
