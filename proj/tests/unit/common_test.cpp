#include "nfship/common.hpp"

#include <gtest/gtest.h>

namespace nfship {
namespace {

TEST(Fnv1a64, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Hex64, SixteenLowercaseDigits) {
  EXPECT_EQ(hex64(0), "0000000000000000");
  EXPECT_EQ(hex64(0xcbf29ce484222325ULL), "cbf29ce484222325");
}

TEST(AisFields, NamesAndSymbolsLineUp) {
  EXPECT_EQ(kAisFieldNames[static_cast<std::size_t>(AisField::kDraught)], "draught");
  EXPECT_EQ(kAisFieldSymbols[static_cast<std::size_t>(AisField::kLength)], "l");
  EXPECT_EQ(kAisFieldSymbols[static_cast<std::size_t>(AisField::kToBow)], "tb");
}

}  // namespace
}  // namespace nfship
