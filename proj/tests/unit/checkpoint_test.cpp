#include "nfship/ad/checkpoint.hpp"

#include <gtest/gtest.h>

#include "nfship/common.hpp"
#include "test_util.hpp"

namespace nfship::ad {
namespace {

using nfship::testing::read_bytes;
using nfship::testing::TempDir;
using nfship::testing::write_bytes;

ParamStore<float> sample_store() {
  ParamStore<float> s;
  s.add("a.weight", Tensor<float>({2, 3}, {1, 2, 3, 4, 5, 6.5f}));
  s.add("a.bias", Tensor<float>({3}, {-1, 0, 1e-7f}));
  s.add("bn.running_var", Tensor<float>({3}, {1, 1, 2}), false);
  return s;
}

TEST(Checkpoint, RoundTripRestoresValuesAndManifest) {
  TempDir dir;
  const nlohmann::json manifest = {{"model", "test"}, {"seed", 7}};
  save_checkpoint(dir / "c.ckpt", manifest, sample_store());
  EXPECT_TRUE(std::filesystem::exists(dir / "c.ckpt.json"));
  EXPECT_EQ(read_checkpoint_manifest(dir / "c.ckpt"), manifest);

  ParamStore<float> fresh;
  fresh.add("a.weight", Tensor<float>({2, 3}));
  fresh.add("a.bias", Tensor<float>({3}));
  fresh.add("bn.running_var", Tensor<float>({3}), false);
  EXPECT_EQ(load_checkpoint(dir / "c.ckpt", fresh), manifest);
  const auto ref = sample_store();
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(fresh.params()[i].value.storage(), ref.params()[i].value.storage());
  }
}

TEST(Checkpoint, SavingTwiceIsByteIdentical) {
  TempDir dir;
  save_checkpoint(dir / "a.ckpt", {{"k", 1}}, sample_store());
  save_checkpoint(dir / "b.ckpt", {{"k", 1}}, sample_store());
  EXPECT_EQ(read_bytes(dir / "a.ckpt"), read_bytes(dir / "b.ckpt"));
}

TEST(Checkpoint, TruncatedFileFailsChecksum) {
  TempDir dir;
  save_checkpoint(dir / "c.ckpt", {}, sample_store());
  const auto bytes = read_bytes(dir / "c.ckpt");
  write_bytes(dir / "cut.ckpt", bytes.substr(0, bytes.size() - 9));
  ParamStore<float> s = sample_store();
  EXPECT_THROW(load_checkpoint(dir / "cut.ckpt", s), ChecksumError);
  EXPECT_THROW(read_checkpoint_manifest(dir / "cut.ckpt"), ChecksumError);
}

TEST(Checkpoint, FlippedBitFailsChecksum) {
  TempDir dir;
  save_checkpoint(dir / "c.ckpt", {}, sample_store());
  auto bytes = read_bytes(dir / "c.ckpt");
  bytes[bytes.size() / 2] ^= 0x10;
  write_bytes(dir / "bad.ckpt", bytes);
  ParamStore<float> s = sample_store();
  EXPECT_THROW(load_checkpoint(dir / "bad.ckpt", s), ChecksumError);
}

TEST(Checkpoint, ShapeMismatchIsAFormatError) {
  TempDir dir;
  save_checkpoint(dir / "c.ckpt", {}, sample_store());
  ParamStore<float> s;
  s.add("a.weight", Tensor<float>({3, 2}));
  s.add("a.bias", Tensor<float>({3}));
  s.add("bn.running_var", Tensor<float>({3}), false);
  EXPECT_THROW(load_checkpoint(dir / "c.ckpt", s), FormatError);
}

TEST(Checkpoint, ScalarWidthMismatchIsAFormatError) {
  TempDir dir;
  save_checkpoint(dir / "c.ckpt", {}, sample_store());
  ParamStore<double> s;
  s.add("a.weight", Tensor<double>({2, 3}));
  s.add("a.bias", Tensor<double>({3}));
  s.add("bn.running_var", Tensor<double>({3}), false);
  EXPECT_THROW(load_checkpoint(dir / "c.ckpt", s), FormatError);
}

TEST(Checkpoint, OtherVersionIsRejected) {
  TempDir dir;
  save_checkpoint(dir / "c.ckpt", {}, sample_store());
  auto bytes = read_bytes(dir / "c.ckpt");
  bytes[4] = 2;  // version field follows the magic
  write_bytes(dir / "v2.ckpt", bytes);
  EXPECT_THROW(read_checkpoint_manifest(dir / "v2.ckpt"), std::runtime_error);
}

TEST(Checkpoint, BadMagicIsRejected) {
  TempDir dir;
  write_bytes(dir / "x.ckpt", "NOPE0000");
  EXPECT_THROW(read_checkpoint_manifest(dir / "x.ckpt"), std::runtime_error);
}

}  // namespace
}  // namespace nfship::ad
