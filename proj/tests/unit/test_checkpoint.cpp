#include <sstream>

#include <gtest/gtest.h>

#include "phasecast/error.hpp"
#include "phasecast/seq/checkpoint.hpp"
#include "test_util.hpp"

namespace phasecast::seq {
namespace {

ModelConfig small() {
  ModelConfig c;
  c.n_phases = 4;
  c.hidden = 3;
  c.feature_dim = 5;
  c.noise_dim = 2;
  c.t_past = 6;
  c.t_future = 7;
  c.gumbel_tau = 0.75;
  return c;
}

std::string serialise(const Checkpoint& ck) {
  std::ostringstream os;
  write_checkpoint(os, ck);
  return os.str();
}

Checkpoint parse(const std::string& s) {
  std::istringstream is(s);
  return read_checkpoint(is);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(1);
  const ModelConfig cfg = small();
  const Checkpoint ck{cfg, GeneratorParams::init(cfg, rng), DiscriminatorParams::init(cfg, rng)};
  const Checkpoint back = parse(serialise(ck));
  EXPECT_EQ(back.config, cfg);
  ASSERT_TRUE(back.generator && back.discriminator);
  EXPECT_EQ(*back.generator, *ck.generator);
  EXPECT_EQ(*back.discriminator, *ck.discriminator);
  EXPECT_EQ(serialise(back), serialise(ck));
}

TEST(Checkpoint, GeneratorOnly) {
  Rng rng(2);
  const ModelConfig cfg = small();
  const Checkpoint back = parse(serialise(Checkpoint{cfg, GeneratorParams::init(cfg, rng), std::nullopt}));
  EXPECT_TRUE(back.generator);
  EXPECT_FALSE(back.discriminator);
}

TEST(Checkpoint, FileRoundTrip) {
  testing::TempDir dir("ckpt");
  Rng rng(3);
  const ModelConfig cfg = small();
  const Checkpoint ck{cfg, GeneratorParams::init(cfg, rng), std::nullopt};
  save_checkpoint(dir / "a.ckpt", ck);
  EXPECT_EQ(*load_checkpoint(dir / "a.ckpt").generator, *ck.generator);
  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
}

TEST(Checkpoint, RejectsCorruptInput) {
  Rng rng(4);
  const ModelConfig cfg = small();
  const std::string good = serialise(Checkpoint{cfg, GeneratorParams::init(cfg, rng), std::nullopt});

  EXPECT_THROW(parse("not-a-checkpoint 1\n"), ParseError);
  EXPECT_THROW(parse("phasecast-checkpoint 99\n"), ParseError);
  EXPECT_THROW(parse(good.substr(0, good.size() / 2)), ParseError);

  std::string wrong_shape = good;
  const auto pos = wrong_shape.find("tensor generator.head.b 1 4");
  ASSERT_NE(pos, std::string::npos);
  wrong_shape.replace(pos, 27, "tensor generator.head.b 1 5");
  EXPECT_THROW(parse(wrong_shape), Error);

  std::string unknown = good;
  unknown.replace(unknown.find("generator.head.b"), 16, "generator.head.q");
  EXPECT_THROW(parse(unknown), Error);

  std::string bad_number = good;
  const auto first_row = bad_number.find('\n', bad_number.find("tensor generator.encoder.W")) + 1;
  bad_number.replace(first_row, 1, "x");
  EXPECT_THROW(parse(bad_number), ParseError);
}

}  // namespace
}  // namespace phasecast::seq
