#include <gtest/gtest.h>

#include "test_support.hpp"
#include "weedctx/checkpoint.hpp"

using namespace weedctx;

TEST(Checkpoint, HeaderSize) {
  // magic 4 + version 1 + h, w, c, n_conv, six filters, n_dense, two units.
  EXPECT_EQ(checkpoint_header_size(NetworkSpec::standard(300)), 4u + 1u + 4u * (3 + 1 + 6 + 1 + 2));
  EXPECT_EQ(checkpoint_header_size(NetworkSpec::standard(300)), 57u);
}

TEST(Checkpoint, LengthAndRoundTrip) {
  const auto spec = NetworkSpec::standard(30);
  const auto p = init_params<float>(spec, 4);
  const auto bytes = save_checkpoint(p);
  EXPECT_EQ(bytes.size(), checkpoint_header_size(spec) + 4 * param_count(spec));
  const auto q = load_checkpoint(bytes);
  EXPECT_EQ(q.spec, spec);
  EXPECT_EQ(q.values, p.values);
}

TEST(Checkpoint, Corruption) {
  const auto p = init_params<float>(NetworkSpec::reduced(), 5);
  const auto good = save_checkpoint(p);
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(load_checkpoint(bad), CheckpointError);
  bad = good;
  bad[4] = 9;
  EXPECT_THROW(load_checkpoint(bad), CheckpointError);
  bad = good;
  bad.pop_back();
  EXPECT_THROW(load_checkpoint(bad), CheckpointError);
  bad = good;
  bad.push_back(0);
  EXPECT_THROW(load_checkpoint(bad), CheckpointError);
  EXPECT_THROW(load_checkpoint(std::vector<std::uint8_t>(10, 0)), CheckpointError);
  bad = good;
  bad[5] = 0xff;  // absurd height
  EXPECT_THROW(load_checkpoint(bad), CheckpointError);
}

TEST(Checkpoint, Files) {
  testing_support::TempDir dir;
  const auto p = init_params<float>(NetworkSpec::reduced(), 6);
  write_checkpoint(dir.str("m.wdcx"), p);
  EXPECT_EQ(read_checkpoint(dir.str("m.wdcx")).values, p.values);
  EXPECT_THROW(read_checkpoint(dir.str("none.wdcx")), CheckpointError);
}
