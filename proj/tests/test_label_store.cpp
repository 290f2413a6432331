#include <gtest/gtest.h>

#include <fstream>
#include <thread>

#include "test_support.hpp"
#include "weedctx/formats.hpp"
#include "weedctx/label_store.hpp"

using namespace weedctx;

namespace {

std::string make_labels(const testing_support::TempDir& dir, int cols = 6, int rows = 6) {
  const auto tiles = grid_tiles("img", ImageSize{30 * cols, 30 * rows}, 30);
  const std::string path = dir.str("labels.csv");
  write_text_file_atomic(path, format_labels_csv(tiles));
  return path;
}

std::size_t audit_rows(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n == 0 ? 0 : n - 1;
}

}  // namespace

TEST(LabelStore, LastWriteWinsAndAuditKeepsHistory) {
  testing_support::TempDir dir;
  const auto path = make_labels(dir);
  LabelStore store(path);
  EXPECT_TRUE(store.set_label("img_r0_c0", 1, "alice"));
  EXPECT_TRUE(store.set_label("img_r0_c0", 0, "bob"));
  EXPECT_EQ(store.label_of("img_r0_c0"), 0);
  EXPECT_EQ(audit_rows(store.audit_path()), 2u);
  const std::string audit = read_text_file(store.audit_path());
  EXPECT_NE(audit.find(",img_r0_c0,1,alice\n"), std::string::npos);
  EXPECT_NE(audit.find(",img_r0_c0,0,bob\n"), std::string::npos);
}

TEST(LabelStore, RepeatIsIdempotent) {
  testing_support::TempDir dir;
  LabelStore store(make_labels(dir));
  EXPECT_TRUE(store.set_label("img_r1_c1", 1));
  EXPECT_FALSE(store.set_label("img_r1_c1", 1));
  EXPECT_EQ(audit_rows(store.audit_path()), 1u);
  EXPECT_TRUE(store.set_label("img_r1_c1", std::nullopt));
  EXPECT_FALSE(store.label_of("img_r1_c1").has_value());
}

TEST(LabelStore, PersistsAcrossRestart) {
  testing_support::TempDir dir;
  const auto path = make_labels(dir);
  {
    LabelStore store(path);
    store.set_label("img_r2_c3", 1);
    store.set_label("img_r0_c0", 0);
  }
  LabelStore again(path);
  EXPECT_EQ(again.label_of("img_r2_c3"), 1);
  const auto p = again.progress();
  EXPECT_EQ(p.labeled, 2u);
  EXPECT_EQ(p.total, 36u);
  EXPECT_EQ(p.weed, 1u);
  EXPECT_EQ(p.nonweed, 1u);
  EXPECT_EQ(again.next_unlabeled()->tile_id(), "img_r0_c1");
}

TEST(LabelStore, Errors) {
  testing_support::TempDir dir;
  LabelStore store(make_labels(dir));
  EXPECT_THROW(store.set_label("nope", 1), UnknownTileError);
  EXPECT_THROW(store.set_label("img_r0_c0", 3), DataError);
  EXPECT_THROW(store.label_of("nope"), UnknownTileError);
  write_text_file_atomic(dir.str("bad.csv"), "garbage\n");
  EXPECT_THROW(LabelStore(dir.str("bad.csv")), DataError);
  EXPECT_THROW(LabelStore(dir.str("missing.csv")), DataError);
}

TEST(LabelStore, InterruptedWriteLeavesConsistentFile) {
  testing_support::TempDir dir;
  const auto path = make_labels(dir);
  {
    LabelStore store(path);
    store.set_label("img_r0_c0", 1);
  }
  // A crash mid-write leaves only a partial temp file behind.
  std::ofstream(path + ".tmp") << "tile_id,image_id,gri";
  LabelStore again(path);
  EXPECT_EQ(again.label_of("img_r0_c0"), 1);
  again.set_label("img_r0_c1", 0);
  EXPECT_EQ(parse_labels_csv(read_text_file(path)).size(), 36u);
}

TEST(LabelStore, ConcurrentWritersAllPersist) {
  testing_support::TempDir dir;
  const auto path = make_labels(dir, 8, 8);
  LabelStore store(path);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&store, t] {
      for (int c = 0; c < 8; ++c) store.set_label("img_r" + std::to_string(t) + "_c" + std::to_string(c), c % 2);
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(store.progress().labeled, 64u);
  EXPECT_EQ(audit_rows(store.audit_path()), 64u);
  LabelStore again(path);
  EXPECT_EQ(again.progress().labeled, 64u);
  EXPECT_FALSE(again.next_unlabeled().has_value());
}
