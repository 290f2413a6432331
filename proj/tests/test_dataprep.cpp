#include <gtest/gtest.h>
#include <omp.h>

#include <algorithm>
#include <set>

#include "test_support.hpp"
#include "weedctx/dataprep.hpp"

using namespace weedctx;
using testing_support::block_mean_oracle;
using testing_support::clamped_canvas;
using testing_support::random_image;

namespace {

std::vector<std::string> make_ids(int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("im" + std::to_string(i));
  return ids;
}

RasterImage center_of(const RasterImage& ctx, int b, int t) { return crop(ctx, {b, b, t, t}); }

TileRecord labeled(const std::string& image, int row, int col, int label, int tile = 30) {
  TileRecord t;
  t.image_id = image;
  t.grid_row = row;
  t.grid_col = col;
  t.origin_x = col * tile;
  t.origin_y = row * tile;
  t.label = label;
  return t;
}

}  // namespace

// ------------------------------------------------------------ splits

TEST(Splits, FloorRuleOn224) {
  const auto a = assign_splits(make_ids(224), {}, 42);
  EXPECT_EQ(a.sizes(), (SplitSizes{156, 33, 35}));
}

TEST(Splits, PublishedOverride) {
  const auto a = assign_splits(make_ids(224), {}, 42, SplitSizes{158, 33, 33});
  EXPECT_EQ(a.sizes(), (SplitSizes{158, 33, 33}));
  EXPECT_EQ(a.assignment.size(), 224u);
}

TEST(Splits, ExactThirds) {
  const auto a = assign_splits(make_ids(3), {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1);
  EXPECT_EQ(a.sizes(), (SplitSizes{1, 1, 1}));
}

TEST(Splits, Deterministic) {
  const auto ids = make_ids(50);
  EXPECT_EQ(assign_splits(ids, {}, 9).assignment, assign_splits(ids, {}, 9).assignment);
  EXPECT_NE(assign_splits(ids, {}, 9).assignment, assign_splits(ids, {}, 10).assignment);
}

TEST(Splits, Errors) {
  EXPECT_ANY_THROW(assign_splits({}, {}, 1));
  EXPECT_ANY_THROW(assign_splits(make_ids(10), {0.5, 0.5, 0.5}, 1));
  EXPECT_ANY_THROW(assign_splits(make_ids(10), {}, 1, SplitSizes{5, 5, 5}));
  const std::vector<std::string> dup{"a", "b", "a"};
  EXPECT_ANY_THROW(assign_splits(dup, {}, 1));
}

TEST(Splits, ParseNames) {
  EXPECT_EQ(parse_split("val"), Split::Validation);
  EXPECT_EQ(to_string(Split::Test), "test");
  EXPECT_ANY_THROW(parse_split("holdout"));
}

// ------------------------------------------------------------ tiling

TEST(Grid, Counts) {
  EXPECT_EQ(grid_tiles("a", ImageSize{4000, 6000}, 300).size(), 260u);
  EXPECT_EQ(grid_tiles("a", ImageSize{300, 300}, 300).size(), 1u);
  const auto t = grid_tiles("a", ImageSize{650, 950}, 300);
  ASSERT_EQ(t.size(), 6u);
  for (const auto& r : t) {
    EXPECT_LE(r.origin_x + 300, 650);
    EXPECT_LE(r.origin_y + 300, 950);
  }
}

TEST(Grid, IdsAndOrigins) {
  const auto t = grid_tiles("img7", ImageSize{90, 60}, 30);
  ASSERT_EQ(t.size(), 6u);
  EXPECT_EQ(t[4].tile_id(), "img7_r1_c1");
  EXPECT_EQ(t[4].origin_x, 30);
  EXPECT_EQ(t[4].origin_y, 30);
  TileRecord j = t[0];
  j.jittered = true;
  j.jitter_index = 3;
  EXPECT_EQ(j.tile_id(), "img7_r0_c0_j3");
}

// ------------------------------------------------------------ context

TEST(Context, ParseModes) {
  EXPECT_EQ(parse_context_mode("edge"), ContextMode::EdgeStretched);
  EXPECT_EQ(to_string(ContextMode::FullStretched), "full");
  EXPECT_ANY_THROW(parse_context_mode("wide"));
}

TEST(Context, NoneIsTileCrop) {
  const auto img = random_image(90, 90, 1);
  EXPECT_EQ(extract_context(img, PixelRect{30, 0, 30, 30}, ContextMode::None, {30, 30, 30}),
            crop(img, {30, 0, 30, 30}));
}

TEST(Context, InteriorModesAgreeWithPlainDownscale) {
  const auto img = random_image(120, 120, 2);
  const ContextSpec spec{30, 30, 30};
  for (int y : {30, 60}) {
    for (int x : {30, 60}) {
      const PixelRect tile{x, y, 30, 30};
      const auto oracle = block_mean_oracle(crop(img, {x - 30, y - 30, 90, 90}), 3);
      EXPECT_EQ(extract_context(img, tile, ContextMode::FullStretched, spec), oracle);
      EXPECT_EQ(extract_context(img, tile, ContextMode::EdgeStretched, spec), oracle);
    }
  }
}

TEST(Context, FullStretchedCornerUsesAvailableWindow) {
  const auto img = random_image(90, 90, 3);
  EXPECT_EQ(available_window({0, 0, 30, 30}, 30, {90, 90}), (PixelRect{0, 0, 60, 60}));
  const auto out = extract_context(img, PixelRect{0, 0, 30, 30}, ContextMode::FullStretched, {30, 30, 30});
  EXPECT_EQ(out, block_mean_oracle(crop(img, {0, 0, 60, 60}), 2));
}

TEST(Context, EdgeStretchedMatchesClampOracleAtEveryGridPosition) {
  const auto img = random_image(90, 90, 4);
  const ContextSpec spec{30, 30, 30};
  for (const auto& t : grid_tiles("x", img, 30)) {
    const PixelRect r = t.rect(30);
    const auto out = extract_context(img, r, ContextMode::EdgeStretched, spec);
    EXPECT_EQ(out, block_mean_oracle(clamped_canvas(img, r, 30), 3)) << t.tile_id();
  }
}

TEST(Context, EdgeStretchedSingleTileImage) {
  const auto img = random_image(30, 30, 5);
  const auto out = extract_context(img, img.bounds(), ContextMode::EdgeStretched, {30, 30, 30});
  EXPECT_EQ(out, block_mean_oracle(clamped_canvas(img, img.bounds(), 30), 3));
}

TEST(Context, EdgeStretchedStretchesPartialStrips) {
  // Tile at (30,30) in an 80x80 image: the right and bottom strips hold 20
  // pixels and are stretched to 30.
  const auto img = random_image(80, 80, 6);
  const PixelRect tile{30, 30, 30, 30};
  const auto out = extract_context(img, tile, ContextMode::EdgeStretched, {30, 30, 90});
  EXPECT_EQ(crop(out, {30, 30, 30, 30}), crop(img, tile));
  EXPECT_EQ(crop(out, {60, 30, 30, 30}), resample(crop(img, {60, 30, 20, 30}), 30, 30));
  EXPECT_EQ(crop(out, {0, 0, 30, 30}), crop(img, {0, 0, 30, 30}));
}

TEST(Context, CenterPreservedUnderRandomPositions) {
  const auto img = random_image(100, 70, 7);
  Rng rng(8);
  for (int k = 0; k < 40; ++k) {
    const int x = static_cast<int>(rng.between(0, 70)), y = static_cast<int>(rng.between(0, 40));
    const PixelRect tile{x, y, 30, 30};
    const auto out = extract_context(img, tile, ContextMode::EdgeStretched, {30, 30, 30});
    EXPECT_EQ(center_of(out, 10, 10), block_mean_oracle(crop(img, tile), 3)) << x << "," << y;
  }
}

TEST(Context, ZeroBorderIsTile) {
  const auto img = random_image(60, 60, 9);
  const PixelRect tile{0, 30, 30, 30};
  EXPECT_EQ(extract_context(img, tile, ContextMode::EdgeStretched, {30, 0, 30}), crop(img, tile));
  EXPECT_EQ(extract_context(img, tile, ContextMode::FullStretched, {30, 0, 30}), crop(img, tile));
}

TEST(Context, Errors) {
  const auto img = random_image(60, 60, 10);
  EXPECT_THROW(extract_context(img, PixelRect{40, 40, 30, 30}, ContextMode::EdgeStretched, {30, 30, 30}),
               BoundsError);
  EXPECT_ANY_THROW(extract_context(img, PixelRect{0, 0, 30, 30}, ContextMode::EdgeStretched, {30, -1, 30}));
}

// ------------------------------------------------------------ jitter

TEST(Jitter, AlreadyBalancedUnchanged) {
  std::vector<TileRecord> tiles{labeled("a", 0, 0, 0), labeled("a", 0, 1, 1)};
  const ImageSizes sizes{{"a", {90, 90}}};
  EXPECT_EQ(jitter_balance(tiles, sizes, 1, {10, 0.95}, 30), tiles);
}

TEST(Jitter, EightToOneNeedsSeven) {
  std::vector<TileRecord> tiles;
  for (int i = 0; i < 8; ++i) tiles.push_back(labeled("a", i / 3, i % 3, 0));
  tiles.push_back(labeled("a", 2, 2, 1));
  const ImageSizes sizes{{"a", {90, 90}}};
  const auto out = jitter_balance(tiles, sizes, 3, {10, 0.95}, 30);
  ASSERT_EQ(out.size(), 16u);
  std::set<std::string> ids;
  for (std::size_t i = 9; i < out.size(); ++i) {
    EXPECT_TRUE(out[i].jittered);
    EXPECT_EQ(*out[i].label, 1);
    EXPECT_EQ(out[i].jitter_index, static_cast<int>(i) - 8);
    ids.insert(out[i].tile_id());
  }
  EXPECT_EQ(ids.size(), 7u);

  // Simulated stopping rule: smallest k with 1 + k >= 0.95 * 8.
  int k = 0;
  while (1 + k < 0.95 * 8) ++k;
  EXPECT_EQ(k, 7);
}

TEST(Jitter, OffsetsBoundedAndClamped) {
  std::vector<TileRecord> tiles{labeled("a", 0, 0, 1)};
  for (int i = 0; i < 40; ++i) tiles.push_back(labeled("a", 1 + i / 3, i % 3, 0));
  const ImageSizes sizes{{"a", {90, 450}}};
  const auto out = jitter_balance(tiles, sizes, 4, {20, 0.95}, 30);
  int clamped = 0;
  for (std::size_t i = tiles.size(); i < out.size(); ++i) {
    EXPECT_GE(out[i].origin_x, 0);
    EXPECT_GE(out[i].origin_y, 0);
    EXPECT_LE(out[i].origin_x, 20);
    EXPECT_LE(out[i].origin_y, 20);
    clamped += out[i].origin_x == 0;
  }
  EXPECT_GT(clamped, 0);
}

TEST(Jitter, DeterministicAndErrors) {
  std::vector<TileRecord> tiles{labeled("a", 0, 0, 1), labeled("a", 0, 1, 0), labeled("a", 0, 2, 0),
                                labeled("a", 1, 0, 0)};
  const ImageSizes sizes{{"a", {90, 90}}};
  EXPECT_EQ(jitter_balance(tiles, sizes, 5, {10, 0.95}, 30), jitter_balance(tiles, sizes, 5, {10, 0.95}, 30));
  auto unlabeled = tiles;
  unlabeled[0].label.reset();
  EXPECT_THROW(jitter_balance(unlabeled, sizes, 5, {10, 0.95}, 30), DataError);
  EXPECT_THROW(jitter_balance(tiles, ImageSizes{}, 5, {10, 0.95}, 30), DataError);
}

TEST(Jitter, RebalancingContinuesNumbering) {
  std::vector<TileRecord> tiles{labeled("a", 0, 0, 1)};
  for (int i = 0; i < 5; ++i) tiles.push_back(labeled("a", 1 + i / 3, i % 3, 0));
  const ImageSizes sizes{{"a", {90, 90}}};
  auto once = jitter_balance(tiles, sizes, 6, {10, 0.5}, 30);
  ASSERT_GT(once.size(), tiles.size());
  once.push_back(labeled("a", 2, 2, 0));
  once.push_back(labeled("a", 0, 1, 0));
  const auto twice = jitter_balance(once, sizes, 7, {10, 0.95}, 30);
  ASSERT_GT(twice.size(), once.size());
  std::set<std::string> ids;
  for (const auto& t : twice) ids.insert(t.tile_id());
  EXPECT_EQ(ids.size(), twice.size());
}

// ------------------------------------------------------------ datasets

TEST(Dataset, SplitCountsMatchRecount) {
  ImageSizes sizes;
  std::vector<TileRecord> tiles;
  std::map<std::string, std::size_t> per_image;
  Rng rng(11);
  for (int i = 0; i < 20; ++i) {
    const std::string id = "im" + std::to_string(i);
    const ImageSize size{30 * static_cast<int>(rng.between(3, 6)), 30 * static_cast<int>(rng.between(3, 6))};
    sizes[id] = size;
    for (auto t : grid_tiles(id, size, 30)) {
      t.label = rng.below(5) == 0 ? 1 : 0;
      tiles.push_back(t);
      ++per_image[id];
    }
  }
  std::vector<std::string> ids;
  for (const auto& [id, s] : sizes) ids.push_back(id);
  const auto split = assign_splits(ids, {}, 3);
  const auto plan = plan_dataset(tiles, sizes, split, 4, {10, 0.0}, 30);
  std::size_t expect[3] = {0, 0, 0};
  for (const auto& [id, n] : per_image) expect[static_cast<int>(split.of(id))] += n;
  EXPECT_EQ(plan.train.size(), expect[0]);
  EXPECT_EQ(plan.val.size(), expect[1]);
  EXPECT_EQ(plan.test.size(), expect[2]);

  const auto balanced = plan_dataset(tiles, sizes, split, 4, {10, 0.95}, 30);
  for (const Split s : {Split::Train, Split::Validation, Split::Test}) {
    for (const auto& t : balanced.of(s)) EXPECT_EQ(split.of(t.image_id), s);
  }
}

TEST(Dataset, ModesShareTileRecords) {
  const ImageSet images{{"a", random_image(90, 90, 1)}, {"b", random_image(90, 60, 2)},
                        {"c", random_image(60, 90, 3)}};
  std::vector<TileRecord> tiles;
  for (const auto& [id, img] : images) {
    for (auto t : grid_tiles(id, img, 30)) {
      t.label = (t.grid_row + t.grid_col) % 4 == 0;
      tiles.push_back(t);
    }
  }
  const auto split = assign_splits(std::vector<std::string>{"a", "b", "c"}, {1.0 / 3, 1.0 / 3, 1.0 / 3}, 1);
  const ContextSpec spec{30, 30, 30};
  const auto none = build_dataset(tiles, images, ContextMode::None, spec, split, 7, {10, 0.95});
  const auto edge = build_dataset(tiles, images, ContextMode::EdgeStretched, spec, split, 7, {10, 0.95});
  ASSERT_EQ(none.train.size(), edge.train.size());
  for (std::size_t i = 0; i < none.train.size(); ++i) {
    EXPECT_EQ(none.train[i].tile, edge.train[i].tile);
    EXPECT_EQ(none.train[i].label, edge.train[i].label);
  }
}

TEST(Dataset, MaterializeIndependentOfThreadCount) {
  const ImageSet images{{"a", random_image(150, 120, 5)}};
  auto tiles = grid_tiles("a", images.at("a"), 30);
  const ContextSpec spec{30, 30, 30};
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto serial = materialize(tiles, images, ContextMode::EdgeStretched, spec);
  omp_set_num_threads(4);
  const auto parallel = materialize(tiles, images, ContextMode::EdgeStretched, spec);
  omp_set_num_threads(saved);
  ASSERT_EQ(serial.size(), parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) EXPECT_EQ(serial[i].image, parallel[i].image);
}

TEST(Dataset, MaterializeReportsBadTiles) {
  const ImageSet images{{"a", random_image(60, 60, 5)}};
  TileRecord t = labeled("a", 0, 0, 1);
  t.origin_x = 45;
  EXPECT_THROW(materialize(std::vector<TileRecord>{t}, images, ContextMode::EdgeStretched, {30, 30, 30}),
               BoundsError);
  t.image_id = "zz";
  EXPECT_THROW(materialize(std::vector<TileRecord>{t}, images, ContextMode::None, {30, 30, 30}), DataError);
}
