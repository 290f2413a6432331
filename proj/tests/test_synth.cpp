#include <gtest/gtest.h>

#include "weedctx/synth.hpp"

using namespace weedctx;

namespace {

SynthConfig small(int n_images, int n_weeds) {
  SynthConfig c = SynthConfig::for_tile(30);
  c.corpus_size = n_images;
  c.n_weeds = n_weeds;
  return c;
}

// Brute-force point-in-rect scan over every grid cell.
int recount_weed_tiles(const SynthCorpus& corpus, int tile) {
  int weed = 0;
  for (const auto& [id, img] : corpus.images) {
    for (int y = 0; y + tile <= img.height(); y += tile) {
      for (int x = 0; x + tile <= img.width(); x += tile) {
        bool hit = false;
        for (const auto& b : corpus.boxes.at(id)) {
          const int cx = b.rect.x0 + b.rect.w / 2, cy = b.rect.y0 + b.rect.h / 2;
          hit = hit || (cx >= x && cx < x + tile && cy >= y && cy < y + tile);
        }
        weed += hit;
      }
    }
  }
  return weed;
}

}  // namespace

TEST(Synth, Defaults) {
  const SynthConfig c;
  EXPECT_EQ(c.image_w, 1800);
  EXPECT_EQ(c.tile_size, 300);
  EXPECT_NO_THROW(c.validate());
  const auto t = SynthConfig::for_tile(30);
  EXPECT_EQ(t.image_w, 180);
  EXPECT_EQ(t.row_period, 30);
  EXPECT_NO_THROW(t.validate());
}

TEST(Synth, Validation) {
  auto c = small(2, 2);
  c.image_w = 60;
  EXPECT_THROW(c.validate(), DataError);
  c = small(2, 2);
  c.weed_radius = 15;
  EXPECT_THROW(c.validate(), DataError);
  c = small(2, 2);
  c.crop_dropout = 1.0;
  EXPECT_THROW(c.validate(), DataError);
  c = small(0, 2);
  EXPECT_THROW(generate_corpus(c), DataError);
}

TEST(Synth, NoWeeds) {
  const auto corpus = generate_corpus(small(3, 0));
  for (const auto& [id, boxes] : corpus.boxes) EXPECT_TRUE(boxes.empty());
  for (const auto& t : label_tiles(sizes_of(corpus.images), corpus.boxes, 30)) EXPECT_EQ(*t.label, 0);
}

TEST(Synth, Deterministic) {
  const auto a = generate_corpus(small(4, 3));
  const auto b = generate_corpus(small(4, 3));
  EXPECT_EQ(a.image_ids, b.image_ids);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.boxes.size(), b.boxes.size());
  for (const auto& [id, boxes] : a.boxes) {
    ASSERT_EQ(boxes.size(), b.boxes.at(id).size());
    for (std::size_t i = 0; i < boxes.size(); ++i) EXPECT_EQ(boxes[i].rect, b.boxes.at(id)[i].rect);
  }
  auto other = small(4, 3);
  other.master_seed = 2;
  EXPECT_NE(generate_corpus(other).images, a.images);
}

TEST(Synth, BoxCountAndLabelRecount) {
  const auto corpus = generate_corpus(small(20, 5));
  ASSERT_EQ(corpus.image_ids.size(), 20u);
  std::size_t boxes = 0;
  for (const auto& [id, list] : corpus.boxes) {
    boxes += list.size();
    for (const auto& b : list) {
      EXPECT_EQ(b.image_id, id);
      EXPECT_EQ(b.source, "ground-truth");
      EXPECT_EQ(intersect(b.rect, corpus.images.at(id).bounds()), b.rect);
    }
  }
  EXPECT_EQ(boxes, 100u);
  const auto tiles = label_tiles(sizes_of(corpus.images), corpus.boxes, 30);
  const auto weed = std::count_if(tiles.begin(), tiles.end(), [](const TileRecord& t) { return *t.label == 1; });
  EXPECT_EQ(weed, recount_weed_tiles(corpus, 30));
  EXPECT_GT(weed, 0);
  EXPECT_GT(static_cast<long>(tiles.size()) - weed, 4 * weed);
}

TEST(Labels, HalfOpenTileEdges) {
  const ImageSizes sizes{{"a", {90, 90}}};
  BoxIndex boxes;
  boxes["a"].push_back({"a", {25, 25, 11, 11}, "ground-truth"});  // center (30, 30)
  const auto tiles = label_tiles(sizes, boxes, 30);
  for (const auto& t : tiles) EXPECT_EQ(*t.label, t.grid_row == 1 && t.grid_col == 1 ? 1 : 0) << t.tile_id();
  EXPECT_THROW(label_tiles(ImageSizes{{"b", {90, 90}}}, boxes, 30), DataError);
}

TEST(Texture, StatsOfFlatImage) {
  const RasterImage img(10, 10, Rgb{255, 0, 51});
  const auto s = texture_stats(img);
  EXPECT_NEAR(s[0], 1.0, 1e-12);
  EXPECT_NEAR(s[1], 0.0, 1e-12);
  EXPECT_NEAR(s[2], 0.2, 1e-12);
  for (int c = 3; c < 6; ++c) EXPECT_NEAR(s[c], 0.0, 1e-12);
}
