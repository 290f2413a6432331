#pragma once

#include <string>
#include <vector>

#include "weedctx/annotations.hpp"
#include "weedctx/dataprep.hpp"
#include "weedctx/synth.hpp"

namespace weedctx {

// Corpus directory layout:
//   <dir>/images/<image_id>.png
//   <dir>/boxes.csv
//   <dir>/labels.csv

std::string corpus_image_path(const std::string& dir, const std::string& image_id);

/// Writes images, boxes.csv and labels.csv (grid tiles labeled from boxes).
void write_corpus(const std::string& dir, const SynthCorpus& corpus, int tile_size);

/// Image ids found under <dir>/images, sorted.
std::vector<std::string> list_corpus_images(const std::string& dir);
ImageSet load_corpus_images(const std::string& dir);
/// Only the listed ids.
ImageSet load_corpus_images(const std::string& dir, const std::vector<std::string>& ids);

}  // namespace weedctx
