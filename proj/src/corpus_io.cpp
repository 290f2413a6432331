#include "weedctx/corpus_io.hpp"

#include <algorithm>
#include <filesystem>

#include "weedctx/formats.hpp"

namespace fs = std::filesystem;

namespace weedctx {

std::string corpus_image_path(const std::string& dir, const std::string& image_id) {
  return (fs::path(dir) / "images" / (image_id + ".png")).string();
}

void write_corpus(const std::string& dir, const SynthCorpus& corpus, int tile_size) {
  fs::create_directories(fs::path(dir) / "images");
  for (const auto& id : corpus.image_ids) write_image(corpus_image_path(dir, id), corpus.images.at(id));
  write_text_file_atomic((fs::path(dir) / "boxes.csv").string(), format_boxes_csv(corpus.boxes));
  const auto tiles = label_tiles(sizes_of(corpus.images), corpus.boxes, tile_size);
  write_text_file_atomic((fs::path(dir) / "labels.csv").string(), format_labels_csv(tiles));
}

std::vector<std::string> list_corpus_images(const std::string& dir) {
  const fs::path images = fs::path(dir) / "images";
  if (!fs::is_directory(images)) throw DataError("no images directory in " + dir);
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(images)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") ids.push_back(entry.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

ImageSet load_corpus_images(const std::string& dir) { return load_corpus_images(dir, list_corpus_images(dir)); }

ImageSet load_corpus_images(const std::string& dir, const std::vector<std::string>& ids) {
  ImageSet out;
  for (const auto& id : ids) {
    const std::string path = corpus_image_path(dir, id);
    if (!fs::exists(path)) throw DataError("missing image " + path);
    try {
      out.emplace(id, read_image(path));
    } catch (const RasterError& e) {
      throw DataError(path + ": " + e.what());
    }
  }
  return out;
}

}  // namespace weedctx
