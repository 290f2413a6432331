#pragma once

#include <string>

#include "weedctx/dataprep.hpp"
#include "weedctx/label_store.hpp"

namespace httplib {
class Server;
}

namespace weedctx {

struct ServiceResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Endpoint handlers for the labeling UI, independent of the HTTP layer so
/// they can be exercised directly.
class LabelerService {
 public:
  LabelerService(const ImageSet& images, LabelStore& store, ContextSpec spec);

  ServiceResponse next() const;
  /// context: none|full|edge. halo: the unscaled bordered window with the
  /// tile outlined in purple (full or edge only).
  ServiceResponse image(const std::string& tile_id, const std::string& context, bool halo) const;
  ServiceResponse label(const std::string& tile_id, const std::string& body, const std::string& actor);
  ServiceResponse unlabel(const std::string& tile_id, const std::string& actor);
  ServiceResponse progress() const;

  void mount(httplib::Server& server);

 private:
  const ImageSet& images_;
  LabelStore& store_;
  ContextSpec spec_;
};

/// The halo preview raster for a tile rect: mode-specific context at
/// (tile + 2 * border) resolution with a purple ring just outside the tile.
RasterImage halo_preview(const RasterImage& img, const PixelRect& tile_rect, ContextMode mode,
                         const ContextSpec& spec);

}  // namespace weedctx
