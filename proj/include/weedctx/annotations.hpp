#pragma once

#include <map>
#include <string>
#include <vector>

#include "weedctx/raster.hpp"

namespace weedctx {

struct AnnotationBox {
  std::string image_id;
  PixelRect rect;
  std::string source = "ground-truth";

  friend bool operator==(const AnnotationBox&, const AnnotationBox&) = default;
};

using BoxIndex = std::map<std::string, std::vector<AnnotationBox>>;

}  // namespace weedctx
