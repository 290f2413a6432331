#include "weedctx/labeler_service.hpp"

#include <algorithm>

#include <httplib.h>
#include <json.hpp>

#include "weedctx/pipeline.hpp"

namespace weedctx {

namespace {

using nlohmann::json;

ServiceResponse json_response(int status, const json& j) { return {status, "application/json", j.dump()}; }

ServiceResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

}  // namespace

RasterImage halo_preview(const RasterImage& img, const PixelRect& tile_rect, ContextMode mode,
                         const ContextSpec& spec) {
  if (mode == ContextMode::None) throw DataError("halo preview needs full or edge context");
  ContextSpec full_res = spec;
  full_res.output_size = spec.tile_size + 2 * spec.border;
  RasterImage out = extract_context(img, tile_rect, mode, full_res);

  const int ring = std::clamp(spec.tile_size / 100, 1, std::max(1, spec.border));
  const PixelRect inner{spec.border, spec.border, spec.tile_size, spec.tile_size};
  const PixelRect outer{spec.border - ring, spec.border - ring, spec.tile_size + 2 * ring,
                        spec.tile_size + 2 * ring};
  const PixelRect clip = intersect(outer, out.bounds());
  for (int y = clip.y0; y < clip.y1(); ++y) {
    for (int x = clip.x0; x < clip.x1(); ++x) {
      if (!inner.contains(x, y)) out.set_pixel(x, y, kOverlayPurple);
    }
  }
  return out;
}

LabelerService::LabelerService(const ImageSet& images, LabelStore& store, ContextSpec spec)
    : images_(images), store_(store), spec_(spec) {
  const auto snap = store_.snapshot();
  for (const auto& t : snap->tiles) {
    const auto it = images_.find(t.image_id);
    if (it == images_.end()) throw DataError("labels reference unknown image " + t.image_id);
    const PixelRect r = t.rect(spec_.tile_size);
    if (intersect(r, it->second.bounds()) != r) throw DataError("tile " + t.tile_id() + " lies outside its image");
  }
}

ServiceResponse LabelerService::next() const {
  const auto t = store_.next_unlabeled();
  if (!t) return json_response(200, {{"status", "complete"}});
  return json_response(
      200, {{"tile_id", t->tile_id()}, {"image_id", t->image_id}, {"grid_row", t->grid_row}, {"grid_col", t->grid_col}});
}

ServiceResponse LabelerService::image(const std::string& tile_id, const std::string& context, bool halo) const {
  const auto snap = store_.snapshot();
  const auto it = snap->index.find(tile_id);
  if (it == snap->index.end()) return error_response(404, "unknown tile " + tile_id);
  ContextMode mode;
  try {
    mode = parse_context_mode(context);
  } catch (const std::exception&) {
    return error_response(400, "context must be none, full or edge");
  }
  if (halo && mode == ContextMode::None) return error_response(400, "halo requires full or edge context");
  const TileRecord& t = snap->tiles[it->second];
  const RasterImage& img = images_.at(t.image_id);
  const PixelRect rect = t.rect(spec_.tile_size);
  const RasterImage out = halo ? halo_preview(img, rect, mode, spec_) : extract_context(img, rect, mode, spec_);
  const auto bytes = encode_image(out);
  return {200, "image/png", std::string(bytes.begin(), bytes.end())};
}

ServiceResponse LabelerService::label(const std::string& tile_id, const std::string& body, const std::string& actor) {
  int value = -1;
  try {
    const json j = json::parse(body);
    if (j.is_object() && j.contains("label") && j["label"].is_number_integer()) value = j["label"].get<int>();
  } catch (const json::exception&) {
  }
  if (value != 0 && value != 1) return error_response(400, "body must be {\"label\": 0|1}");
  try {
    store_.set_label(tile_id, value, actor);
  } catch (const UnknownTileError&) {
    return error_response(404, "unknown tile " + tile_id);
  } catch (const DataError& e) {
    return error_response(500, e.what());
  }
  return json_response(200, {{"ok", true}});
}

ServiceResponse LabelerService::unlabel(const std::string& tile_id, const std::string& actor) {
  try {
    store_.set_label(tile_id, std::nullopt, actor);
  } catch (const UnknownTileError&) {
    return error_response(404, "unknown tile " + tile_id);
  } catch (const DataError& e) {
    return error_response(500, e.what());
  }
  return json_response(200, {{"ok", true}});
}

ServiceResponse LabelerService::progress() const {
  const auto p = store_.progress();
  return json_response(
      200, {{"labeled", p.labeled}, {"total", p.total}, {"weed_count", p.weed}, {"nonweed_count", p.nonweed}});
}

void LabelerService::mount(httplib::Server& server) {
  const auto send = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  const auto actor_of = [](const httplib::Request& req) {
    const std::string a = req.get_header_value("X-Actor");
    return a.empty() || a.find_first_of(",\n") != std::string::npos ? std::string("labeler") : a;
  };

  server.Get("/api/tiles/next", [this, send](const httplib::Request&, httplib::Response& res) { send(res, next()); });
  server.Get(R"(/api/tiles/([^/]+)/image)", [this, send](const httplib::Request& req, httplib::Response& res) {
    const std::string context = req.has_param("context") ? req.get_param_value("context") : "edge";
    const std::string halo = req.has_param("halo") ? req.get_param_value("halo") : "0";
    if (halo != "0" && halo != "1") return send(res, error_response(400, "halo must be 0 or 1"));
    send(res, image(req.matches[1], context, halo == "1"));
  });
  server.Post(R"(/api/tiles/([^/]+)/label)",
              [this, send, actor_of](const httplib::Request& req, httplib::Response& res) {
                send(res, label(req.matches[1], req.body, actor_of(req)));
              });
  server.Post(R"(/api/tiles/([^/]+)/unlabel)",
              [this, send, actor_of](const httplib::Request& req, httplib::Response& res) {
                send(res, unlabel(req.matches[1], actor_of(req)));
              });
  server.Get("/api/progress", [this, send](const httplib::Request&, httplib::Response& res) { send(res, progress()); });
}

}  // namespace weedctx
