#include "json_codec.hpp"

#include <fstream>
#include <sstream>

namespace nucleval::json_codec {

json rle_to_json(const RleMask& rle) {
  return json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

RleMask rle_from_json(const json& j) {
  const auto size = required<std::vector<int>>(j, "size", "rle");
  if (size.size() != 2) throw DataError("rle: size must be [H, W]");
  RleMask rle;
  rle.height = size[0];
  rle.width = size[1];
  rle.counts = required<std::vector<std::uint32_t>>(j, "counts", "rle");
  rle.validate();
  return rle;
}

json prompts_to_json(const std::string& image_id, const PromptSet& prompts) {
  json items = json::array();
  if (prompts.kind == PromptKind::kPoints) {
    for (const auto& p : prompts.points) items.push_back({p.x, p.y});
  } else {
    for (const auto& b : prompts.boxes) items.push_back({b.x0, b.y0, b.x1, b.y1});
  }
  return json{{"image_id", image_id},
              {"kind", prompts.kind == PromptKind::kPoints ? "points" : "boxes"},
              {"items", std::move(items)}};
}

PromptSet prompts_from_json(const json& j) {
  const auto kind = required<std::string>(j, "kind", "prompts");
  PromptSet out;
  if (kind == "points") {
    out.kind = PromptKind::kPoints;
    for (const auto& p : required<std::vector<std::vector<double>>>(j, "items", "prompts")) {
      if (p.size() != 2) throw DataError("prompts: a point must be [x, y]");
      out.points.push_back({p[0], p[1]});
    }
  } else if (kind == "boxes") {
    out.kind = PromptKind::kBoxes;
    for (const auto& b : required<std::vector<std::vector<int>>>(j, "items", "prompts")) {
      if (b.size() != 4) throw DataError("prompts: a box must be [x0, y0, x1, y1]");
      out.boxes.push_back({b[0], b[1], b[2], b[3]});
    }
  } else {
    throw DataError("prompts: unknown kind '" + kind + "'");
  }
  return out;
}

std::vector<Detection> detections_from_json(const json& j) {
  if (!j.contains("detections") || !j.at("detections").is_array()) {
    throw DataError("detections: missing 'detections' array");
  }
  std::vector<Detection> out;
  for (const auto& d : j.at("detections")) {
    const auto box = required<std::vector<int>>(d, "bbox", "detection");
    if (box.size() != 4) throw DataError("detection: bbox must be [x0, y0, x1, y1]");
    const auto score = required<double>(d, "score", "detection");
    if (!(score >= 0.0 && score <= 1.0)) throw DataError("detection: score outside [0, 1]");
    Detection det{{box[0], box[1], box[2], box[3]}, score};
    if (!det.bbox.valid()) throw DataError("detection: degenerate bbox");
    out.push_back(det);
  }
  return out;
}

json detections_to_json(const std::string& image_id, const std::vector<Detection>& dets) {
  json arr = json::array();
  for (const auto& d : dets) {
    arr.push_back({{"bbox", {d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1}}, {"score", d.score}});
  }
  return json{{"image_id", image_id}, {"detections", std::move(arr)}};
}

json candidates_to_json(const std::string& image_id, const std::vector<CandidateMask>& cands) {
  json arr = json::array();
  for (const auto& c : cands) {
    arr.push_back({{"prompt_index", c.prompt_index}, {"score", c.score}, {"rle", rle_to_json(c.rle)}});
  }
  return json{{"image_id", image_id}, {"candidates", std::move(arr)}};
}

json report_to_json(const MetricsReport& r, bool aggregate) {
  json j{{"id", r.image_id}, {"dice", r.dice}, {"pq", r.pq},     {"dq", r.dq},
         {"sq", r.sq},       {"n_tp", r.n_tp}, {"n_fp", r.n_fp}, {"n_fn", r.n_fn}};
  if (aggregate) {
    j.erase("id");
    j["n_images"] = r.n_images;
  }
  json flags = json::array();
  if (r.empty_gt) flags.push_back("empty_gt");
  if (r.missing_prediction) flags.push_back("missing_prediction");
  if (!flags.empty()) j["flags"] = std::move(flags);
  return j;
}

json parse(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(what + ": invalid JSON (" + e.what() + ")");
  }
}

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

}  // namespace nucleval::json_codec
