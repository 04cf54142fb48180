#pragma once

// JSON forms of the interchange types. Private to the library and its tests.

#include <string>

#include "json.hpp"
#include "nucleval/error.hpp"
#include "nucleval/mask.hpp"
#include "nucleval/metrics.hpp"
#include "nucleval/prompting.hpp"

namespace nucleval::json_codec {

using nlohmann::json;

json rle_to_json(const RleMask& rle);
RleMask rle_from_json(const json& j);

json prompts_to_json(const std::string& image_id, const PromptSet& prompts);
PromptSet prompts_from_json(const json& j);

std::vector<Detection> detections_from_json(const json& j);
json detections_to_json(const std::string& image_id, const std::vector<Detection>& dets);

json candidates_to_json(const std::string& image_id, const std::vector<CandidateMask>& cands);

json report_to_json(const MetricsReport& report, bool aggregate = false);

// Parses a whole document, converting parse errors to DataError.
json parse(const std::string& text, const std::string& what);
json parse_file(const std::string& path);

template <typename T>
T required(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw DataError(where + ": missing field '" + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw DataError(where + ": field '" + key + "' has the wrong type");
  }
}

}  // namespace nucleval::json_codec
