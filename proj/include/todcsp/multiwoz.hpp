#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "todcsp/dialogue.hpp"
#include "todcsp/domain.hpp"

namespace todcsp {

struct MultiwozConversion {
  Ontology ontology;
  KnowledgeBase global_kb;
  std::vector<Dialogue> dialogues;
  std::vector<std::string> warnings;
};

// Converts MultiWOZ 2.x restaurant-only dialogues (data.json layout with
// log[].span_info) and restaurant_db.json into the annotated-dialogue schema.
// Food/Area/Price/Name spans become value spans; numeric Choice spans become
// count spans; spans of NoOffer acts carry a none_cue.
MultiwozConversion convert_multiwoz(const nlohmann::json& data, const nlohmann::json& restaurant_db);

}  // namespace todcsp
