#include "todcsp/multiwoz.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "todcsp/errors.hpp"

namespace todcsp {

namespace {

using nlohmann::json;

const std::map<std::string, std::string> kSlotMap = {
    {"Food", "food"}, {"Area", "area"}, {"Price", "price"}, {"Name", "name"}};
const std::set<std::string> kOtherDomains = {"attraction", "hospital", "hotel", "police", "taxi", "train"};
const std::set<std::string> kNonValues = {"dontcare", "dont care", "don't care", "do n't care", "?", "none"};

bool restaurant_only(const json& dialogue) {
  if (!dialogue.contains("goal")) return false;
  const json& goal = dialogue["goal"];
  if (!goal.contains("restaurant") || goal["restaurant"].empty()) return false;
  for (const auto& d : kOtherDomains)
    if (goal.contains(d) && !goal[d].empty()) return false;
  return true;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::size_t code_points_before(const std::string& text, std::size_t byte) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) ++n;
  return n;
}

// Byte ranges of whitespace-separated tokens.
std::vector<std::pair<std::size_t, std::size_t>> token_ranges(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t j0 = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > j0) out.emplace_back(j0, i);
  }
  return out;
}

bool is_count_surface(const std::string& s) {
  try {
    normalize_count(s);
    return true;
  } catch (const ValidationError&) {
    return false;
  }
}

// Byte range of `value` in `text`, preferring the annotated token window.
std::optional<std::pair<std::size_t, std::size_t>> locate(const std::string& text, const std::string& value,
                                                          std::size_t lo, std::size_t hi) {
  const std::string haystack = lower(text);
  const std::string needle = lower(value);
  if (needle.empty()) return std::nullopt;
  auto word_edge = [&](std::size_t b, std::size_t e) {
    const bool left = b == 0 || !std::isalnum(static_cast<unsigned char>(haystack[b - 1]));
    const bool right = e >= haystack.size() || !std::isalnum(static_cast<unsigned char>(haystack[e]));
    return left && right;
  };
  for (std::size_t pos = haystack.find(needle, lo); pos != std::string::npos && pos < hi;
       pos = haystack.find(needle, pos + 1))
    if (word_edge(pos, pos + needle.size())) return std::make_pair(pos, pos + needle.size());
  for (std::size_t pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1))
    if (word_edge(pos, pos + needle.size())) return std::make_pair(pos, pos + needle.size());
  return std::nullopt;
}

Turn convert_turn(const std::string& id, std::size_t index, const json& log_entry, std::vector<std::string>& warnings) {
  Turn turn;
  turn.speaker = index % 2 == 0 ? Speaker::user : Speaker::system;
  turn.text = log_entry.value("text", std::string());
  const auto tokens = token_ranges(turn.text);
  std::vector<std::pair<std::size_t, std::size_t>> taken;  // byte ranges
  const std::string where = id + " turn " + std::to_string(index);

  if (!log_entry.contains("span_info") || !log_entry["span_info"].is_array()) return turn;
  for (const json& info : log_entry["span_info"]) {
    if (!info.is_array() || info.size() < 5) continue;
    const std::string act = info[0].is_string() ? info[0].get<std::string>() : "";
    const std::string slot = info[1].is_string() ? info[1].get<std::string>() : "";
    const std::string value = info[2].is_string() ? info[2].get<std::string>() : info[2].dump();
    if (!act.starts_with("Restaurant-") && !act.starts_with("Booking-")) continue;
    const bool is_choice = slot == "Choice";
    if (!is_choice && !kSlotMap.contains(slot)) continue;
    if (act.starts_with("Booking-") && slot != "Name") continue;
    if (kNonValues.contains(lower(value))) continue;
    if (is_choice && !is_count_surface(value)) continue;

    std::size_t lo = 0, hi = turn.text.size();
    if (info[3].is_number_integer() && info[4].is_number_integer()) {
      const auto s = info[3].get<std::size_t>(), e = info[4].get<std::size_t>();
      if (s < tokens.size()) lo = tokens[s].first;
      if (e < tokens.size() && e >= s) hi = tokens[e].second;
    }
    auto range = locate(turn.text, value, lo, hi);
    if (!range) {
      warnings.push_back(where + ": '" + value + "' not found in the text");
      continue;
    }
    const bool overlaps = std::any_of(taken.begin(), taken.end(), [&](const auto& r) {
      return range->first < r.second && r.first < range->second;
    });
    if (overlaps) continue;
    taken.push_back(*range);

    Span span;
    span.start = code_points_before(turn.text, range->first);
    span.end = code_points_before(turn.text, range->second);
    span.slot = is_choice ? std::string(kCountMarker) : kSlotMap.at(slot);
    if (act == "Restaurant-NoOffer" && turn.speaker == Speaker::system) span.cue = Cue::none_cue;
    turn.spans.push_back(std::move(span));
  }
  return turn;
}

}  // namespace

MultiwozConversion convert_multiwoz(const nlohmann::json& data, const nlohmann::json& restaurant_db) {
  MultiwozConversion out;
  std::map<std::string, std::set<std::string>> values;

  if (!restaurant_db.is_array()) throw ValidationError("restaurant db: expected an array");
  std::set<std::string> seen_ids;
  for (const json& row : restaurant_db) {
    Instance inst;
    inst.id = row.contains("id") ? (row["id"].is_string() ? row["id"].get<std::string>() : row["id"].dump())
                                 : row.value("name", std::string());
    if (inst.id.empty() || !seen_ids.insert(inst.id).second) {
      out.warnings.push_back("restaurant db: skipped a row without a unique id");
      continue;
    }
    for (const auto& [src, dst] : {std::pair{"area", "area"}, {"food", "food"}, {"pricerange", "price"}, {"name", "name"}}) {
      if (!row.contains(src) || !row[src].is_string()) continue;
      const std::string v = normalize_text(row[src].get<std::string>());
      if (v.empty()) continue;
      inst.attributes[dst] = v;
      values[dst].insert(v);
    }
    out.global_kb.instances.push_back(std::move(inst));
  }

  std::vector<std::pair<std::string, const json*>> dialogues;
  if (data.is_object()) {
    for (const auto& [id, d] : data.items()) dialogues.emplace_back(id, &d);
  } else if (data.is_array()) {
    for (const json& d : data) dialogues.emplace_back(d.value("dialogue_id", std::string()), &d);
  } else {
    throw ValidationError("dialogue data: expected an object keyed by dialogue id");
  }

  for (const auto& [id, d] : dialogues) {
    if (!restaurant_only(*d) || !d->contains("log")) continue;
    Dialogue dialogue;
    dialogue.dialogue_id = id;
    std::size_t index = 0;
    for (const json& entry : (*d)["log"]) dialogue.turns.push_back(convert_turn(id, index++, entry, out.warnings));
    try {
      validate_spans(dialogue);
    } catch (const ValidationError& e) {
      out.warnings.push_back(std::string("skipped ") + e.what());
      continue;
    }
    for (const Turn& t : dialogue.turns)
      for (const Span& s : t.spans)
        if (s.kind == VarKind::value) values[s.slot].insert(normalize_text(s.surface));
    out.dialogues.push_back(std::move(dialogue));
  }

  std::vector<SlotType> slots;
  for (auto& [slot, vs] : values) slots.push_back({slot, {vs.begin(), vs.end()}});
  out.ontology = Ontology(std::move(slots));
  return out;
}

}  // namespace todcsp
