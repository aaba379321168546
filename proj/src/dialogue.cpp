#include "todcsp/dialogue.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <map>

#include "todcsp/errors.hpp"

namespace todcsp {

namespace {

constexpr std::array<std::string_view, 11> kNumberWords = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"};

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

std::size_t code_points(std::string_view text) {
  return static_cast<std::size_t>(
      std::count_if(text.begin(), text.end(), [](char c) { return !is_continuation(static_cast<unsigned char>(c)); }));
}

// Byte offset of code point `cp` (cp may equal the code point length).
std::size_t byte_offset(std::string_view text, std::size_t cp) {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_continuation(static_cast<unsigned char>(text[i]))) continue;
    if (seen == cp) return i;
    ++seen;
  }
  return text.size();
}

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string to_upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string capitalize_words(std::string s) {
  bool start = true;
  for (auto& c : s) {
    if (start && is_alpha(c)) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    start = c == ' ';
  }
  return s;
}

enum class CaseStyle { lower, initial, title, upper };

CaseStyle case_style(std::string_view surface) {
  std::size_t letters = 0, uppers = 0, words = 0, capital_words = 0;
  bool start = true;
  for (char c : surface) {
    if (c == ' ') {
      start = true;
      continue;
    }
    if (start) {
      ++words;
      if (is_upper(c)) ++capital_words;
      start = false;
    }
    if (is_alpha(c)) {
      ++letters;
      if (is_upper(c)) ++uppers;
    }
  }
  if (letters > 1 && uppers == letters) return CaseStyle::upper;
  if (words > 1 && capital_words == words) return CaseStyle::title;
  auto first = std::find_if(surface.begin(), surface.end(), is_alpha);
  if (first != surface.end() && is_upper(*first)) return CaseStyle::initial;
  return CaseStyle::lower;
}

std::string apply_style(std::string text, CaseStyle style) {
  switch (style) {
    case CaseStyle::upper:
      return to_upper(std::move(text));
    case CaseStyle::title:
      return capitalize_words(std::move(text));
    case CaseStyle::initial: {
      auto it = std::find_if(text.begin(), text.end(), is_alpha);
      if (it != text.end()) *it = static_cast<char>(std::toupper(static_cast<unsigned char>(*it)));
      return text;
    }
    case CaseStyle::lower:
      break;
  }
  return text;
}

std::optional<std::size_t> parse_placeholder(std::string_view text, std::size_t pos, std::size_t* length) {
  if (pos + 3 >= text.size() || text[pos] != '<' || text[pos + 1] != 'V') return std::nullopt;
  std::size_t i = pos + 2;
  std::size_t k = 0;
  auto [end, ec] = std::from_chars(text.data() + i, text.data() + text.size(), k);
  if (ec != std::errc() || end == text.data() + i) return std::nullopt;
  i = static_cast<std::size_t>(end - text.data());
  if (i >= text.size() || text[i] != '>' || k == 0) return std::nullopt;
  *length = i + 1 - pos;
  return k;
}

bool contains_placeholder(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    std::size_t len = 0;
    if (parse_placeholder(text, i, &len)) return true;
  }
  return false;
}

}  // namespace

std::string_view to_string(Speaker s) { return s == Speaker::user ? "user" : "system"; }
std::string_view to_string(VarKind k) { return k == VarKind::value ? "value" : "count"; }

std::string_view to_string(Cue c) {
  switch (c) {
    case Cue::none_cue: return "none_cue";
    case Cue::exists_cue: return "exists_cue";
    case Cue::exact_cue: return "exact_cue";
  }
  return "?";
}

Speaker parse_speaker(std::string_view s) {
  std::string t = normalize_text(s);
  if (t == "user" || t == "u") return Speaker::user;
  if (t == "system" || t == "s") return Speaker::system;
  throw ValidationError("unknown speaker '" + std::string(s) + "'");
}

Cue parse_cue(std::string_view s) {
  if (s == "none_cue") return Cue::none_cue;
  if (s == "exists_cue") return Cue::exists_cue;
  if (s == "exact_cue") return Cue::exact_cue;
  throw ValidationError("unknown cue '" + std::string(s) + "'");
}

std::string value_to_string(const Value& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return std::to_string(std::get<std::int64_t>(v));
}

std::optional<std::size_t> DelexDialogue::index_of(std::string_view var_id) const {
  std::size_t len = 0;
  std::string wrapped = "<" + std::string(var_id) + ">";
  if (auto k = parse_placeholder(wrapped, 0, &len); k && len == wrapped.size() && *k <= variables.size() &&
                                                    variables[*k - 1].id == var_id)
    return *k - 1;
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i].id == var_id) return i;
  return std::nullopt;
}

bool Assignment::total() const {
  return std::all_of(values.begin(), values.end(), [](const auto& v) { return v.has_value(); });
}

std::size_t Assignment::filled() const {
  return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](const auto& v) { return v.has_value(); }));
}

Assignment gold_assignment(const DelexDialogue& delex) {
  Assignment a;
  for (const auto& v : delex.variables) a.values.emplace_back(v.gold);
  return a;
}

std::string normalize_text(std::string_view surface) {
  std::string out;
  out.reserve(surface.size());
  bool pending_space = false;
  for (char c : surface) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::int64_t normalize_count(std::string_view surface) {
  const std::string t = normalize_text(surface);
  if (!t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    std::int64_t n = 0;
    auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), n);
    if (ec == std::errc() && end == t.data() + t.size()) return n;
  }
  for (std::size_t i = 0; i < kNumberWords.size(); ++i)
    if (t == kNumberWords[i]) return static_cast<std::int64_t>(i);
  if (t == "no" || t == "none") return 0;
  throw ValidationError("cannot read an instance count from '" + std::string(surface) + "'");
}

Value normalize_value(std::string_view surface, VarKind kind) {
  if (kind == VarKind::count) return normalize_count(surface);
  return normalize_text(surface);
}

void validate_spans(Dialogue& dialogue) {
  for (std::size_t t = 0; t < dialogue.turns.size(); ++t) {
    Turn& turn = dialogue.turns[t];
    const std::string where = dialogue.dialogue_id + " turn " + std::to_string(t);
    if (contains_placeholder(turn.text))
      throw ValidationError(where + ": text already contains a <Vk> placeholder");
    const std::size_t length = code_points(turn.text);
    std::stable_sort(turn.spans.begin(), turn.spans.end(),
                     [](const Span& a, const Span& b) { return a.start < b.start; });
    std::size_t previous_end = 0;
    for (std::size_t s = 0; s < turn.spans.size(); ++s) {
      Span& span = turn.spans[s];
      if (span.start >= span.end || span.end > length)
        throw ValidationError(where + ": span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                              ") out of bounds");
      if (s > 0 && span.start < previous_end)
        throw ValidationError(where + ": overlapping spans at offset " + std::to_string(span.start));
      if (span.slot.empty()) throw ValidationError(where + ": span without slot");
      previous_end = span.end;
      const std::size_t b0 = byte_offset(turn.text, span.start);
      const std::size_t b1 = byte_offset(turn.text, span.end);
      span.surface = turn.text.substr(b0, b1 - b0);
      span.kind = span.slot == kCountMarker ? VarKind::count : VarKind::value;
    }
  }
}

std::vector<std::string> tokenize_words(std::string_view text) {
  auto is_edge_punct = [](char c) { return c == '.' || c == ',' || c == '?' || c == '!' || c == ';' || c == ':'; };
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view word = text.substr(i, j - i);
    i = j;
    if (word.empty()) continue;
    std::vector<std::string> tail;
    while (!word.empty() && is_edge_punct(word.front())) {
      out.emplace_back(1, word.front());
      word.remove_prefix(1);
    }
    while (!word.empty() && is_edge_punct(word.back())) {
      tail.emplace_back(1, word.back());
      word.remove_suffix(1);
    }
    if (!word.empty()) out.emplace_back(word);
    out.insert(out.end(), tail.rbegin(), tail.rend());
  }
  return out;
}

std::string placeholder(std::size_t one_based) { return "<V" + std::to_string(one_based) + ">"; }

DelexDialogue delexicalize(const Dialogue& dialogue) {
  Dialogue checked = dialogue;
  validate_spans(checked);
  DelexDialogue out;
  out.dialogue_id = checked.dialogue_id;
  for (std::size_t t = 0; t < checked.turns.size(); ++t) {
    const Turn& turn = checked.turns[t];
    DelexTurn dt{turn.speaker, {}};
    std::size_t cursor = 0;  // bytes
    for (const Span& span : turn.spans) {
      const std::size_t b0 = byte_offset(turn.text, span.start);
      const std::size_t b1 = byte_offset(turn.text, span.end);
      dt.text.append(turn.text, cursor, b0 - cursor);
      Variable var;
      var.id = "V" + std::to_string(out.variables.size() + 1);
      var.kind = span.kind;
      var.slot = span.kind == VarKind::value ? span.slot : std::string();
      var.turn_index = t;
      var.surface = span.surface;
      var.cue = span.cue;
      try {
        var.gold = normalize_value(span.surface, span.kind);
      } catch (const ValidationError& e) {
        throw ValidationError(checked.dialogue_id + " turn " + std::to_string(t) + ": " + e.what());
      }
      dt.text += placeholder(out.variables.size() + 1);
      out.variables.push_back(std::move(var));
      cursor = b1;
    }
    dt.text.append(turn.text, cursor, std::string::npos);
    out.turns.push_back(std::move(dt));
  }
  return out;
}

std::vector<TurnPiece> split_placeholders(const DelexDialogue& delex, std::size_t turn_index) {
  std::vector<TurnPiece> pieces;
  const std::string& text = delex.turns.at(turn_index).text;
  std::string literal;
  for (std::size_t i = 0; i < text.size();) {
    std::size_t len = 0;
    if (auto k = parse_placeholder(text, i, &len); k && *k <= delex.variables.size()) {
      if (!literal.empty()) pieces.push_back({std::move(literal), std::nullopt});
      literal.clear();
      pieces.push_back({text.substr(i, len), *k - 1});
      i += len;
    } else {
      literal.push_back(text[i++]);
    }
  }
  if (!literal.empty()) pieces.push_back({std::move(literal), std::nullopt});
  return pieces;
}

std::string render_surface(const Variable& var, const Value& value) {
  if (value == var.gold && !var.surface.empty()) return var.surface;
  const CaseStyle style = case_style(var.surface);
  if (const auto* n = std::get_if<std::int64_t>(&value)) {
    const bool digits = !var.surface.empty() &&
                        std::all_of(var.surface.begin(), var.surface.end(),
                                    [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    if (digits || *n < 0 || *n >= static_cast<std::int64_t>(kNumberWords.size())) return std::to_string(*n);
    return apply_style(std::string(kNumberWords[static_cast<std::size_t>(*n)]), style);
  }
  return apply_style(std::get<std::string>(value), style);
}

std::vector<RelexTurn> relexicalize(const DelexDialogue& delex, const Assignment& assignment) {
  std::vector<RelexTurn> out;
  for (std::size_t t = 0; t < delex.turns.size(); ++t) {
    RelexTurn rt{delex.turns[t].speaker, {}};
    for (const TurnPiece& piece : split_placeholders(delex, t)) {
      if (!piece.variable) {
        rt.text += piece.text;
        continue;
      }
      const std::size_t v = *piece.variable;
      if (v < assignment.values.size() && assignment.values[v])
        rt.text += render_surface(delex.variables[v], *assignment.values[v]);
      else
        rt.text += "[MASK]";
    }
    out.push_back(std::move(rt));
  }
  return out;
}

std::vector<std::string> select_pertinent(const DelexDialogue& gold, const KnowledgeBase& global_kb) {
  std::vector<std::string> named;
  for (const Instance& inst : global_kb.instances) {
    const std::string* name = inst.value_of("name");
    if (!name) continue;
    for (const Variable& v : gold.variables) {
      if (v.kind == VarKind::value && v.slot == "name" && v.gold == Value(*name)) {
        named.push_back(inst.id);
        break;
      }
    }
  }
  if (!named.empty() || global_kb.empty()) return named;

  std::map<std::string, std::string> final_mentions;
  for (const Variable& v : gold.variables)
    if (v.kind == VarKind::value) final_mentions[v.slot] = std::get<std::string>(v.gold);

  const Instance* best = nullptr;
  std::size_t best_score = 0;
  for (const Instance& inst : global_kb.instances) {
    std::size_t score = 0;
    for (const auto& [slot, value] : final_mentions) {
      const std::string* have = inst.value_of(slot);
      if (have && *have == value) ++score;
    }
    if (!best || score > best_score || (score == best_score && inst.id < best->id)) {
      best = &inst;
      best_score = score;
    }
  }
  return {best->id};
}

}  // namespace todcsp
