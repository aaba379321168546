#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "todcsp/domain.hpp"

namespace todcsp {

// Slot name used by annotations for instance-amount spans.
inline constexpr std::string_view kCountMarker = "__count__";

enum class Speaker { user, system };
enum class VarKind { value, count };
enum class Cue { none_cue, exists_cue, exact_cue };

std::string_view to_string(Speaker s);
std::string_view to_string(VarKind k);
std::string_view to_string(Cue c);
Speaker parse_speaker(std::string_view s);
Cue parse_cue(std::string_view s);

// Canonical text (value variables) or instance amount (count variables).
using Value = std::variant<std::string, std::int64_t>;

std::string value_to_string(const Value& v);

struct Span {
  std::size_t start = 0;  // code-point offsets, half open
  std::size_t end = 0;
  std::string surface;
  std::string slot;  // slot name or kCountMarker
  VarKind kind = VarKind::value;
  std::optional<Cue> cue;
};

struct Turn {
  Speaker speaker = Speaker::user;
  std::string text;
  std::vector<Span> spans;
};

// Annotated gold dialogue.
struct Dialogue {
  std::string dialogue_id;
  std::vector<Turn> turns;
};

struct Variable {
  std::string id;  // "V1", "V2", ... in document order
  VarKind kind = VarKind::value;
  std::string slot;  // empty for count variables
  std::size_t turn_index = 0;
  Value gold;
  std::string surface;  // original text of the span
  std::optional<Cue> cue;
};

struct DelexTurn {
  Speaker speaker = Speaker::user;
  std::string text;  // "<Vk>" at every variable position
};

struct DelexDialogue {
  std::string dialogue_id;
  std::vector<DelexTurn> turns;
  std::vector<Variable> variables;

  std::optional<std::size_t> index_of(std::string_view var_id) const;
};

// Values indexed by variable position; nullopt means unfilled.
struct Assignment {
  std::vector<std::optional<Value>> values;

  std::size_t size() const { return values.size(); }
  bool total() const;
  std::size_t filled() const;
};

Assignment gold_assignment(const DelexDialogue& delex);

// Lowercase, trim and collapse inner whitespace.
std::string normalize_text(std::string_view surface);
// Digits, number words zero..ten, "no"/"none". Throws ValidationError otherwise.
std::int64_t normalize_count(std::string_view surface);
Value normalize_value(std::string_view surface, VarKind kind);

// Fills Span::surface and Span::kind from the turn text; checks bounds,
// ordering and overlap. Throws ValidationError.
void validate_spans(Dialogue& dialogue);

DelexDialogue delexicalize(const Dialogue& dialogue);

struct RelexTurn {
  Speaker speaker = Speaker::user;
  std::string text;
};

// Renders `value` in the capitalisation style of the variable's gold surface.
std::string render_surface(const Variable& var, const Value& value);

std::vector<RelexTurn> relexicalize(const DelexDialogue& delex, const Assignment& assignment);

// Whitespace split with . , ? ! ; : peeled off word edges as separate tokens.
std::vector<std::string> tokenize_words(std::string_view text);

// Placeholder text of variable k (1-based), e.g. "<V3>".
std::string placeholder(std::size_t one_based);

// Pieces of a delexicalised turn: literal text or a variable reference.
struct TurnPiece {
  std::string text;
  std::optional<std::size_t> variable;  // position in DelexDialogue::variables
};
std::vector<TurnPiece> split_placeholders(const DelexDialogue& delex, std::size_t turn_index);

// Instances the gold dialogue talks about: those whose name is mentioned, else
// the single instance best matching the final slot-value mentions.
std::vector<std::string> select_pertinent(const DelexDialogue& gold, const KnowledgeBase& global_kb);

}  // namespace todcsp
