#include "todcsp/relex.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <set>

#include "todcsp/constraints.hpp"
#include "todcsp/errors.hpp"
#include "todcsp/random.hpp"

namespace todcsp {

namespace {

std::vector<std::string> kb_values(const KnowledgeBase& kb, const std::string* slot) {
  std::set<std::string> values;
  for (const Instance& inst : kb.instances)
    for (const auto& [s, v] : inst.attributes)
      if (!slot || s == *slot) values.insert(v);
  return {values.begin(), values.end()};
}

// Most frequent value, ties to the lexicographically smallest.
std::optional<std::string> most_frequent(const KnowledgeBase& kb, const std::string* slot) {
  std::map<std::string, std::size_t> freq;
  for (const Instance& inst : kb.instances)
    for (const auto& [s, v] : inst.attributes)
      if (!slot || s == *slot) ++freq[v];
  std::optional<std::string> best;
  std::size_t best_count = 0;
  for (const auto& [value, count] : freq) {
    if (count > best_count) {
      best = value;
      best_count = count;
    }
  }
  return best;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string capitalized(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::string speaker_label(Speaker s) { return s == Speaker::user ? "User" : "System"; }

std::string join(const std::vector<std::string>& tokens, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (!out.empty()) out += ' ';
    out += tokens[i];
  }
  return out;
}

// Speaker and text of a "User: ..." / "System: ..." line, if it is one.
std::optional<std::pair<Speaker, std::string>> turn_line(std::string_view line) {
  while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
  while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
  for (Speaker s : {Speaker::user, Speaker::system}) {
    const std::string label = speaker_label(s);
    if (!line.starts_with(label)) continue;
    std::string_view rest = line.substr(label.size());
    if (!rest.empty() && rest.front() != ':' && !std::isspace(static_cast<unsigned char>(rest.front()))) continue;
    if (!rest.empty() && rest.front() == ':') rest.remove_prefix(1);
    while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
    return std::make_pair(s, std::string(rest));
  }
  return std::nullopt;
}

void align_turn(const DelexDialogue& delex, std::size_t t, const std::string& response_text, ParsedResponse& out) {
  const auto templ = tokenize_delex_turn(delex, t);
  const auto reply = tokenize_words(response_text);

  std::vector<std::size_t> literal;  // template positions of non-placeholder tokens
  for (std::size_t i = 0; i < templ.size(); ++i)
    if (!templ[i].variable) literal.push_back(i);
  std::vector<std::string> lt, lr;
  for (std::size_t i : literal) lt.push_back(lower(templ[i].text));
  for (const auto& r : reply) lr.push_back(lower(r));

  // Suffix LCS table, then a greedy front-to-back walk.
  const std::size_t a = lt.size(), b = lr.size();
  std::vector<std::vector<std::uint32_t>> lcs(a + 1, std::vector<std::uint32_t>(b + 1, 0));
  for (std::size_t i = a; i-- > 0;)
    for (std::size_t j = b; j-- > 0;)
      lcs[i][j] = lt[i] == lr[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
  std::vector<std::optional<std::size_t>> match(templ.size());  // template pos -> reply pos
  for (std::size_t i = 0, j = 0; i < a && j < b;) {
    if (lt[i] == lr[j] && lcs[i][j] == lcs[i + 1][j + 1] + 1) {
      match[literal[i]] = j;
      ++i;
      ++j;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      ++i;
    } else {
      ++j;
    }
  }

  // Group placeholders by the matched anchors around them.
  std::size_t p = 0;
  while (p < templ.size()) {
    if (!templ[p].variable) {
      ++p;
      continue;
    }
    std::size_t q = p;
    std::vector<std::size_t> group;
    while (q < templ.size() && !match[q]) {
      if (templ[q].variable) group.push_back(*templ[q].variable);
      ++q;
    }
    std::size_t lo = 0;
    for (std::size_t k = p; k-- > 0;)
      if (match[k]) {
        lo = *match[k] + 1;
        break;
      }
    const std::size_t hi = q < templ.size() ? *match[q] : reply.size();
    p = q;

    std::vector<std::string> values;
    if (hi <= lo) {
      for (std::size_t v : group) out.warnings.push_back(delex.variables[v].id + ": nothing to read at its position");
      continue;
    }
    if (group.size() == 1) {
      values.push_back(join(reply, lo, hi));
    } else if (hi - lo == group.size()) {
      for (std::size_t k = lo; k < hi; ++k) values.push_back(reply[k]);
    } else {
      for (std::size_t v : group)
        out.warnings.push_back(delex.variables[v].id + ": adjacent placeholders could not be separated");
      continue;
    }
    for (std::size_t k = 0; k < group.size(); ++k) {
      const Variable& var = delex.variables[group[k]];
      if (values[k] == "[MASK]") {
        out.warnings.push_back(var.id + ": left as [MASK]");
        continue;
      }
      try {
        out.assignment.values[group[k]] = normalize_value(values[k], var.kind);
      } catch (const ValidationError&) {
        out.warnings.push_back(var.id + ": '" + values[k] + "' is not an instance count");
      }
    }
  }
}

}  // namespace

Assignment relex_random(const DelexDialogue& delex, const KnowledgeBase& kb, std::uint64_t seed, bool type_restricted) {
  Assignment a;
  a.values.resize(delex.variables.size());
  if (kb.empty()) return a;
  Rng rng(derive_seed(seed, delex.dialogue_id));
  const auto pool = kb_values(kb, nullptr);
  for (std::size_t v = 0; v < delex.variables.size(); ++v) {
    const Variable& var = delex.variables[v];
    if (var.kind == VarKind::count) {
      a.values[v] = rng.between(0, static_cast<std::int64_t>(kb.size()));
      continue;
    }
    auto typed = type_restricted ? kb_values(kb, &var.slot) : std::vector<std::string>{};
    const auto& choices = typed.empty() ? pool : typed;
    if (!choices.empty()) a.values[v] = choices[rng.below(choices.size())];
  }
  return a;
}

Assignment relex_most_frequent(const DelexDialogue& delex, const KnowledgeBase& kb) {
  Assignment a;
  a.values.resize(delex.variables.size());
  if (kb.empty()) return a;
  const auto fallback = most_frequent(kb, nullptr);
  for (std::size_t v = 0; v < delex.variables.size(); ++v) {
    const Variable& var = delex.variables[v];
    if (var.kind == VarKind::count) {
      a.values[v] = static_cast<std::int64_t>(kb.size());
      continue;
    }
    auto best = most_frequent(kb, &var.slot);
    if (!best) best = fallback;
    if (best) a.values[v] = *best;
  }
  return a;
}

PromptBundle build_prompt(const DelexDialogue& delex, const KnowledgeBase& kb) {
  static constexpr std::string_view kFrame =
      "Below is an instruction that outlines a task, along with a Knowledge Base containing domain-specific "
      "information to be utilized, and a dialogue for you to work on. Return a response that effectively fulfills "
      "the task.\n"
      "\n"
      "### Instruction:\n"
      "Fill in the [MASK] placeholders in the dialogue based on the information provided in the Knowledge Base. "
      "Provide the updated dialogue exactly as it was given, but with the placeholders replaced by the appropriate "
      "values for each turn in the dialogue. If a turn does not contain any placeholders, leave the sentence "
      "unchanged. Turns should start with either User or System. Be aware of leaving blank spaces before "
      "punctuation as in the original (e.g. Hi , instead of Hi,)\n"
      "\n"
      "### Knowledge Base: \n";
  static constexpr std::array<std::string_view, 3> kShownSlots = {"area", "food", "price"};

  PromptBundle bundle;
  std::string& out = bundle.prompt;
  out = kFrame;
  for (std::size_t k = 0; k < kb.instances.size(); ++k) {
    std::string line = "Restaurant #" + std::to_string(k + 1) + " -";
    bool first = true;
    for (std::string_view slot : kShownSlots) {
      const std::string* value = kb.instances[k].value_of(slot);
      if (!value) continue;
      line += first ? " " : ", ";
      line += capitalized(slot) + ": " + *value;
      first = false;
    }
    out += line + "\n";
  }
  out += "\n### Dialogue: \n";
  for (std::size_t t = 0; t < delex.turns.size(); ++t) {
    out += speaker_label(delex.turns[t].speaker) + ": ";
    for (const TurnPiece& piece : split_placeholders(delex, t)) {
      if (piece.variable) {
        out += "[MASK]";
        bundle.manifest.push_back(delex.variables[*piece.variable].id);
      } else {
        out += piece.text;
      }
    }
    out += "\n";
  }
  out += "\n### Response: \n";
  return bundle;
}

ParsedResponse parse_llm_response(std::string_view response, const DelexDialogue& delex) {
  ParsedResponse out;
  out.assignment.values.resize(delex.variables.size());
  std::vector<std::pair<Speaker, std::string>> lines;
  std::size_t start = 0;
  while (start <= response.size()) {
    std::size_t end = response.find('\n', start);
    if (end == std::string_view::npos) end = response.size();
    if (auto line = turn_line(response.substr(start, end - start))) lines.push_back(std::move(*line));
    start = end + 1;
  }
  if (lines.size() != delex.turns.size())
    out.warnings.push_back("response has " + std::to_string(lines.size()) + " turns, dialogue has " +
                           std::to_string(delex.turns.size()));
  for (std::size_t t = 0; t < delex.turns.size(); ++t) {
    std::vector<std::string> ids;
    for (const TurnPiece& piece : split_placeholders(delex, t))
      if (piece.variable) ids.push_back(delex.variables[*piece.variable].id);
    if (t >= lines.size()) {
      for (const auto& id : ids) out.warnings.push_back(id + ": turn " + std::to_string(t) + " missing from response");
      continue;
    }
    if (lines[t].first != delex.turns[t].speaker)
      out.warnings.push_back("turn " + std::to_string(t) + ": speaker differs from the dialogue");
    if (!ids.empty()) align_turn(delex, t, lines[t].second, out);
  }
  return out;
}

LLMOutcome llm_relexicalize(const DelexDialogue& delex, const KnowledgeBase& kb, const LLMConfig& config) {
  config.validate();
  const PromptBundle bundle = build_prompt(delex, kb);
  LLMOutcome outcome;
  outcome.raw_response = chat_completion(config, bundle.prompt);
  ParsedResponse parsed = parse_llm_response(outcome.raw_response, delex);
  outcome.assignment = std::move(parsed.assignment);
  outcome.warnings = std::move(parsed.warnings);
  return outcome;
}

}  // namespace todcsp
