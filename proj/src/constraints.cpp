#include "todcsp/constraints.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "todcsp/errors.hpp"

namespace todcsp {

namespace {

bool is_clause_punct(std::string_view t) { return t == "." || t == "?" || t == "!" || t == ";"; }

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_words(std::string_view phrase) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : phrase) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) words.push_back(lower(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) words.push_back(lower(cur));
  return words;
}

bool word_matches(std::string_view cue, std::string_view token) {
  if (cue.starts_with('\'') || cue.starts_with("n'")) return token.ends_with(cue);
  return token == cue;
}

// Positions in `tokens` where the phrase starts (words compared lowercase).
std::vector<std::size_t> phrase_hits(const std::vector<TurnToken>& tokens, std::string_view phrase) {
  std::vector<std::size_t> hits;
  const auto words = split_words(phrase);
  if (words.empty()) return hits;
  for (std::size_t i = 0; i + words.size() <= tokens.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < words.size() && ok; ++k) {
      const TurnToken& tok = tokens[i + k];
      ok = !tok.variable && word_matches(words[k], lower(tok.text)) && tok.clause == tokens[i].clause;
    }
    if (ok) hits.push_back(i);
  }
  return hits;
}

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

Family family_for(Cue cue) {
  switch (cue) {
    case Cue::none_cue: return Family::C4;
    case Cue::exists_cue: return Family::C5;
    case Cue::exact_cue: return Family::C6;
  }
  return Family::C5;
}

}  // namespace

std::string_view to_string(Family f) {
  static constexpr std::array<std::string_view, kFamilyCount> names = {"C1", "C2", "C3", "C4", "C5", "C6"};
  return names[static_cast<std::size_t>(f)];
}

Family parse_family(std::string_view s) {
  const std::string t = lower(s);
  for (Family f : kAllFamilies)
    if (t == lower(to_string(f))) return f;
  throw ValidationError("unknown constraint family '" + std::string(s) + "'");
}

bool is_domain_family(Family f) { return f == Family::C4 || f == Family::C5 || f == Family::C6; }

AblationConfig AblationConfig::parse(std::string_view spec) {
  AblationConfig cfg;
  std::string token;
  auto flush = [&] {
    std::string t = lower(token);
    t.erase(0, t.find_first_not_of(" \t"));
    t.erase(t.find_last_not_of(" \t") + 1);
    token.clear();
    if (t.empty() || t == "none") return;
    if (t == "dialogic") {
      cfg.remove(Family::C2);
      cfg.remove(Family::C3);
    } else if (t == "domain") {
      cfg.remove(Family::C4);
      cfg.remove(Family::C5);
      cfg.remove(Family::C6);
    } else {
      try {
        cfg.remove(parse_family(t));
      } catch (const ValidationError&) {
        throw UsageError("unknown ablation '" + t + "' (expected C1..C6, dialogic or domain)");
      }
    }
  };
  for (char c : spec) {
    if (c == ',') flush();
    else token.push_back(c);
  }
  flush();
  return cfg;
}

AblationConfig AblationConfig::without(Family f) {
  AblationConfig cfg;
  cfg.remove(f);
  return cfg;
}

bool AblationConfig::empty() const {
  return std::none_of(removed_.begin(), removed_.end(), [](bool b) { return b; });
}

std::string AblationConfig::spec() const {
  std::string out;
  for (Family f : kAllFamilies) {
    if (!removes(f)) continue;
    if (!out.empty()) out += ',';
    out += to_string(f);
  }
  return out;
}

std::string AblationConfig::label() const {
  if (empty()) return "all";
  if (*this == parse("dialogic")) return "all except dialogic";
  if (*this == parse("domain")) return "all except domain";
  std::string out = "all except ";
  bool first = true;
  for (Family f : kAllFamilies) {
    if (!removes(f)) continue;
    if (!first) out += '+';
    out += to_string(f);
    first = false;
  }
  return out;
}

std::vector<AblationConfig> standard_ablations() {
  std::vector<AblationConfig> out;
  for (Family f : kAllFamilies) out.push_back(AblationConfig::without(f));
  out.push_back(AblationConfig::parse("dialogic"));
  out.push_back(AblationConfig::parse("domain"));
  return out;
}

CueLexicon CueLexicon::defaults() {
  CueLexicon l;
  l.none_cues = {"no", "none", "not", "n't", "nothing"};
  l.exists_cues = {"many", "several", "some", "a few", "a number of", "various", "multiple", "numerous", "lots",
                   "plenty"};
  l.entity_slots = {"name"};
  l.ignore_phrases = {"no problem", "no worries", "not a problem"};
  return l;
}

std::vector<TurnToken> tokenize_delex_turn(const DelexDialogue& delex, std::size_t turn_index) {
  std::vector<TurnToken> tokens;
  for (const TurnPiece& piece : split_placeholders(delex, turn_index)) {
    if (piece.variable) {
      tokens.push_back({piece.text, piece.variable, 0});
      continue;
    }
    for (auto& word : tokenize_words(piece.text)) tokens.push_back({std::move(word), std::nullopt, 0});
  }
  std::size_t clause = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    tokens[i].clause = clause;
    if (is_clause_punct(tokens[i].text)) ++clause;
    else if (tokens[i].text == "," && !(i > 0 && tokens[i - 1].variable)) ++clause;
  }
  return tokens;
}

std::vector<CueSite> detect_cues(const DelexDialogue& delex, std::size_t turn_index, const CueLexicon& lexicon) {
  std::vector<CueSite> sites;
  if (delex.turns.at(turn_index).speaker != Speaker::system) return sites;
  const auto tokens = tokenize_delex_turn(delex, turn_index);

  std::set<std::size_t> exact_clauses;
  bool annotated = false;
  for (const TurnToken& tok : tokens) {
    if (!tok.variable) continue;
    const Variable& var = delex.variables[*tok.variable];
    if (var.kind == VarKind::count) {
      sites.push_back({turn_index, tok.clause, Cue::exact_cue, *tok.variable, std::nullopt});
      exact_clauses.insert(tok.clause);
    }
    annotated = annotated || var.cue.has_value();
  }

  std::map<std::size_t, Cue> chosen;  // clause -> strongest non-exact cue
  auto offer = [&](std::size_t clause, Cue cue) {
    if (exact_clauses.contains(clause)) return;
    auto [it, fresh] = chosen.try_emplace(clause, cue);
    if (!fresh && cue == Cue::none_cue) it->second = cue;
  };

  if (annotated) {
    for (const TurnToken& tok : tokens) {
      if (!tok.variable) continue;
      const Variable& var = delex.variables[*tok.variable];
      if (!var.cue || var.kind == VarKind::count) continue;
      if (*var.cue == Cue::exact_cue) {
        sites.push_back({turn_index, tok.clause, Cue::exact_cue, std::nullopt, *tok.variable});
        continue;
      }
      offer(tok.clause, *var.cue);
    }
  } else {
    std::set<std::size_t> ignored;  // token positions inside ignore phrases
    for (const auto& phrase : lexicon.ignore_phrases)
      for (std::size_t start : phrase_hits(tokens, phrase))
        for (std::size_t k = 0; k < split_words(phrase).size(); ++k) ignored.insert(start + k);
    for (const auto& cue : lexicon.none_cues)
      for (std::size_t at : phrase_hits(tokens, cue))
        if (!ignored.contains(at)) offer(tokens[at].clause, Cue::none_cue);
    for (const auto& cue : lexicon.exists_cues)
      for (std::size_t at : phrase_hits(tokens, cue))
        if (!ignored.contains(at)) offer(tokens[at].clause, Cue::exists_cue);
    for (const TurnToken& tok : tokens) {
      if (!tok.variable) continue;
      const Variable& var = delex.variables[*tok.variable];
      if (var.kind == VarKind::value &&
          std::find(lexicon.entity_slots.begin(), lexicon.entity_slots.end(), var.slot) != lexicon.entity_slots.end())
        offer(tok.clause, Cue::exists_cue);
    }
  }
  for (const auto& [clause, cue] : chosen) sites.push_back({turn_index, clause, cue, std::nullopt, std::nullopt});
  std::stable_sort(sites.begin(), sites.end(), [](const CueSite& a, const CueSite& b) { return a.clause < b.clause; });
  return sites;
}

DomainMap build_domains(const std::vector<Variable>& variables, const Ontology& ontology, std::size_t kb_size,
                        bool ablate_c1) {
  DomainMap domains;
  std::vector<Value> union_domain;
  if (ablate_c1)
    for (auto& v : ontology.all_values()) union_domain.emplace_back(v);
  for (const Variable& var : variables) {
    std::vector<Value> dom;
    if (var.kind == VarKind::count) {
      for (std::size_t n = 0; n <= kb_size; ++n) dom.emplace_back(static_cast<std::int64_t>(n));
    } else {
      const SlotType* slot = ontology.find(var.slot);
      if (!slot) throw ValidationError("variable " + var.id + " has slot '" + var.slot + "' missing from the ontology");
      if (ablate_c1) {
        dom = union_domain;
      } else {
        for (const auto& v : slot->values) dom.emplace_back(v);
      }
    }
    domains.push_back(std::move(dom));
  }
  return domains;
}

std::vector<Constraint> extract_equalities(const std::vector<Variable>& variables) {
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < variables.size(); ++i) {
    const Variable& v = variables[i];
    if (v.kind != VarKind::value) continue;
    groups[{v.slot, std::get<std::string>(v.gold)}].push_back(i);
  }
  std::vector<Constraint> out;
  for (auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    Constraint c;
    c.family = Family::C2;
    c.scope = members;
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const Constraint& a, const Constraint& b) { return a.scope < b.scope; });
  return out;
}

std::vector<Constraint> extract_alldiff(const std::vector<Variable>& variables,
                                        const std::vector<Constraint>& equality_classes) {
  std::vector<std::optional<std::size_t>> class_of(variables.size());
  for (std::size_t k = 0; k < equality_classes.size(); ++k)
    for (std::size_t v : equality_classes[k].scope)
      if (v < class_of.size()) class_of[v] = k;

  std::map<std::pair<std::size_t, std::string>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i].kind == VarKind::value) groups[{variables[i].turn_index, variables[i].slot}].push_back(i);

  std::vector<Constraint> out;
  for (const auto& [key, members] : groups) {
    if (members.size() < 2) continue;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    bool exempt = false;
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        const auto& ca = class_of[members[a]];
        if (ca && ca == class_of[members[b]]) exempt = true;
        else pairs.emplace_back(members[a], members[b]);
      }
    }
    if (!exempt) {
      out.push_back({Family::C3, members, {}, std::nullopt, key.first});
      continue;
    }
    for (const auto& [a, b] : pairs) out.push_back({Family::C3, {a, b}, {}, std::nullopt, key.first});
  }
  return out;
}

std::vector<Constraint> extract_domain_constraints(const DelexDialogue& delex, const std::vector<CueSite>& sites,
                                                   std::vector<std::string>* warnings) {
  std::map<std::size_t, std::vector<TurnToken>> token_cache;
  auto tokens_of = [&](std::size_t t) -> const std::vector<TurnToken>& {
    auto it = token_cache.find(t);
    if (it == token_cache.end()) it = token_cache.emplace(t, tokenize_delex_turn(delex, t)).first;
    return it->second;
  };
  auto value_vars = [&](std::size_t t, std::optional<std::size_t> clause) {
    std::vector<std::size_t> out;
    for (const TurnToken& tok : tokens_of(t))
      if (tok.variable && delex.variables[*tok.variable].kind == VarKind::value && (!clause || tok.clause == *clause))
        out.push_back(*tok.variable);
    return sorted_unique(out);
  };

  std::vector<Constraint> out;
  std::set<std::pair<Family, std::vector<std::size_t>>> seen;
  for (const CueSite& site : sites) {
    if (site.cue == Cue::exact_cue && !site.count_variable) {
      if (warnings)
        warnings->push_back(delex.dialogue_id + " turn " + std::to_string(site.turn_index) +
                            ": exact_cue without a count variable, site skipped");
      continue;
    }
    std::vector<std::size_t> filters = value_vars(site.turn_index, site.clause);
    if (filters.empty()) filters = value_vars(site.turn_index, std::nullopt);
    for (std::size_t t = site.turn_index; filters.empty() && t-- > 0;)
      if (delex.turns[t].speaker == Speaker::user) filters = value_vars(t, std::nullopt);

    Constraint c;
    c.family = family_for(site.cue);
    c.filters = filters;
    c.count_variable = site.count_variable;
    c.turn_index = site.turn_index;
    c.scope = filters;
    if (site.count_variable) c.scope.push_back(*site.count_variable);
    c.scope = sorted_unique(c.scope);
    if (c.scope.empty()) continue;
    if (!seen.insert({c.family, c.scope}).second) continue;
    out.push_back(std::move(c));
  }
  return out;
}

ConstraintSet extract_constraints(const DelexDialogue& delex, const Ontology& ontology, const KnowledgeBase& kb,
                                  const CueLexicon& lexicon, const AblationConfig& ablation) {
  ConstraintSet set;
  set.domains = build_domains(delex.variables, ontology, kb.size(), ablation.removes(Family::C1));
  if (!ablation.removes(Family::C1))
    for (std::size_t i = 0; i < delex.variables.size(); ++i)
      set.constraints.push_back({Family::C1, {i}, {}, std::nullopt, std::nullopt});

  // C3 exemptions follow the gold equality classes even when C2 itself is ablated.
  auto classes = extract_equalities(delex.variables);
  auto alldiff = extract_alldiff(delex.variables, classes);
  if (!ablation.removes(Family::C2)) set.constraints.insert(set.constraints.end(), classes.begin(), classes.end());
  if (!ablation.removes(Family::C3)) set.constraints.insert(set.constraints.end(), alldiff.begin(), alldiff.end());

  std::vector<CueSite> sites;
  for (std::size_t t = 0; t < delex.turns.size(); ++t) {
    auto turn_sites = detect_cues(delex, t, lexicon);
    sites.insert(sites.end(), turn_sites.begin(), turn_sites.end());
  }
  for (Constraint& c : extract_domain_constraints(delex, sites, &set.warnings))
    if (!ablation.removes(c.family)) set.constraints.push_back(std::move(c));
  return set;
}

void validate_constraint_set(const ConstraintSet& set, const std::vector<Variable>& variables) {
  const std::size_t n = variables.size();
  if (set.domains.size() != n)
    throw ValidationError("model: " + std::to_string(set.domains.size()) + " domains for " + std::to_string(n) +
                          " variables");
  std::set<std::pair<std::size_t, std::size_t>> equal_pairs;
  for (const Constraint& c : set.constraints) {
    const std::string tag(to_string(c.family));
    if (c.scope.empty()) throw ValidationError("model: " + tag + " constraint with empty scope");
    for (std::size_t v : c.scope)
      if (v >= n) throw ValidationError("model: " + tag + " references unknown variable #" + std::to_string(v + 1));
    for (std::size_t v : c.filters) {
      if (v >= n || variables[v].kind != VarKind::value)
        throw ValidationError("model: " + tag + " filter must be a value variable");
      if (!std::binary_search(c.scope.begin(), c.scope.end(), v))
        throw ValidationError("model: " + tag + " filter outside its scope");
    }
    if (c.family == Family::C6) {
      if (!c.count_variable || *c.count_variable >= n || variables[*c.count_variable].kind != VarKind::count)
        throw ValidationError("model: C6 needs exactly one count variable");
    } else if (c.count_variable) {
      throw ValidationError("model: only C6 carries a count variable");
    }
    if (c.family == Family::C2)
      for (std::size_t a = 0; a < c.scope.size(); ++a)
        for (std::size_t b = a + 1; b < c.scope.size(); ++b) equal_pairs.insert({c.scope[a], c.scope[b]});
  }
  for (const Constraint& c : set.constraints) {
    if (c.family != Family::C3) continue;
    for (std::size_t a = 0; a < c.scope.size(); ++a)
      for (std::size_t b = a + 1; b < c.scope.size(); ++b)
        if (equal_pairs.contains({c.scope[a], c.scope[b]}))
          throw ValidationError("model: variables " + variables[c.scope[a]].id + " and " + variables[c.scope[b]].id +
                                " are both equal (C2) and distinct (C3)");
  }
}

std::vector<CoverageRow> coverage_stats(std::span<const ConstraintSet* const> sets) {
  std::size_t total = 0;
  std::array<std::size_t, kFamilyCount> touched{};
  for (const ConstraintSet* set : sets) {
    total += set->domains.size();
    std::array<std::set<std::size_t>, kFamilyCount> vars;
    for (const Constraint& c : set->constraints) vars[static_cast<std::size_t>(c.family)].insert(c.scope.begin(), c.scope.end());
    for (std::size_t f = 1; f < kFamilyCount; ++f) touched[f] += vars[f].size();
  }
  touched[0] = total;
  std::vector<CoverageRow> rows;
  for (Family f : kAllFamilies) {
    const std::size_t n = touched[static_cast<std::size_t>(f)];
    rows.push_back({f, n, total == 0 ? 0.0 : static_cast<double>(n) / static_cast<double>(total)});
  }
  return rows;
}

}  // namespace todcsp
