#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "todcsp/dialogue.hpp"
#include "todcsp/domain.hpp"

namespace todcsp {

// C1 slot-type membership, C2 cross-turn equality, C3 within-utterance
// distinctness, C4 no matching instance, C5 some matching instance,
// C6 exactly n matching instances.
enum class Family { C1 = 0, C2, C3, C4, C5, C6 };
inline constexpr std::size_t kFamilyCount = 6;
inline constexpr std::array<Family, kFamilyCount> kAllFamilies = {
    Family::C1, Family::C2, Family::C3, Family::C4, Family::C5, Family::C6};

std::string_view to_string(Family f);
Family parse_family(std::string_view s);
bool is_domain_family(Family f);

struct Constraint {
  Family family = Family::C1;
  std::vector<std::size_t> scope;    // variable positions, ascending
  std::vector<std::size_t> filters;  // C4/C5/C6 filter variables
  std::optional<std::size_t> count_variable;  // C6 only
  std::optional<std::size_t> turn_index;      // site of C3..C6
};

// Admissible values per variable position, sorted (integers ascending).
using DomainMap = std::vector<std::vector<Value>>;

struct ConstraintSet {
  std::vector<Constraint> constraints;
  DomainMap domains;
  std::vector<std::string> warnings;
};

class AblationConfig {
 public:
  AblationConfig() = default;
  // Accepts a comma separated list of C1..C6, "dialogic" (C2+C3), "domain"
  // (C4+C5+C6); empty means no ablation. Throws UsageError.
  static AblationConfig parse(std::string_view spec);
  static AblationConfig without(Family f);

  bool removes(Family f) const { return removed_[static_cast<std::size_t>(f)]; }
  void remove(Family f) { removed_[static_cast<std::size_t>(f)] = true; }
  bool empty() const;
  // "C1,C4", "" for none.
  std::string spec() const;
  // Row label as in the ablation tables, e.g. "all except C6".
  std::string label() const;

  friend bool operator==(const AblationConfig&, const AblationConfig&) = default;

 private:
  std::array<bool, kFamilyCount> removed_{};
};

// Standard ablation rows: all except C1..C6, all except dialogic, all except domain.
std::vector<AblationConfig> standard_ablations();

// Word lists driving cue detection. Multi-word cues are space separated;
// cues starting with an apostrophe or "n'" match as token suffixes.
struct CueLexicon {
  std::vector<std::string> none_cues;
  std::vector<std::string> exists_cues;
  std::vector<std::string> entity_slots;
  // Phrases whose words never count as cues ("no problem").
  std::vector<std::string> ignore_phrases;

  static CueLexicon defaults();
};

// Delexicalised turn split into tokens; placeholders are single tokens.
struct TurnToken {
  std::string text;
  std::optional<std::size_t> variable;
  std::size_t clause = 0;
};
std::vector<TurnToken> tokenize_delex_turn(const DelexDialogue& delex, std::size_t turn_index);

struct CueSite {
  std::size_t turn_index = 0;
  std::size_t clause = 0;
  Cue cue = Cue::exists_cue;
  std::optional<std::size_t> count_variable;
  std::optional<std::size_t> anchor_variable;  // annotated span that raised the site
};

// Cue sites of one system turn (user turns yield nothing).
std::vector<CueSite> detect_cues(const DelexDialogue& delex, std::size_t turn_index,
                                 const CueLexicon& lexicon);

DomainMap build_domains(const std::vector<Variable>& variables, const Ontology& ontology,
                        std::size_t kb_size, bool ablate_c1);

std::vector<Constraint> extract_equalities(const std::vector<Variable>& variables);

std::vector<Constraint> extract_alldiff(const std::vector<Variable>& variables,
                                        const std::vector<Constraint>& equality_classes);

std::vector<Constraint> extract_domain_constraints(const DelexDialogue& delex,
                                                   const std::vector<CueSite>& sites,
                                                   std::vector<std::string>* warnings = nullptr);

ConstraintSet extract_constraints(const DelexDialogue& delex, const Ontology& ontology,
                                  const KnowledgeBase& kb, const CueLexicon& lexicon,
                                  const AblationConfig& ablation = {});

// Throws ValidationError when a scope references a missing variable, a C6
// has no count variable, or a C2 pair also sits in a C3 scope.
void validate_constraint_set(const ConstraintSet& set, const std::vector<Variable>& variables);

struct CoverageRow {
  Family family = Family::C1;
  std::size_t variables = 0;
  double proportion = 0.0;
};

// Distinct variables touched by each family over a corpus. C1 covers every variable.
std::vector<CoverageRow> coverage_stats(std::span<const ConstraintSet* const> sets);

}  // namespace todcsp
