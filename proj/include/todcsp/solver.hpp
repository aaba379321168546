#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "todcsp/constraints.hpp"
#include "todcsp/dialogue.hpp"
#include "todcsp/domain.hpp"

namespace todcsp {

inline constexpr std::uint64_t kDefaultCap = 100000;
inline constexpr std::uint64_t kMinBucketCap = 101;

// A closed finite-domain model for one dialogue/kb pair.
struct CSPModel {
  std::string dialogue_id;
  std::vector<Variable> variables;
  ConstraintSet constraints;
  KnowledgeBase kb;
  KBIndex index;
  AblationConfig ablation;

  // Throws ValidationError unless every scope, domain and filter resolves.
  void validate() const;
};

CSPModel make_model(const DelexDialogue& delex, const Ontology& ontology, const KnowledgeBase& kb,
                    const CueLexicon& lexicon, const AblationConfig& ablation = {});

using Solution = std::vector<Value>;

enum class Bucket { zero, one, two_to_ten, eleven_to_hundred, over_hundred };
inline constexpr std::size_t kBucketCount = 5;
std::string_view to_string(Bucket b);
// Row label as printed in the solution-group tables ("0 sol.", "2-10 sol.", ...).
std::string_view bucket_label(Bucket b);
Bucket parse_bucket(std::string_view s);

// Throws CapError when the count is inexact below 101.
Bucket count_bucket(std::uint64_t count, bool exact);

struct SolveResult {
  std::vector<Solution> solutions;
  std::uint64_t count = 0;
  bool exact = true;
  Bucket bucket = Bucket::zero;
};

// Matching filter for a domain constraint under a given value lookup.
Filters constraint_filters(const CSPModel& model, const Constraint& c,
                           const std::vector<std::optional<Value>>& values);

// Throws ValidationError when a scope variable is unassigned.
bool satisfies(const CSPModel& model, const Assignment& assignment, const Constraint& constraint);

// Depth-first search with forward checking, variables in id order and values
// in domain order. Stops after `cap` solutions (exact=false if more exist).
SolveResult enumerate_solutions(const CSPModel& model, std::uint64_t cap = kDefaultCap,
                                bool keep_solutions = true);

struct BestMatch {
  Solution solution;
  std::size_t agreement = 0;
};

// Solution agreeing with `assignment` on the most variables, earliest in
// enumeration order among ties. nullopt iff the model has no solution.
std::optional<BestMatch> best_match(const CSPModel& model, const Assignment& assignment);

struct Violation {
  std::string rule;  // "C1".."C6" or "zero-solution"
  std::optional<std::size_t> constraint;
  std::vector<std::size_t> variables;
};

struct ConsistencyVerdict {
  bool consistent = false;
  std::vector<Violation> violations;
  bool zero_solution_rule_applied = false;
};

ConsistencyVerdict check_consistency(const CSPModel& model, const Assignment& assignment,
                                     const SolveResult& solve);

}  // namespace todcsp
