#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "todcsp/constraints.hpp"
#include "todcsp/dialogue.hpp"
#include "todcsp/domain.hpp"
#include "todcsp/evaluation.hpp"
#include "todcsp/solver.hpp"

// JSON schemas of every file the tools read or write. Parsing failures throw
// ValidationError with the offending field.
namespace todcsp::io {

using nlohmann::json;

json parse_json(const std::string& text, const std::string& what);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

Ontology ontology_from_json(const json& j);
json to_json(const Ontology& ontology);

// Validated and canonicalised against the ontology.
KnowledgeBase kb_from_json(const json& j, const Ontology& ontology);
// Canonicalised only (no ontology at hand).
KnowledgeBase kb_from_json(const json& j);
json to_json(const KnowledgeBase& kb);

Dialogue dialogue_from_json(const json& j);
json to_json(const Dialogue& d);

json value_to_json(const Value& v);
Value value_from_json(const json& j, VarKind kind);

json to_json(const DelexDialogue& d);
DelexDialogue delex_from_json(const json& j);

// {"V1": "spanish", "V2": 3, "V3": null}. Unknown ids throw; missing ids are unfilled.
json to_json(const Assignment& a, const DelexDialogue& d);
Assignment assignment_from_json(const json& j, const DelexDialogue& d);

CueLexicon lexicon_from_json(const json& j);
json to_json(const CueLexicon& l);

json to_json(const Constraint& c, const std::vector<Variable>& variables);
// Model file: {dialogue_id, ablation, variables, kb, domains, constraints, warnings}.
json to_json(const CSPModel& m);
CSPModel model_from_json(const json& j);

json to_json(const SolveResult& r, const CSPModel& m, bool include_solutions);
json solution_to_json(const Solution& s, const std::vector<Variable>& variables);
json to_json(const ConsistencyVerdict& v, const std::vector<std::string>& variable_ids,
             const std::vector<Constraint>* constraints = nullptr);

json to_json(const DialogueResult& r);
json to_json(const Report& r);
Report report_from_json(const json& j);

}  // namespace todcsp::io
