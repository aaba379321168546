#pragma once

#include <string>

#include "todcsp/evaluation.hpp"
#include "todcsp/serialization.hpp"

namespace fixture {

inline std::string path(const std::string& rel) { return std::string(TODCSP_FIXTURE_DIR) + "/" + rel; }

inline todcsp::io::json load(const std::string& rel) {
  return todcsp::io::parse_json(todcsp::io::read_file(path(rel)), rel);
}

inline todcsp::Ontology ontology() { return todcsp::io::ontology_from_json(load("ontology.json")); }

inline todcsp::DelexDialogue delex(const std::string& rel) {
  return todcsp::delexicalize(todcsp::io::dialogue_from_json(load(rel)));
}

// The three ledger dialogues keyed by id.
inline todcsp::DelexDialogue ledger_delex(const std::string& id) {
  for (const auto& d : load("dialogues.json"))
    if (d["dialogue_id"] == id) return todcsp::delexicalize(todcsp::io::dialogue_from_json(d));
  throw std::runtime_error("no fixture dialogue " + id);
}

inline todcsp::KnowledgeBase ledger_kb(const std::string& id) {
  return todcsp::io::kb_from_json(load("kbs.json")[id], ontology());
}

inline todcsp::Assignment ledger_assignment(const std::string& id, const todcsp::DelexDialogue& d) {
  return todcsp::io::assignment_from_json(load("assignments.json")[id], d);
}

inline todcsp::CSPModel ledger_model(const std::string& id, const todcsp::AblationConfig& ablation = {}) {
  return todcsp::make_model(ledger_delex(id), ontology(), ledger_kb(id), todcsp::CueLexicon::defaults(), ablation);
}

inline todcsp::Corpus ledger_corpus() {
  todcsp::Corpus c;
  c.ontology = ontology();
  for (const char* id : {"spanish-choice", "no-offer", "polynesian"}) {
    todcsp::CorpusEntry e;
    e.delex = ledger_delex(id);
    e.kb = ledger_kb(id);
    e.assignment = ledger_assignment(id, e.delex);
    c.entries.push_back(std::move(e));
  }
  return c;
}

}  // namespace fixture
