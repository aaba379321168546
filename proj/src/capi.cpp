#include "todcsp/todcsp.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <string>

#include "todcsp/errors.hpp"
#include "todcsp/evaluation.hpp"
#include "todcsp/random.hpp"
#include "todcsp/relex.hpp"
#include "todcsp/multiwoz.hpp"
#include "todcsp/serialization.hpp"

struct tc_model {
  todcsp::CSPModel model;
};
struct tc_solve_result {
  todcsp::SolveResult result;
  todcsp::CSPModel model;
};
struct tc_corpus {
  todcsp::Corpus corpus;
};
struct tc_report {
  todcsp::Report report;
};

namespace {

using namespace todcsp;
using io::json;

thread_local std::string last_error;

template <class Fn>
tc_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return TC_OK;
  } catch (const UsageError& e) {
    last_error = e.what();
    return TC_USAGE;
  } catch (const ValidationError& e) {
    last_error = e.what();
    return TC_VALIDATION;
  } catch (const CapError& e) {
    last_error = e.what();
    return TC_CAP;
  } catch (const TransportError& e) {
    last_error = e.what();
    return TC_TRANSPORT;
  } catch (const std::exception& e) {
    last_error = e.what();
    return TC_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return TC_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw UsageError(std::string(what) + " must not be NULL");
}

json parse(const char* text, const char* what) {
  require(text, what);
  return io::parse_json(text, what);
}

DelexDialogue delex_arg(const char* text) { return io::delex_from_json(parse(text, "delexicalised dialogue")); }

KnowledgeBase kb_arg(const char* text) { return io::kb_from_json(parse(text, "kb")); }

std::string dump(const json& j) { return j.dump(2); }

json strings(const std::vector<std::string>& v) { return json(v); }

}  // namespace

extern "C" {

const char* tc_version(void) { return TODCSP_VERSION; }

const char* tc_last_error(void) { return last_error.c_str(); }

void tc_string_free(char* s) { std::free(s); }

tc_status tc_delexicalize(const char* dialogue_json, char** delex_json) {
  return guarded([&] {
    require(delex_json, "output");
    const Dialogue d = io::dialogue_from_json(parse(dialogue_json, "dialogue"));
    *delex_json = dup(dump(io::to_json(delexicalize(d))));
  });
}

tc_status tc_relexicalize(const char* delex_json, const char* assignment_json, char** dialogue_json) {
  return guarded([&] {
    require(dialogue_json, "output");
    const DelexDialogue d = delex_arg(delex_json);
    const Assignment a = io::assignment_from_json(parse(assignment_json, "assignment"), d);
    json turns = json::array();
    for (const RelexTurn& t : relexicalize(d, a))
      turns.push_back({{"speaker", std::string(to_string(t.speaker))}, {"text", t.text}});
    *dialogue_json = dup(dump({{"dialogue_id", d.dialogue_id}, {"turns", turns}}));
  });
}

tc_status tc_gold_assignment(const char* delex_json, char** assignment_json) {
  return guarded([&] {
    require(assignment_json, "output");
    const DelexDialogue d = delex_arg(delex_json);
    *assignment_json = dup(dump(io::to_json(gold_assignment(d), d)));
  });
}

tc_status tc_model_build(const char* delex_json, const char* ontology_json, const char* kb_json,
                         const char* lexicon_json, const char* ablation, tc_model** out) {
  return guarded([&] {
    require(out, "output");
    const DelexDialogue d = delex_arg(delex_json);
    const Ontology ontology = io::ontology_from_json(parse(ontology_json, "ontology"));
    const KnowledgeBase kb = kb_arg(kb_json);
    const CueLexicon lexicon = lexicon_json ? io::lexicon_from_json(parse(lexicon_json, "lexicon")) : CueLexicon::defaults();
    const AblationConfig config = AblationConfig::parse(ablation ? ablation : "");
    *out = new tc_model{make_model(d, ontology, kb, lexicon, config)};
  });
}

tc_status tc_model_from_json(const char* model_json, tc_model** out) {
  return guarded([&] {
    require(out, "output");
    *out = new tc_model{io::model_from_json(parse(model_json, "model"))};
  });
}

tc_status tc_model_to_json(const tc_model* model, char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "output");
    *out = dup(dump(io::to_json(model->model)));
  });
}

void tc_model_free(tc_model* model) { delete model; }

tc_status tc_model_solve(const tc_model* model, uint64_t cap, int keep_solutions, tc_solve_result** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "output");
    *out = new tc_solve_result{enumerate_solutions(model->model, cap, keep_solutions != 0), model->model};
  });
}

uint64_t tc_solve_result_count(const tc_solve_result* r) { return r ? r->result.count : 0; }

int tc_solve_result_exact(const tc_solve_result* r) { return r && r->result.exact ? 1 : 0; }

tc_status tc_solve_result_bucket(const tc_solve_result* r, const char** label) {
  return guarded([&] {
    require(r, "solve result");
    require(label, "output");
    *label = to_string(count_bucket(r->result.count, r->result.exact)).data();
  });
}

size_t tc_solve_result_size(const tc_solve_result* r) { return r ? r->result.solutions.size() : 0; }

tc_status tc_solve_result_solution(const tc_solve_result* r, size_t index, char** solution_json) {
  return guarded([&] {
    require(r, "solve result");
    require(solution_json, "output");
    if (index >= r->result.solutions.size()) throw UsageError("solution index out of range");
    *solution_json = dup(io::solution_to_json(r->result.solutions[index], r->model.variables).dump());
  });
}

tc_status tc_solve_result_to_json(const tc_solve_result* r, int include_solutions, char** out) {
  return guarded([&] {
    require(r, "solve result");
    require(out, "output");
    *out = dup(dump(io::to_json(r->result, r->model, include_solutions != 0)));
  });
}

void tc_solve_result_free(tc_solve_result* r) { delete r; }

tc_status tc_model_evaluate(const tc_model* model, const char* assignment_json, uint64_t cap, char** result_json) {
  return guarded([&] {
    require(model, "model");
    require(result_json, "output");
    DelexDialogue shape;
    shape.dialogue_id = model->model.dialogue_id;
    shape.variables = model->model.variables;
    const Assignment a = io::assignment_from_json(parse(assignment_json, "assignment"), shape);
    const DialogueResult r = evaluate_dialogue(model->model, a, cap);
    json j = io::to_json(r);
    j["violations"] = io::to_json(r.verdict, r.variable_ids, &model->model.constraints.constraints)["violations"];
    *result_json = dup(dump(j));
  });
}

tc_status tc_sample_kb(const char* delex_json, const char* global_kb_json, uint64_t seed, char** kb_json) {
  return guarded([&] {
    require(kb_json, "output");
    const DelexDialogue d = delex_arg(delex_json);
    const KnowledgeBase global = kb_arg(global_kb_json);
    const auto pertinent = select_pertinent(d, global);
    *kb_json = dup(dump(io::to_json(sample_kb(global, pertinent, derive_seed(seed, d.dialogue_id)))));
  });
}

tc_status tc_relex_random(const char* delex_json, const char* kb_json, uint64_t seed, int type_restricted,
                          char** assignment_json) {
  return guarded([&] {
    require(assignment_json, "output");
    const DelexDialogue d = delex_arg(delex_json);
    *assignment_json = dup(dump(io::to_json(relex_random(d, kb_arg(kb_json), seed, type_restricted != 0), d)));
  });
}

tc_status tc_relex_most_frequent(const char* delex_json, const char* kb_json, char** assignment_json) {
  return guarded([&] {
    require(assignment_json, "output");
    const DelexDialogue d = delex_arg(delex_json);
    *assignment_json = dup(dump(io::to_json(relex_most_frequent(d, kb_arg(kb_json)), d)));
  });
}

tc_status tc_build_prompt(const char* delex_json, const char* kb_json, char** prompt, char** manifest_json) {
  return guarded([&] {
    require(prompt, "output");
    const PromptBundle bundle = build_prompt(delex_arg(delex_json), kb_arg(kb_json));
    *prompt = dup(bundle.prompt);
    if (manifest_json) *manifest_json = dup(strings(bundle.manifest).dump());
  });
}

tc_status tc_parse_response(const char* response, const char* delex_json, char** assignment_json,
                            char** warnings_json) {
  return guarded([&] {
    require(response, "response");
    require(assignment_json, "output");
    const DelexDialogue d = delex_arg(delex_json);
    const ParsedResponse parsed = parse_llm_response(response, d);
    *assignment_json = dup(dump(io::to_json(parsed.assignment, d)));
    if (warnings_json) *warnings_json = dup(strings(parsed.warnings).dump());
  });
}

void tc_llm_config_default(tc_llm_config* config) {
  if (!config) return;
  static const LLMConfig defaults;
  config->api_base = std::getenv("LLM_API_BASE");
  config->api_key = std::getenv("LLM_API_KEY");
  config->model_name = defaults.model_name.c_str();
  config->temperature = defaults.temperature;
  config->timeout_ms = static_cast<uint32_t>(defaults.timeout.count());
  config->retries = defaults.retries;
}

tc_status tc_llm_relexicalize(const char* delex_json, const char* kb_json, const tc_llm_config* config,
                              char** assignment_json, char** raw_response, char** warnings_json) {
  return guarded([&] {
    require(config, "config");
    require(assignment_json, "output");
    LLMConfig c;
    c.api_base = config->api_base ? config->api_base : "";
    c.api_key = config->api_key ? config->api_key : "";
    if (config->model_name) c.model_name = config->model_name;
    c.temperature = config->temperature;
    c.timeout = std::chrono::milliseconds(config->timeout_ms);
    c.retries = config->retries;
    const DelexDialogue d = delex_arg(delex_json);
    const LLMOutcome outcome = llm_relexicalize(d, kb_arg(kb_json), c);
    *assignment_json = dup(dump(io::to_json(outcome.assignment, d)));
    if (raw_response) *raw_response = dup(outcome.raw_response);
    if (warnings_json) *warnings_json = dup(strings(outcome.warnings).dump());
  });
}

tc_status tc_corpus_create(const char* ontology_json, const char* lexicon_json, tc_corpus** out) {
  return guarded([&] {
    require(out, "output");
    auto corpus = std::make_unique<tc_corpus>();
    corpus->corpus.ontology = io::ontology_from_json(parse(ontology_json, "ontology"));
    if (lexicon_json) corpus->corpus.lexicon = io::lexicon_from_json(parse(lexicon_json, "lexicon"));
    *out = corpus.release();
  });
}

tc_status tc_corpus_add(tc_corpus* corpus, const char* delex_json, const char* kb_json, const char* assignment_json) {
  return guarded([&] {
    require(corpus, "corpus");
    CorpusEntry e;
    e.delex = delex_arg(delex_json);
    e.kb = io::kb_from_json(parse(kb_json, "kb"), corpus->corpus.ontology);
    if (assignment_json)
      e.assignment = io::assignment_from_json(parse(assignment_json, "assignment"), e.delex);
    else
      e.assignment.values.resize(e.delex.variables.size());
    for (const CorpusEntry& other : corpus->corpus.entries)
      if (other.delex.dialogue_id == e.delex.dialogue_id)
        throw ValidationError("duplicate dialogue id '" + e.delex.dialogue_id + "'");
    corpus->corpus.entries.push_back(std::move(e));
  });
}

size_t tc_corpus_size(const tc_corpus* corpus) { return corpus ? corpus->corpus.entries.size() : 0; }

void tc_corpus_free(tc_corpus* corpus) { delete corpus; }

void tc_eval_options_default(tc_eval_options* options) {
  if (!options) return;
  options->cap = kDefaultCap;
  options->concurrency = 1;
  options->seed = 0;
  options->ablation = nullptr;
  options->with_ablations = 0;
  options->strategy = nullptr;
}

tc_status tc_corpus_evaluate(const tc_corpus* corpus, const tc_eval_options* options, tc_report** out) {
  return guarded([&] {
    require(corpus, "corpus");
    require(out, "output");
    tc_eval_options defaults;
    tc_eval_options_default(&defaults);
    const tc_eval_options& o = options ? *options : defaults;
    EvalOptions eo;
    eo.cap = o.cap;
    eo.concurrency = o.concurrency;
    eo.seed = o.seed;
    eo.ablation = AblationConfig::parse(o.ablation ? o.ablation : "");
    eo.with_ablations = o.with_ablations != 0;
    eo.strategy = o.strategy ? o.strategy : "";
    if (corpus->corpus.entries.empty()) throw ValidationError("no dialogues to evaluate");
    *out = new tc_report{build_report(corpus->corpus, eo)};
  });
}

tc_status tc_corpus_coverage(const tc_corpus* corpus, const char* ablation, char** coverage_json) {
  return guarded([&] {
    require(corpus, "corpus");
    require(coverage_json, "output");
    const AblationConfig config = AblationConfig::parse(ablation ? ablation : "");
    std::vector<ConstraintSet> sets;
    for (const CorpusEntry& e : corpus->corpus.entries)
      sets.push_back(extract_constraints(e.delex, corpus->corpus.ontology, e.kb, corpus->corpus.lexicon, config));
    std::vector<const ConstraintSet*> pointers;
    for (const ConstraintSet& s : sets) pointers.push_back(&s);
    json rows = json::array();
    for (const CoverageRow& row : coverage_stats(pointers))
      rows.push_back({{"constraint", std::string(to_string(row.family))},
                      {"variables", row.variables},
                      {"coverage", row.proportion}});
    *coverage_json = dup(dump(rows));
  });
}

tc_status tc_report_from_json(const char* report_json, tc_report** out) {
  return guarded([&] {
    require(out, "output");
    *out = new tc_report{io::report_from_json(parse(report_json, "report"))};
  });
}

tc_status tc_report_render(const tc_report* report, const char* format, char** out) {
  return guarded([&] {
    require(report, "report");
    require(format, "format");
    require(out, "output");
    *out = dup(render_report(report->report, parse_report_format(format)));
  });
}

double tc_report_gca(const tc_report* report) { return report ? report->report.aggregates.gca : 0.0; }

double tc_report_vca(const tc_report* report) { return report ? report->report.aggregates.vca : 0.0; }

void tc_report_free(tc_report* report) { delete report; }

tc_status tc_convert_multiwoz(const char* data_json, const char* db_json, char** ontology_json,
                              char** global_kb_json, char** dialogues_json, char** warnings_json) {
  return guarded([&] {
    require(ontology_json, "output");
    require(global_kb_json, "output");
    require(dialogues_json, "output");
    const MultiwozConversion c = convert_multiwoz(parse(data_json, "dialogue data"), parse(db_json, "restaurant db"));
    json dialogues = json::array();
    for (const Dialogue& d : c.dialogues) dialogues.push_back(io::to_json(d));
    *ontology_json = dup(dump(io::to_json(c.ontology)));
    *global_kb_json = dup(dump(io::to_json(c.global_kb)));
    *dialogues_json = dup(dump(dialogues));
    if (warnings_json) *warnings_json = dup(strings(c.warnings).dump());
  });
}

}  // extern "C"
