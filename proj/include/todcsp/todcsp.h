/* C interface to the todcsp library. All documents cross the boundary as
 * UTF-8 JSON text; strings returned through char** belong to the caller and
 * are released with tc_string_free. Functions return TC_OK or an error code,
 * with the message available from tc_last_error() on the same thread. */
#ifndef TODCSP_H
#define TODCSP_H

#include <stddef.h>
#include <stdint.h>

#if defined(TODCSP_BUILDING_LIBRARY)
#define TC_API __attribute__((visibility("default")))
#else
#define TC_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum tc_status {
  TC_OK = 0,
  TC_USAGE = 1,
  TC_VALIDATION = 2,
  TC_CAP = 3,
  TC_TRANSPORT = 4,
  TC_INTERNAL = 6
} tc_status;

typedef struct tc_model tc_model;
typedef struct tc_solve_result tc_solve_result;
typedef struct tc_corpus tc_corpus;
typedef struct tc_report tc_report;

TC_API const char* tc_version(void);
TC_API const char* tc_last_error(void);
TC_API void tc_string_free(char* s);

/* Annotated dialogue -> delexicalised dialogue. */
TC_API tc_status tc_delexicalize(const char* dialogue_json, char** delex_json);
/* {"dialogue_id", "turns": [{"speaker", "text"}]}; unfilled variables print as [MASK]. */
TC_API tc_status tc_relexicalize(const char* delex_json, const char* assignment_json, char** dialogue_json);
TC_API tc_status tc_gold_assignment(const char* delex_json, char** assignment_json);

/* lexicon_json and ablation may be NULL. */
TC_API tc_status tc_model_build(const char* delex_json, const char* ontology_json, const char* kb_json,
                                const char* lexicon_json, const char* ablation, tc_model** out);
TC_API tc_status tc_model_from_json(const char* model_json, tc_model** out);
TC_API tc_status tc_model_to_json(const tc_model* model, char** out);
TC_API void tc_model_free(tc_model* model);

TC_API tc_status tc_model_solve(const tc_model* model, uint64_t cap, int keep_solutions, tc_solve_result** out);
TC_API uint64_t tc_solve_result_count(const tc_solve_result* r);
TC_API int tc_solve_result_exact(const tc_solve_result* r);
/* Fails with TC_CAP when the count is a lower bound below 101. */
TC_API tc_status tc_solve_result_bucket(const tc_solve_result* r, const char** label);
TC_API size_t tc_solve_result_size(const tc_solve_result* r);
TC_API tc_status tc_solve_result_solution(const tc_solve_result* r, size_t index, char** solution_json);
TC_API tc_status tc_solve_result_to_json(const tc_solve_result* r, int include_solutions, char** out);
TC_API void tc_solve_result_free(tc_solve_result* r);

/* Verdict, bucket and best-match credit of one assignment. */
TC_API tc_status tc_model_evaluate(const tc_model* model, const char* assignment_json, uint64_t cap,
                                   char** result_json);

/* Pertinent instances of the gold dialogue plus seeded padding. */
TC_API tc_status tc_sample_kb(const char* delex_json, const char* global_kb_json, uint64_t seed, char** kb_json);

TC_API tc_status tc_relex_random(const char* delex_json, const char* kb_json, uint64_t seed, int type_restricted,
                                 char** assignment_json);
TC_API tc_status tc_relex_most_frequent(const char* delex_json, const char* kb_json, char** assignment_json);
TC_API tc_status tc_build_prompt(const char* delex_json, const char* kb_json, char** prompt, char** manifest_json);
TC_API tc_status tc_parse_response(const char* response, const char* delex_json, char** assignment_json,
                                   char** warnings_json);

typedef struct tc_llm_config {
  const char* api_base;
  const char* api_key;
  const char* model_name;
  double temperature;
  uint32_t timeout_ms;
  int32_t retries;
} tc_llm_config;

/* Defaults, with api_base/api_key taken from LLM_API_BASE/LLM_API_KEY. */
TC_API void tc_llm_config_default(tc_llm_config* config);
TC_API tc_status tc_llm_relexicalize(const char* delex_json, const char* kb_json, const tc_llm_config* config,
                                     char** assignment_json, char** raw_response, char** warnings_json);

TC_API tc_status tc_corpus_create(const char* ontology_json, const char* lexicon_json, tc_corpus** out);
/* assignment_json may be NULL (everything unfilled). */
TC_API tc_status tc_corpus_add(tc_corpus* corpus, const char* delex_json, const char* kb_json,
                               const char* assignment_json);
TC_API size_t tc_corpus_size(const tc_corpus* corpus);
TC_API void tc_corpus_free(tc_corpus* corpus);

typedef struct tc_eval_options {
  uint64_t cap;
  uint32_t concurrency;
  uint64_t seed;
  const char* ablation;  /* NULL or "" for the full constraint set */
  int with_ablations;
  const char* strategy;  /* label recorded in the report metadata */
} tc_eval_options;

TC_API void tc_eval_options_default(tc_eval_options* options);
TC_API tc_status tc_corpus_evaluate(const tc_corpus* corpus, const tc_eval_options* options, tc_report** out);
/* [{"constraint", "variables", "coverage"}] over the corpus models. */
TC_API tc_status tc_corpus_coverage(const tc_corpus* corpus, const char* ablation, char** coverage_json);

TC_API tc_status tc_report_from_json(const char* report_json, tc_report** out);
/* format: "json", "csv" or "markdown". */
TC_API tc_status tc_report_render(const tc_report* report, const char* format, char** out);
TC_API double tc_report_gca(const tc_report* report);
TC_API double tc_report_vca(const tc_report* report);
TC_API void tc_report_free(tc_report* report);

TC_API tc_status tc_convert_multiwoz(const char* data_json, const char* db_json, char** ontology_json,
                                     char** global_kb_json, char** dialogues_json, char** warnings_json);

#ifdef __cplusplus
}
#endif

#endif
