#include "todcsp/evaluation.hpp"

#include <algorithm>

#include "todcsp/errors.hpp"
#include "todcsp/parallel.hpp"

namespace todcsp {

DialogueResult evaluate_dialogue(const CSPModel& model, const Assignment& assignment, std::uint64_t cap) {
  DialogueResult r;
  r.dialogue_id = model.dialogue_id;
  for (const Variable& v : model.variables) r.variable_ids.push_back(v.id);
  r.variable_total = model.variables.size();

  const SolveResult solve = enumerate_solutions(model, cap, false);
  r.solution_count = solve.count;
  r.exact = solve.exact;
  r.bucket = count_bucket(solve.count, solve.exact);
  r.verdict = check_consistency(model, assignment, solve);

  if (solve.count == 0) {
    for (std::size_t v = 0; v < model.variables.size(); ++v) {
      const Variable& var = model.variables[v];
      const auto& value = assignment.values[v];
      if (var.kind == VarKind::count || !value || !model.index.kb_has_value(var.slot, value_to_string(*value)))
        ++r.correct_variables;
    }
    return r;
  }
  if (auto match = best_match(model, assignment)) {
    r.correct_variables = match->agreement;
    r.matched_solution = std::move(match->solution);
  }
  return r;
}

double aggregate_gca(std::span<const DialogueResult> results) {
  if (results.empty()) throw ValidationError("GCA of an empty result set");
  const auto consistent = std::count_if(results.begin(), results.end(),
                                        [](const DialogueResult& r) { return r.verdict.consistent; });
  return static_cast<double>(consistent) / static_cast<double>(results.size());
}

double aggregate_vca(std::span<const DialogueResult> results) {
  std::size_t correct = 0, total = 0;
  for (const DialogueResult& r : results) {
    correct += r.correct_variables;
    total += r.variable_total;
  }
  if (total == 0) throw ValidationError("VCA over zero variables");
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<BucketRow> stratify_by_bucket(std::span<const DialogueResult> results) {
  std::vector<BucketRow> rows;
  for (std::size_t b = 0; b < kBucketCount; ++b) {
    BucketRow row;
    row.bucket = static_cast<Bucket>(b);
    std::vector<DialogueResult> members;
    for (const DialogueResult& r : results)
      if (r.bucket == row.bucket) members.push_back(r);
    row.dialogues = members.size();
    for (const DialogueResult& r : members) row.variables += r.variable_total;
    if (!members.empty()) row.gca = aggregate_gca(members);
    if (row.variables > 0) row.vca = aggregate_vca(members);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<DialogueResult> evaluate_corpus(const Corpus& corpus, const AblationConfig& ablation,
                                            std::uint64_t cap, std::size_t concurrency) {
  std::vector<DialogueResult> results(corpus.entries.size());
  parallel_for(corpus.entries.size(), concurrency, [&](std::size_t i) {
    const CorpusEntry& e = corpus.entries[i];
    const CSPModel model = make_model(e.delex, corpus.ontology, e.kb, corpus.lexicon, ablation);
    results[i] = evaluate_dialogue(model, e.assignment, cap);
  });
  std::stable_sort(results.begin(), results.end(),
                   [](const DialogueResult& a, const DialogueResult& b) { return a.dialogue_id < b.dialogue_id; });
  return results;
}

std::vector<AblationRow> run_ablation(const Corpus& corpus, const std::vector<AblationConfig>& configs,
                                      std::uint64_t cap, std::size_t concurrency) {
  std::vector<AblationRow> rows;
  for (const AblationConfig& config : configs) {
    const auto results = evaluate_corpus(corpus, config, cap, concurrency);
    rows.push_back({config.label(), config.spec(), aggregate_gca(results), aggregate_vca(results)});
  }
  return rows;
}

Report build_report(const Corpus& corpus, const EvalOptions& options) {
  Report report;
  report.metadata = {TODCSP_VERSION, options.seed, options.cap, options.ablation.spec(), options.strategy,
                     config_hash(options)};
  report.dialogues = evaluate_corpus(corpus, options.ablation, options.cap, options.concurrency);
  report.aggregates.dialogues = report.dialogues.size();
  for (const DialogueResult& r : report.dialogues) report.aggregates.variables += r.variable_total;
  report.aggregates.gca = aggregate_gca(report.dialogues);
  report.aggregates.vca = aggregate_vca(report.dialogues);
  report.buckets = stratify_by_bucket(report.dialogues);

  std::vector<ConstraintSet> sets(corpus.entries.size());
  parallel_for(corpus.entries.size(), options.concurrency, [&](std::size_t i) {
    const CorpusEntry& e = corpus.entries[i];
    KnowledgeBase kb = e.kb;
    validate_kb(kb, corpus.ontology);
    sets[i] = extract_constraints(e.delex, corpus.ontology, kb, corpus.lexicon, options.ablation);
  });
  std::vector<const ConstraintSet*> pointers;
  for (const ConstraintSet& s : sets) pointers.push_back(&s);
  report.coverage = coverage_stats(pointers);

  if (options.with_ablations)
    report.ablations = run_ablation(corpus, standard_ablations(), options.cap, options.concurrency);
  return report;
}

}  // namespace todcsp
