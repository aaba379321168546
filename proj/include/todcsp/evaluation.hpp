#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "todcsp/constraints.hpp"
#include "todcsp/dialogue.hpp"
#include "todcsp/domain.hpp"
#include "todcsp/solver.hpp"

namespace todcsp {

struct DialogueResult {
  std::string dialogue_id;
  std::vector<std::string> variable_ids;
  ConsistencyVerdict verdict;
  Bucket bucket = Bucket::zero;
  std::uint64_t solution_count = 0;
  bool exact = true;
  std::size_t variable_total = 0;
  std::size_t correct_variables = 0;
  std::optional<Solution> matched_solution;
};

DialogueResult evaluate_dialogue(const CSPModel& model, const Assignment& assignment,
                                 std::uint64_t cap = kDefaultCap);

// Throw ValidationError on empty input.
double aggregate_gca(std::span<const DialogueResult> results);
double aggregate_vca(std::span<const DialogueResult> results);

struct BucketRow {
  Bucket bucket = Bucket::zero;
  std::size_t dialogues = 0;
  std::size_t variables = 0;
  std::optional<double> gca;  // nullopt for an empty bucket
  std::optional<double> vca;
};

std::vector<BucketRow> stratify_by_bucket(std::span<const DialogueResult> results);

struct CorpusEntry {
  DelexDialogue delex;
  KnowledgeBase kb;
  Assignment assignment;
};

struct Corpus {
  Ontology ontology;
  CueLexicon lexicon = CueLexicon::defaults();
  std::vector<CorpusEntry> entries;
};

// Results ordered by dialogue id.
std::vector<DialogueResult> evaluate_corpus(const Corpus& corpus, const AblationConfig& ablation,
                                            std::uint64_t cap, std::size_t concurrency = 1);

struct AblationRow {
  std::string label;
  std::string removed;  // AblationConfig::spec()
  double gca = 0.0;
  double vca = 0.0;
};

std::vector<AblationRow> run_ablation(const Corpus& corpus, const std::vector<AblationConfig>& configs,
                                      std::uint64_t cap, std::size_t concurrency = 1);

struct RunMetadata {
  std::string version;
  std::uint64_t seed = 0;
  std::uint64_t cap = kDefaultCap;
  std::string ablation;
  std::string strategy;
  std::string config_hash;
};

struct Aggregates {
  std::size_t dialogues = 0;
  std::size_t variables = 0;
  double gca = 0.0;
  double vca = 0.0;
};

struct Report {
  RunMetadata metadata;
  Aggregates aggregates;
  std::vector<BucketRow> buckets;
  std::vector<CoverageRow> coverage;
  std::vector<AblationRow> ablations;
  std::vector<DialogueResult> dialogues;
};

struct EvalOptions {
  std::uint64_t cap = kDefaultCap;
  std::size_t concurrency = 1;
  std::uint64_t seed = 0;
  AblationConfig ablation;
  bool with_ablations = false;
  std::string strategy;
};

// Hash of the options that influence a report, hex encoded.
std::string config_hash(const EvalOptions& options);

Report build_report(const Corpus& corpus, const EvalOptions& options);

enum class ReportFormat { json, csv, markdown };
ReportFormat parse_report_format(std::string_view s);  // throws UsageError

std::string render_report(const Report& report, ReportFormat format);

// Shortest text that parses back to the same double.
std::string format_metric(double v);

}  // namespace todcsp
