#include <doctest.h>

#include <charconv>
#include <regex>

#include "support/fixtures.hpp"
#include "todcsp/errors.hpp"
#include "todcsp/evaluation.hpp"
#include "todcsp/relex.hpp"

using namespace todcsp;

namespace {

DialogueResult result(std::string id, bool consistent, Bucket b, std::size_t total, std::size_t correct) {
  DialogueResult r;
  r.dialogue_id = std::move(id);
  r.verdict.consistent = consistent;
  r.bucket = b;
  r.variable_total = total;
  r.correct_variables = correct;
  return r;
}

}  // namespace

TEST_SUITE("evaluation") {
  TEST_CASE("ledger metrics") {
    const auto results = evaluate_corpus(fixture::ledger_corpus(), {}, kDefaultCap);
    REQUIRE(results.size() == 3);
    CHECK(results[0].dialogue_id == "no-offer");
    CHECK(results[0].verdict.consistent);
    CHECK(results[0].correct_variables == 7);
    CHECK(results[0].bucket == Bucket::over_hundred);
    CHECK(results[1].dialogue_id == "polynesian");
    CHECK(results[1].correct_variables == 2);
    CHECK(results[1].bucket == Bucket::eleven_to_hundred);
    CHECK(results[2].dialogue_id == "spanish-choice");
    CHECK(results[2].correct_variables == 7);
    CHECK(results[2].bucket == Bucket::two_to_ten);
    CHECK(std::abs(aggregate_gca(results) - 1.0 / 3.0) < 1e-9);
    CHECK(std::abs(aggregate_vca(results) - 16.0 / 21.0) < 1e-9);
  }

  TEST_CASE("gold assignments are consistent and fully credited") {
    for (const char* id : {"spanish-choice", "no-offer", "polynesian"}) {
      const CSPModel m = fixture::ledger_model(id);
      const DialogueResult r = evaluate_dialogue(m, gold_assignment(fixture::ledger_delex(id)));
      CHECK(r.verdict.consistent);
      CHECK(r.correct_variables == r.variable_total);
    }
  }

  TEST_CASE("zero-solution dialogues credit abstentions and off-kb values") {
    KnowledgeBase kb = fixture::ledger_kb("no-offer");
    for (const char* food : {"british", "chinese", "european", "lebanese", "polynesian", "spanish"})
      kb.instances.push_back({std::string("x-") + food, {{"food", food}}});
    const DelexDialogue d = fixture::ledger_delex("no-offer");
    const CSPModel m = make_model(d, fixture::ontology(), kb, CueLexicon::defaults());
    Assignment a = gold_assignment(d);
    a.values[0].reset();
    a.values[1] = std::string("north");  // not held by any instance
    const DialogueResult r = evaluate_dialogue(m, a);
    CHECK(r.bucket == Bucket::zero);
    CHECK_FALSE(r.matched_solution);
    CHECK(r.correct_variables == 3);  // V1, V2 and the count
    CHECK_FALSE(r.verdict.consistent);
  }

  TEST_CASE("aggregate arithmetic") {
    const std::vector<DialogueResult> four = {result("a", true, Bucket::one, 5, 3),
                                              result("b", false, Bucket::one, 5, 2),
                                              result("c", false, Bucket::one, 1, 0),
                                              result("d", false, Bucket::one, 1, 0)};
    CHECK(aggregate_gca(four) == 0.25);
    const std::vector<DialogueResult> two = {four[0], four[1]};
    CHECK(aggregate_vca(two) == 0.5);
    CHECK_THROWS_AS(aggregate_gca({}), ValidationError);
    CHECK_THROWS_AS(aggregate_vca({}), ValidationError);
  }

  TEST_CASE("bucket rows recombine to the corpus figures") {
    const auto results = evaluate_corpus(fixture::ledger_corpus(), {}, kDefaultCap);
    const auto rows = stratify_by_bucket(results);
    REQUIRE(rows.size() == kBucketCount);
    double gca = 0, vca = 0;
    std::size_t n = 0, m = 0;
    for (const BucketRow& r : rows) {
      if (r.dialogues == 0) {
        CHECK_FALSE(r.gca);
        continue;
      }
      gca += *r.gca * static_cast<double>(r.dialogues);
      vca += *r.vca * static_cast<double>(r.variables);
      n += r.dialogues;
      m += r.variables;
    }
    CHECK(std::abs(gca / static_cast<double>(n) - aggregate_gca(results)) < 1e-12);
    CHECK(std::abs(vca / static_cast<double>(m) - aggregate_vca(results)) < 1e-12);
  }

  TEST_CASE("ablated verdicts stay consistent where the full verdict is") {
    Corpus corpus = fixture::ledger_corpus();
    for (CorpusEntry& e : corpus.entries) e.assignment = relex_most_frequent(e.delex, e.kb);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      CorpusEntry extra = corpus.entries[seed % 3];
      extra.delex.dialogue_id += "-r" + std::to_string(seed);
      extra.assignment = relex_random(extra.delex, extra.kb, seed, true);
      corpus.entries.push_back(extra);
    }
    for (const CorpusEntry& e : fixture::ledger_corpus().entries) {
      CorpusEntry gold = e;
      gold.delex.dialogue_id += "-gold";
      gold.assignment = gold_assignment(gold.delex);
      corpus.entries.push_back(gold);
    }
    const auto full = evaluate_corpus(corpus, {}, kDefaultCap);
    for (const AblationConfig& cfg : standard_ablations()) {
      const auto ablated = evaluate_corpus(corpus, cfg, kDefaultCap);
      for (std::size_t i = 0; i < full.size(); ++i)
        if (full[i].verdict.consistent && full[i].solution_count > 0) CHECK(ablated[i].verdict.consistent);
      CHECK(aggregate_gca(ablated) >= aggregate_gca(full));
    }
  }

  TEST_CASE("reports are deterministic and independent of concurrency") {
    EvalOptions one;
    one.with_ablations = true;
    EvalOptions many = one;
    many.concurrency = 4;
    const Corpus corpus = fixture::ledger_corpus();
    const std::string a = render_report(build_report(corpus, one), ReportFormat::json);
    CHECK(a == render_report(build_report(corpus, one), ReportFormat::json));
    CHECK(a == render_report(build_report(corpus, many), ReportFormat::json));
  }

  TEST_CASE("report renderings") {
    EvalOptions o;
    o.with_ablations = true;
    o.seed = 42;
    const Report r = build_report(fixture::ledger_corpus(), o);
    CHECK(r.metadata.seed == 42);
    CHECK(r.ablations.size() == 8);
    CHECK(r.ablations.back().label == "all except domain");

    const Report back = io::report_from_json(io::json::parse(render_report(r, ReportFormat::json)));
    CHECK(render_report(back, ReportFormat::json) == render_report(r, ReportFormat::json));

    const std::string md = render_report(r, ReportFormat::markdown);
    CHECK(md.find("| Constraint | #Variables | %Coverage |") != std::string::npos);
    CHECK(md.find("| 0 sol. | 0 | 0 | — | — |") != std::string::npos);
    std::smatch m;
    REQUIRE(std::regex_search(md, m, std::regex(R"(\| 3 \| 21 \| ([0-9.e-]+) \| ([0-9.e-]+) \|)")));
    double gca = 0, vca = 0;
    const std::string gs = m[1], vs = m[2];
    std::from_chars(gs.data(), gs.data() + gs.size(), gca);
    std::from_chars(vs.data(), vs.data() + vs.size(), vca);
    CHECK(gca == r.aggregates.gca);
    CHECK(vca == r.aggregates.vca);

    const std::string csv = render_report(r, ReportFormat::csv);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("spanish-choice,false,two_to_ten,6,true,10,7,C2@V10;C6@V2") != std::string::npos);
    CHECK_THROWS_AS(parse_report_format("xml"), UsageError);
  }

  TEST_CASE("config hash tracks the options that matter") {
    EvalOptions a, b;
    b.concurrency = 8;
    CHECK(config_hash(a) == config_hash(b));
    b.cap = 10;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a).size() == 16);
  }

  TEST_CASE("metric text round-trips") {
    for (double v : {0.0, 1.0, 1.0 / 3.0, 16.0 / 21.0, 0.1, 1e-17}) {
      const std::string s = format_metric(v);
      double back = -1;
      std::from_chars(s.data(), s.data() + s.size(), back);
      CHECK(back == v);
    }
    CHECK(format_metric(0.25) == "0.25");
  }
}
