#include <doctest.h>

#include <algorithm>

#include "support/fixtures.hpp"
#include "support/oracle.hpp"
#include "todcsp/errors.hpp"
#include "todcsp/solver.hpp"

using namespace todcsp;

namespace {

std::vector<std::string> violation_tags(const ConsistencyVerdict& v, const CSPModel& m) {
  std::vector<std::string> out;
  for (const Violation& viol : v.violations) {
    std::string s = viol.rule + "@";
    for (std::size_t i = 0; i < viol.variables.size(); ++i) s += (i ? "+" : "") + m.variables[viol.variables[i]].id;
    out.push_back(s);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// One free value variable with `n` admissible values.
CSPModel free_model(std::size_t n) {
  CSPModel m;
  m.dialogue_id = "free";
  Variable v;
  v.id = "V1";
  v.slot = "food";
  v.gold = std::string("f0");
  m.variables.push_back(v);
  std::vector<Value> dom;
  for (std::size_t i = 0; i < n; ++i) dom.emplace_back("f" + std::to_string(1000 + i));
  m.constraints.domains.push_back(dom);
  m.index = KBIndex::build(m.kb);
  m.validate();
  return m;
}

}  // namespace

TEST_SUITE("solver") {
  TEST_CASE("worked example model has six solutions, all found by the oracle too") {
    const CSPModel m = fixture::ledger_model("spanish-choice");
    const SolveResult r = enumerate_solutions(m);
    CHECK(r.count == 6);
    CHECK(r.exact);
    CHECK(r.bucket == Bucket::two_to_ten);
    CHECK(r.solutions == oracle::solutions(m));
  }

  TEST_CASE("ledger solution counts") {
    CHECK(enumerate_solutions(fixture::ledger_model("no-offer"), kDefaultCap, false).count == 1050);
    CHECK(enumerate_solutions(fixture::ledger_model("polynesian"), kDefaultCap, false).count == 35);
  }

  TEST_CASE("worked example assignment violates exactly C6 at the count and C2 at the Lebanese value") {
    const CSPModel m = fixture::ledger_model("spanish-choice");
    const DelexDialogue d = fixture::ledger_delex("spanish-choice");
    const Assignment shown = fixture::ledger_assignment("spanish-choice", d);
    const ConsistencyVerdict v = check_consistency(m, shown, enumerate_solutions(m));
    CHECK_FALSE(v.consistent);
    CHECK(violation_tags(v, m) == std::vector<std::string>{"C2@V10", "C6@V2"});

    const auto match = best_match(m, shown);
    REQUIRE(match);
    CHECK(match->agreement == 7);
    CHECK(std::get<std::int64_t>(match->solution[1]) == 2);
    CHECK(std::get<std::string>(match->solution[7]) == "taberna");
    CHECK(std::get<std::string>(match->solution[9]) == "spanish");

    const Assignment corrected = io::assignment_from_json(fixture::load("spanish_choice/corrected.json"), d);
    CHECK(check_consistency(m, corrected, enumerate_solutions(m)).consistent);
    CHECK(best_match(m, corrected)->agreement == 10);
  }

  TEST_CASE("canned polynesian response: C4 at the no-offer variable, best match keeps british") {
    const CSPModel m = fixture::ledger_model("polynesian");
    const Assignment a = fixture::ledger_assignment("polynesian", fixture::ledger_delex("polynesian"));
    const ConsistencyVerdict v = check_consistency(m, a, enumerate_solutions(m, kDefaultCap, false));
    CHECK(violation_tags(v, m) == std::vector<std::string>{"C4@V2"});
    const auto match = best_match(m, a);
    REQUIRE(match);
    CHECK(match->agreement == 2);
    CHECK(std::get<std::string>(match->solution[0]) == "chinese");
    CHECK(std::get<std::string>(match->solution[2]) == "british");
  }

  TEST_CASE("unfilled variables fail their constraints") {
    const CSPModel m = fixture::ledger_model("polynesian");
    Assignment a;
    a.values.resize(4);
    const ConsistencyVerdict v = check_consistency(m, a, enumerate_solutions(m, kDefaultCap, false));
    CHECK_FALSE(v.consistent);
    for (const Violation& viol : v.violations) CHECK_FALSE(viol.variables.empty());
    CHECK_THROWS_AS(satisfies(m, a, m.constraints.constraints[0]), ValidationError);
  }

  TEST_CASE("zero-solution rule") {
    const Ontology o = fixture::ontology();
    KnowledgeBase kb = fixture::ledger_kb("no-offer");
    for (const char* food : {"british", "chinese", "european", "lebanese", "polynesian", "spanish"})
      kb.instances.push_back({std::string("x-") + food, {{"food", food}}});
    const DelexDialogue d = fixture::ledger_delex("no-offer");
    const CSPModel m = make_model(d, o, kb, CueLexicon::defaults());
    const SolveResult r = enumerate_solutions(m);
    REQUIRE(r.count == 0);
    CHECK(r.bucket == Bucket::zero);
    CHECK_FALSE(best_match(m, gold_assignment(d)));

    const ConsistencyVerdict gold = check_consistency(m, gold_assignment(d), r);
    CHECK(gold.zero_solution_rule_applied);
    CHECK(violation_tags(gold, m) == std::vector<std::string>{"zero-solution@V1+V2+V4+V5+V6+V7"});

    Assignment abstain;
    abstain.values.resize(d.variables.size());
    abstain.values[2] = std::int64_t{5};  // counts are accepted
    abstain.values[0] = std::string("thai");  // not in the kb
    CHECK(check_consistency(m, abstain, r).consistent);
  }

  TEST_CASE("cap semantics") {
    const CSPModel m = fixture::ledger_model("spanish-choice");
    const SolveResult capped = enumerate_solutions(m, 4);
    CHECK(capped.count == 4);
    CHECK_FALSE(capped.exact);
    CHECK(capped.solutions.size() == 4);
    CHECK_THROWS_AS(count_bucket(capped.count, capped.exact), CapError);
    const SolveResult exact_cap = enumerate_solutions(m, 6);
    CHECK(exact_cap.exact);
    CHECK(exact_cap.count == 6);
    const SolveResult big = enumerate_solutions(fixture::ledger_model("no-offer"), 101, false);
    CHECK_FALSE(big.exact);
    CHECK(count_bucket(big.count, big.exact) == Bucket::over_hundred);
    CHECK_THROWS_AS(enumerate_solutions(m, 0), UsageError);
  }

  TEST_CASE("bucket boundaries") {
    const std::vector<std::pair<std::size_t, Bucket>> cases = {
        {1, Bucket::one},    {2, Bucket::two_to_ten},         {10, Bucket::two_to_ten},
        {11, Bucket::eleven_to_hundred}, {100, Bucket::eleven_to_hundred}, {101, Bucket::over_hundred}};
    for (const auto& [n, bucket] : cases) {
      const SolveResult r = enumerate_solutions(free_model(n));
      CHECK(r.count == n);
      CHECK(r.bucket == bucket);
    }
    CHECK(count_bucket(0, true) == Bucket::zero);
    CHECK(bucket_label(Bucket::eleven_to_hundred) == "11-100 sol.");
    CHECK(parse_bucket("2-10 sol.") == Bucket::two_to_ten);
  }

  TEST_CASE("enumeration is deterministic") {
    const CSPModel m = fixture::ledger_model("no-offer");
    CHECK(enumerate_solutions(m).solutions == enumerate_solutions(m).solutions);
  }

  TEST_CASE("random models match generate-and-test") {
    for (std::uint64_t seed = 1000; seed < 1150; ++seed) {
      CAPTURE(seed);
      const CSPModel m = oracle::random_model(seed);
      const auto expected = oracle::solutions(m);
      const SolveResult r = enumerate_solutions(m);
      CHECK(r.solutions == expected);
      Rng rng(seed * 7);
      Assignment a;
      for (const auto& dom : m.constraints.domains) {
        const auto roll = rng.below(4);
        if (roll == 0) a.values.emplace_back(std::nullopt);
        else if (roll == 1) a.values.emplace_back(Value(std::string("off-domain")));
        else a.values.emplace_back(dom[rng.below(dom.size())]);
      }
      const auto mine = best_match(m, a);
      const auto ref = oracle::best(expected, a);
      REQUIRE(mine.has_value() == ref.has_value());
      if (ref) {
        CHECK(mine->agreement == ref->agreement);
        CHECK(mine->solution == ref->solution);
      }
    }
  }

  TEST_CASE("removing constraints never loses solutions") {
    for (const char* id : {"spanish-choice", "no-offer", "polynesian"}) {
      const auto full = enumerate_solutions(fixture::ledger_model(id)).solutions;
      for (const AblationConfig& cfg : standard_ablations()) {
        if (cfg.removes(Family::C1)) continue;  // C1 changes the domains themselves
        const auto loose = enumerate_solutions(fixture::ledger_model(id, cfg)).solutions;
        for (const auto& s : full) CHECK(std::binary_search(loose.begin(), loose.end(), s));
      }
    }
  }

  TEST_CASE("model validation") {
    CSPModel m = fixture::ledger_model("spanish-choice");
    m.constraints.domains[0].clear();
    CHECK_THROWS_AS(m.validate(), ValidationError);
    CSPModel n = fixture::ledger_model("spanish-choice");
    n.constraints.domains[1].push_back(Value(std::string("two")));
    CHECK_THROWS_AS(n.validate(), ValidationError);
  }
}
