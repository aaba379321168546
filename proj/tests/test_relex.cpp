#include <doctest.h>

#include <set>

#include "support/fixtures.hpp"
#include "todcsp/errors.hpp"
#include "todcsp/random.hpp"
#include "todcsp/relex.hpp"

using namespace todcsp;

namespace {

std::set<std::string> kb_values(const KnowledgeBase& kb) {
  std::set<std::string> out;
  for (const Instance& i : kb.instances)
    for (const auto& [slot, value] : i.attributes) out.insert(value);
  return out;
}

std::string text(const std::optional<Value>& v) { return v ? value_to_string(*v) : "<unfilled>"; }

}  // namespace

TEST_SUITE("relex") {
  TEST_CASE("random baseline is seeded, total and drawn from the kb") {
    const DelexDialogue d = fixture::ledger_delex("spanish-choice");
    const KnowledgeBase kb = fixture::ledger_kb("spanish-choice");
    const auto pool = kb_values(kb);
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const Assignment a = relex_random(d, kb, seed);
      CHECK(a.values == relex_random(d, kb, seed).values);
      CHECK(a.total());
      for (std::size_t v = 0; v < d.variables.size(); ++v) {
        if (d.variables[v].kind == VarKind::count) {
          const auto n = std::get<std::int64_t>(*a.values[v]);
          CHECK(n >= 0);
          CHECK(n <= static_cast<std::int64_t>(kb.size()));
        } else {
          CHECK(pool.contains(std::get<std::string>(*a.values[v])));
        }
      }
    }
  }

  TEST_CASE("type-agnostic draws cross slots, restricted ones do not") {
    const DelexDialogue d = fixture::ledger_delex("spanish-choice");
    const KnowledgeBase kb = fixture::ledger_kb("spanish-choice");
    const KBIndex idx = KBIndex::build(kb);
    bool crossed = false;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      const Assignment loose = relex_random(d, kb, seed);
      const Assignment strict = relex_random(d, kb, seed, true);
      for (std::size_t v = 0; v < d.variables.size(); ++v) {
        if (d.variables[v].kind == VarKind::count) continue;
        const auto& slot = d.variables[v].slot;
        crossed = crossed || !idx.kb_has_value(slot, value_to_string(*loose.values[v]));
        CHECK(idx.kb_has_value(slot, value_to_string(*strict.values[v])));
      }
    }
    CHECK(crossed);
  }

  TEST_CASE("random baseline golden for seed 42") {
    const io::json golden = fixture::load("golden/random_seed42.json");
    for (const auto& j : fixture::load("dialogues.json")) {
      const DelexDialogue d = delexicalize(io::dialogue_from_json(j));
      const Assignment a = relex_random(d, fixture::ledger_kb(d.dialogue_id), 42);
      CHECK(io::to_json(a, d) == golden[d.dialogue_id]);
    }
  }

  TEST_CASE("most-frequent baseline on the worked example") {
    const DelexDialogue d = fixture::ledger_delex("spanish-choice");
    const Assignment a = relex_most_frequent(d, fixture::ledger_kb("spanish-choice"));
    CHECK(text(a.values[0]) == "spanish");
    CHECK(text(a.values[1]) == "3");
    CHECK(text(a.values[3]) == "cheap");
    CHECK(text(a.values[7]) == "beirut");  // three-way tie
    CHECK(a.total());
  }

  TEST_CASE("baselines leave everything unfilled on an empty kb") {
    const DelexDialogue d = fixture::ledger_delex("spanish-choice");
    CHECK(relex_random(d, {}, 1).filled() == 0);
    CHECK(relex_most_frequent(d, {}).filled() == 0);
  }

  TEST_CASE("polynesian prompt is reproduced byte for byte") {
    const DelexDialogue d = fixture::delex("prompt_case/dialogue.json");
    const KnowledgeBase kb = io::kb_from_json(fixture::load("prompt_case/kb.json"));
    const PromptBundle p = build_prompt(d, kb);
    CHECK(p.prompt == io::read_file(fixture::path("prompt_case/prompt.txt")));
    CHECK(p.manifest == std::vector<std::string>{"V1", "V2", "V3", "V4"});
    CHECK(p.prompt.find("Turns should start with either User or System") != std::string::npos);
    CHECK(p.prompt.find("Restaurant #1 - Area: centre, Food: british, Price: moderate\n") != std::string::npos);
  }

  TEST_CASE("empty kb renders no kb lines") {
    const PromptBundle p = build_prompt(fixture::ledger_delex("polynesian"), {});
    CHECK(p.prompt.find("### Knowledge Base: \n\n### Dialogue: \n") != std::string::npos);
  }

  TEST_CASE("canned polynesian response parses to the printed values") {
    const DelexDialogue d = fixture::delex("prompt_case/dialogue.json");
    const ParsedResponse r = parse_llm_response(io::read_file(fixture::path("prompt_case/response.txt")), d);
    CHECK(r.warnings.empty());
    CHECK(io::to_json(r.assignment, d) ==
          io::json({{"V1", "european"}, {"V2", "european"}, {"V3", "british"}, {"V4", "british"}}));
  }

  TEST_CASE("commentary lines are ignored and a missing turn is reported") {
    const DelexDialogue d = fixture::delex("prompt_case/dialogue.json");
    const std::string response =
        "Sure! Here is the dialogue:\n"
        "User: I 'm looking for a restaurant serving Thai food in any area .\n"
        "System: There are no thai restaurants in the area .\n"
        "Note: values come from the kb.\n";
    const ParsedResponse r = parse_llm_response(response, d);
    CHECK(text(r.assignment.values[0]) == "thai");
    CHECK(text(r.assignment.values[1]) == "thai");
    CHECK_FALSE(r.assignment.values[2]);
    CHECK_FALSE(r.assignment.values[3]);
    CHECK(r.warnings.size() >= 3);
  }

  TEST_CASE("drifting wording still aligns on anchors") {
    const DelexDialogue d = fixture::ledger_delex("spanish-choice");
    const std::string response =
        "User: I am looking for a restaurant serving Spanish food.\n"
        "System: There are 2 restaurants serving Spanish food, one is cheap and the other is moderately priced. "
        "Which price range would you prefer?\n"
        "User: I am looking for a cheap restaurant in any area that serves Spanish food.\n"
        "System: La Tasca is cheap and serves Spanish food. Would you like the location information?\n";
    const ParsedResponse r = parse_llm_response(response, d);
    CHECK(text(r.assignment.values[1]) == "2");
    CHECK(text(r.assignment.values[4]) == "moderately priced");
    CHECK(text(r.assignment.values[7]) == "la tasca");
  }

  TEST_CASE("garbage degrades to unfilled without throwing") {
    const DelexDialogue d = fixture::ledger_delex("spanish-choice");
    const ParsedResponse r = parse_llm_response("I cannot help with that.", d);
    CHECK(r.assignment.filled() == 0);
    CHECK(r.assignment.size() == d.variables.size());
    CHECK_FALSE(r.warnings.empty());

    Rng rng(3);
    const std::string alphabet = "UserSystm: [MASK]\n.,?<V1>abc";
    for (int i = 0; i < 300; ++i) {
      std::string junk;
      const auto len = rng.below(200);
      for (std::uint64_t k = 0; k < len; ++k) junk += alphabet[rng.below(alphabet.size())];
      CHECK_NOTHROW(parse_llm_response(junk, d));
    }
  }

  TEST_CASE("a turn left as [MASK] or with an unreadable count stays unfilled") {
    const DelexDialogue d = fixture::ledger_delex("spanish-choice");
    const std::string response =
        "User: I am looking for a restaurant serving [MASK] food.\n"
        "System: There are lots of restaurants serving Spanish food, one is cheap and the other is moderate price "
        "range. Which price range would you prefer?\n";
    const ParsedResponse r = parse_llm_response(response, d);
    CHECK_FALSE(r.assignment.values[0]);
    CHECK_FALSE(r.assignment.values[1]);
    CHECK(text(r.assignment.values[2]) == "spanish");
  }

  TEST_CASE("LLM configuration checks") {
    LLMConfig c;
    CHECK_THROWS_AS(c.validate(), UsageError);
    c.api_base = "http://localhost:1";
    c.api_key = "k";
    c.validate();
    c.temperature = 2.5;
    CHECK_THROWS_AS(c.validate(), UsageError);
    CHECK(LLMConfig{}.temperature == 0.9);
  }
}
