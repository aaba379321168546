#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "todcsp/dialogue.hpp"
#include "todcsp/domain.hpp"

namespace todcsp {

// Value variables draw uniformly from every value present in the kb (any
// slot) unless type_restricted, in which case only values of the variable's
// slot are used. Counts draw from {0..|kb|}. Empty kb leaves everything unfilled.
Assignment relex_random(const DelexDialogue& delex, const KnowledgeBase& kb, std::uint64_t seed,
                        bool type_restricted = false);

// Most frequent kb value of each variable's slot (ties: lexicographically
// smallest); count variables get |kb|.
Assignment relex_most_frequent(const DelexDialogue& delex, const KnowledgeBase& kb);

struct PromptBundle {
  std::string prompt;
  std::vector<std::string> manifest;  // variable ids in placeholder order
};

PromptBundle build_prompt(const DelexDialogue& delex, const KnowledgeBase& kb);

struct ParsedResponse {
  Assignment assignment;
  std::vector<std::string> warnings;
};

// Never throws on malformed text; unalignable variables stay unfilled.
ParsedResponse parse_llm_response(std::string_view response, const DelexDialogue& delex);

struct LLMConfig {
  std::string api_base;  // e.g. https://api.example.com/v1
  std::string api_key;
  std::string model_name = "gpt-3.5-turbo";
  double temperature = 0.9;
  std::chrono::milliseconds timeout{60000};
  int retries = 2;

  // api_base / api_key from LLM_API_BASE / LLM_API_KEY.
  static LLMConfig from_environment();
  void validate() const;
};

// One chat-completion round trip. Throws TransportError once retries are exhausted.
std::string chat_completion(const LLMConfig& config, const std::string& prompt);

struct LLMOutcome {
  Assignment assignment;
  std::string raw_response;
  std::vector<std::string> warnings;
};

LLMOutcome llm_relexicalize(const DelexDialogue& delex, const KnowledgeBase& kb,
                            const LLMConfig& config);

}  // namespace todcsp
