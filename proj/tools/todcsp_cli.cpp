// Command-line front end. Talks to the library only through todcsp.h.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "todcsp/parallel.hpp"
#include "todcsp/todcsp.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Carries an exit code up to main.
struct Exit {
  int code;
  std::string message;
};

int exit_code(tc_status s) { return s == TC_INTERNAL ? 5 : static_cast<int>(s); }

void check(tc_status s, const std::string& context) {
  if (s != TC_OK) throw Exit{exit_code(s), context + ": " + tc_last_error()};
}

// Owns a string returned by the library.
struct Owned {
  char* p = nullptr;
  Owned() = default;
  Owned(const Owned&) = delete;
  Owned& operator=(const Owned&) = delete;
  ~Owned() { tc_string_free(p); }
  char** out() { return &p; }
  std::string str() const { return p ? p : ""; }
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Exit{2, "cannot read " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Exit{2, path + ": invalid JSON (" + e.what() + ")"};
  }
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Exit{2, "cannot write " + path};
}

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

// A file holding one document or an array of them.
struct Items {
  std::vector<json> items;
  bool single = false;
};

Items read_items(const std::string& path) {
  json j = read_json(path);
  Items out;
  if (j.is_array()) {
    for (auto& item : j) out.items.push_back(std::move(item));
  } else {
    out.single = true;
    out.items.push_back(std::move(j));
  }
  return out;
}

json join_items(std::vector<json> items, bool single) {
  if (single && items.size() == 1) return std::move(items.front());
  return json(std::move(items));
}

std::string id_of(const json& item, const std::string& path) {
  if (!item.is_object() || !item.contains("dialogue_id") || !item["dialogue_id"].is_string())
    throw Exit{2, path + ": entry without a dialogue_id"};
  return item["dialogue_id"].get<std::string>();
}

// A kb file is either one kb shared by every dialogue or an object keyed by dialogue id.
class KbSource {
 public:
  explicit KbSource(std::string path) : path_(std::move(path)), doc_(read_json(path_)) {}

  std::string for_dialogue(const std::string& id) const {
    if (doc_.is_object() && doc_.contains("instances")) return doc_.dump();
    if (doc_.is_object() && doc_.contains(id)) return doc_[id].dump();
    throw Exit{2, path_ + ": no kb for dialogue '" + id + "'"};
  }

 private:
  std::string path_;
  json doc_;
};

// Assignments keyed by dialogue id; a lone dialogue may use a bare assignment.
class AssignmentSource {
 public:
  AssignmentSource(std::string path, std::size_t dialogues)
      : path_(std::move(path)), doc_(read_json(path_)), lone_(dialogues == 1) {
    if (!doc_.is_object()) throw Exit{2, path_ + ": expected an object keyed by dialogue id"};
  }

  std::string for_dialogue(const std::string& id) const {
    if (doc_.contains(id) && doc_[id].is_object()) return doc_[id].dump();
    if (lone_) return doc_.dump();
    throw Exit{2, path_ + ": no assignment for dialogue '" + id + "'"};
  }

 private:
  std::string path_;
  json doc_;
  bool lone_;
};

std::string solve_bucket(tc_solve_result* r, bool require_exact, const std::string& id) {
  const char* label = nullptr;
  const tc_status s = tc_solve_result_bucket(r, &label);
  if (s == TC_CAP) {
    if (require_exact) throw Exit{3, id + ": " + tc_last_error()};
    warn(id + ": " + tc_last_error());
    return {};
  }
  check(s, id);
  return label;
}

const std::vector<std::string> kStrategies = {"random", "most-frequent", "llm", "file"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consistency checking of task-oriented dialogues as constraint satisfaction"};
  app.set_version_flag("--version", std::string(tc_version()));
  app.require_subcommand(1);

  std::string output;
  auto add_output = [&](CLI::App* cmd) { cmd->add_option("-o,--output", output, "Output file (default stdout)"); };

  // delex
  std::string dialogues_path;
  auto* delex = app.add_subcommand("delex", "Replace annotated spans with variables");
  delex->add_option("-i,--input", dialogues_path, "Annotated dialogue(s)")->required();
  add_output(delex);

  // extract
  std::string delex_path, ontology_path, kb_path, lexicon_path, ablate;
  auto* extract = app.add_subcommand("extract", "Build the constraint model of each dialogue");
  extract->add_option("--delex", delex_path, "Delexicalised dialogue(s)")->required();
  extract->add_option("--ontology", ontology_path, "Ontology file")->required();
  extract->add_option("--kb", kb_path, "Knowledge base (shared or keyed by dialogue id)")->required();
  extract->add_option("--lexicon", lexicon_path, "Cue lexicon");
  extract->add_option("--ablate", ablate, "Constraint families to drop: C1..C6, dialogic, domain");
  add_output(extract);

  // solve
  std::string model_path, solutions_path;
  std::uint64_t cap = 100000;
  bool require_exact = false;
  auto* solve = app.add_subcommand("solve", "Enumerate the solutions of model(s)");
  solve->add_option("--model", model_path, "Model file")->required();
  solve->add_option("--cap", cap, "Stop after this many solutions")->check(CLI::PositiveNumber);
  solve->add_option("--emit-solutions", solutions_path, "Write solutions as JSON lines");
  solve->add_flag("--require-exact", require_exact, "Exit 3 when the cap leaves the bucket undetermined");
  add_output(solve);

  // sample-kb
  std::string global_kb_path;
  std::uint64_t seed = 0;
  auto* sample = app.add_subcommand("sample-kb", "Draw a per-dialogue kb from the global kb");
  sample->add_option("--delex", delex_path, "Delexicalised gold dialogue(s)")->required();
  sample->add_option("--global-kb", global_kb_path, "Global knowledge base")->required();
  sample->add_option("--seed", seed, "Random seed");
  add_output(sample);

  // relex
  std::string strategy, responses_dir, audit_dir = "llm-audit", render_path;
  bool type_restricted = false;
  std::size_t concurrency = 1;
  tc_llm_config llm;
  tc_llm_config_default(&llm);
  std::string model_name = llm.model_name;
  double temperature = llm.temperature;
  std::uint32_t timeout_ms = llm.timeout_ms;
  std::int32_t retries = llm.retries;
  auto* relex = app.add_subcommand("relex", "Fill the variables of each dialogue");
  relex->add_option("--delex", delex_path, "Delexicalised dialogue(s)")->required();
  relex->add_option("--kb", kb_path, "Knowledge base (shared or keyed by dialogue id)")->required();
  relex->add_option("--strategy", strategy, "random, most-frequent, llm or file")
      ->required()
      ->check(CLI::IsMember(kStrategies));
  relex->add_option("--seed", seed, "Random seed");
  relex->add_flag("--type-restricted", type_restricted, "Random values only from the variable's slot");
  relex->add_option("--responses", responses_dir, "Directory of <dialogue_id>.txt responses (strategy file)");
  relex->add_option("--model-name", model_name, "LLM model name");
  relex->add_option("--temperature", temperature, "Sampling temperature")->check(CLI::Range(0.0, 2.0));
  relex->add_option("--timeout", timeout_ms, "Request timeout in milliseconds")->check(CLI::PositiveNumber);
  relex->add_option("--retries", retries, "Retries per request")->check(CLI::NonNegativeNumber);
  relex->add_option("--concurrency", concurrency, "Dialogues processed at once")->check(CLI::PositiveNumber);
  relex->add_option("--audit-dir", audit_dir, "Where prompts and raw responses are kept (strategy llm)");
  relex->add_option("--render", render_path, "Also write the re-lexicalised dialogues here");
  add_output(relex);

  // eval
  std::string assignments_path, format = "json", strategy_label;
  bool with_ablations = false, use_gold = false;
  auto* eval = app.add_subcommand("eval", "Score assignments against the constraint models");
  eval->add_option("--delex", delex_path, "Delexicalised dialogue(s)")->required();
  eval->add_option("--ontology", ontology_path, "Ontology file")->required();
  eval->add_option("--kb", kb_path, "Knowledge base (shared or keyed by dialogue id)")->required();
  auto* assignments_opt = eval->add_option("--assignments", assignments_path, "Assignments keyed by dialogue id");
  auto* gold_opt = eval->add_flag("--gold", use_gold, "Score the gold values");
  assignments_opt->excludes(gold_opt);
  eval->add_option("--lexicon", lexicon_path, "Cue lexicon");
  eval->add_option("--ablate", ablate, "Constraint families to drop");
  eval->add_flag("--ablations", with_ablations, "Add the standard ablation rows");
  eval->add_option("--cap", cap, "Solution cap per dialogue")->check(CLI::PositiveNumber);
  eval->add_option("--concurrency", concurrency, "Dialogues evaluated at once")->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "Seed recorded in the report");
  eval->add_option("--strategy", strategy_label, "Label of the strategy that produced the assignments");
  eval->add_option("--format", format, "json, csv or markdown");
  add_output(eval);

  // stats
  auto* stats = app.add_subcommand("stats", "Constraint coverage of a corpus");
  stats->add_option("--delex", delex_path, "Delexicalised dialogue(s)")->required();
  stats->add_option("--ontology", ontology_path, "Ontology file")->required();
  stats->add_option("--kb", kb_path, "Knowledge base (shared or keyed by dialogue id)")->required();
  stats->add_option("--lexicon", lexicon_path, "Cue lexicon");
  stats->add_option("--ablate", ablate, "Constraint families to drop");
  stats->add_option("--format", format, "json or markdown");
  add_output(stats);

  // report
  std::string report_path;
  auto* report = app.add_subcommand("report", "Re-render a JSON report");
  report->add_option("-i,--input", report_path, "JSON report")->required();
  report->add_option("--format", format, "json, csv or markdown");
  add_output(report);

  // convert-multiwoz
  std::string data_path, db_path, out_dir;
  auto* convert = app.add_subcommand("convert-multiwoz", "Convert MultiWOZ restaurant dialogues");
  convert->add_option("--data", data_path, "MultiWOZ data.json")->required();
  convert->add_option("--db", db_path, "restaurant_db.json")->required();
  convert->add_option("--out-dir", out_dir, "Directory for ontology.json, global_kb.json, dialogues.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*delex) {
      const Items in = read_items(dialogues_path);
      std::vector<json> out;
      for (const json& d : in.items) {
        Owned text;
        check(tc_delexicalize(d.dump().c_str(), text.out()), dialogues_path);
        out.push_back(json::parse(text.str()));
      }
      write_output(output, join_items(std::move(out), in.single).dump(2));
    } else if (*extract) {
      const Items in = read_items(delex_path);
      const std::string ontology = read_text(ontology_path);
      const KbSource kbs(kb_path);
      const std::optional<std::string> lexicon =
          lexicon_path.empty() ? std::nullopt : std::optional(read_text(lexicon_path));
      std::vector<json> out;
      for (const json& d : in.items) {
        const std::string id = id_of(d, delex_path);
        tc_model* model = nullptr;
        check(tc_model_build(d.dump().c_str(), ontology.c_str(), kbs.for_dialogue(id).c_str(),
                             lexicon ? lexicon->c_str() : nullptr, ablate.c_str(), &model),
              id);
        Owned text;
        const tc_status s = tc_model_to_json(model, text.out());
        tc_model_free(model);
        check(s, id);
        out.push_back(json::parse(text.str()));
      }
      write_output(output, join_items(std::move(out), in.single).dump(2));
    } else if (*solve) {
      const Items in = read_items(model_path);
      std::ofstream jsonl;
      if (!solutions_path.empty()) {
        jsonl.open(solutions_path, std::ios::binary);
        if (!jsonl) throw Exit{2, "cannot write " + solutions_path};
      }
      std::vector<json> out;
      for (const json& m : in.items) {
        const std::string id = id_of(m, model_path);
        tc_model* model = nullptr;
        check(tc_model_from_json(m.dump().c_str(), &model), model_path);
        tc_solve_result* result = nullptr;
        const tc_status s = tc_model_solve(model, cap, jsonl.is_open() ? 1 : 0, &result);
        tc_model_free(model);
        check(s, id);
        std::string bucket;
        try {
          bucket = solve_bucket(result, require_exact, id);
        } catch (...) {
          tc_solve_result_free(result);
          throw;
        }
        json entry = {{"dialogue_id", id},
                      {"count", tc_solve_result_count(result)},
                      {"exact", tc_solve_result_exact(result) != 0},
                      {"bucket", bucket.empty() ? json(nullptr) : json(bucket)}};
        for (std::size_t i = 0; i < tc_solve_result_size(result); ++i) {
          Owned sol;
          check(tc_solve_result_solution(result, i, sol.out()), id);
          jsonl << json{{"dialogue_id", id}, {"solution", json::parse(sol.str())}}.dump() << '\n';
        }
        tc_solve_result_free(result);
        out.push_back(std::move(entry));
      }
      write_output(output, join_items(std::move(out), in.single).dump(2));
    } else if (*sample) {
      const Items in = read_items(delex_path);
      const std::string global = read_text(global_kb_path);
      json out = json::object();
      for (const json& d : in.items) {
        const std::string id = id_of(d, delex_path);
        Owned kb;
        check(tc_sample_kb(d.dump().c_str(), global.c_str(), seed, kb.out()), id);
        out[id] = json::parse(kb.str());
      }
      write_output(output, out.dump(2));
    } else if (*relex) {
      const Items in = read_items(delex_path);
      const KbSource kbs(kb_path);
      if (strategy == "file" && responses_dir.empty()) throw Exit{1, "--strategy file needs --responses"};
      if (strategy == "llm") {
        if (!llm.api_base || !*llm.api_base) throw Exit{1, "LLM_API_BASE is not set"};
        if (!llm.api_key || !*llm.api_key) throw Exit{1, "LLM_API_KEY is not set"};
        fs::create_directories(audit_dir);
      }
      llm.model_name = model_name.c_str();
      llm.temperature = temperature;
      llm.timeout_ms = timeout_ms;
      llm.retries = retries;

      std::vector<std::string> ids, delexes, kb_texts, responses(in.items.size());
      for (const json& d : in.items) {
        ids.push_back(id_of(d, delex_path));
        delexes.push_back(d.dump());
        kb_texts.push_back(kbs.for_dialogue(ids.back()));
        if (strategy == "file") responses[ids.size() - 1] = read_text((fs::path(responses_dir) / (ids.back() + ".txt")).string());
      }

      std::vector<std::string> assignments(in.items.size());
      std::vector<std::vector<std::string>> warnings(in.items.size());
      std::mutex io_mutex;
      todcsp::parallel_for(in.items.size(), strategy == "llm" ? concurrency : 1, [&](std::size_t i) {
        Owned a, w, raw, prompt;
        const char* d = delexes[i].c_str();
        const char* kb = kb_texts[i].c_str();
        if (strategy == "random") {
          check(tc_relex_random(d, kb, seed, type_restricted ? 1 : 0, a.out()), ids[i]);
        } else if (strategy == "most-frequent") {
          check(tc_relex_most_frequent(d, kb, a.out()), ids[i]);
        } else if (strategy == "file") {
          check(tc_parse_response(responses[i].c_str(), d, a.out(), w.out()), ids[i]);
        } else {
          check(tc_build_prompt(d, kb, prompt.out(), nullptr), ids[i]);
          check(tc_llm_relexicalize(d, kb, &llm, a.out(), raw.out(), w.out()), ids[i]);
          std::lock_guard lock(io_mutex);
          write_output((fs::path(audit_dir) / (ids[i] + ".prompt.txt")).string(), prompt.str());
          write_output((fs::path(audit_dir) / (ids[i] + ".txt")).string(), raw.str());
        }
        assignments[i] = a.str();
        if (w.p)
          for (const auto& msg : json::parse(w.str())) warnings[i].push_back(msg.get<std::string>());
      });

      json out = json::object();
      std::vector<json> rendered;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (const auto& msg : warnings[i]) warn(ids[i] + ": " + msg);
        out[ids[i]] = json::parse(assignments[i]);
        if (!render_path.empty()) {
          Owned text;
          check(tc_relexicalize(delexes[i].c_str(), assignments[i].c_str(), text.out()), ids[i]);
          rendered.push_back(json::parse(text.str()));
        }
      }
      if (!render_path.empty()) write_output(render_path, join_items(std::move(rendered), in.single).dump(2));
      write_output(output, out.dump(2));
    } else if (*eval || *stats) {
      const Items in = read_items(delex_path);
      const std::string ontology = read_text(ontology_path);
      const KbSource kbs(kb_path);
      const std::optional<std::string> lexicon =
          lexicon_path.empty() ? std::nullopt : std::optional(read_text(lexicon_path));
      std::optional<AssignmentSource> assigned;
      if (*eval && !use_gold) {
        if (assignments_path.empty()) throw Exit{1, "eval needs --assignments or --gold"};
        assigned.emplace(assignments_path, in.items.size());
      }
      tc_corpus* corpus = nullptr;
      check(tc_corpus_create(ontology.c_str(), lexicon ? lexicon->c_str() : nullptr, &corpus), ontology_path);
      std::unique_ptr<tc_corpus, void (*)(tc_corpus*)> guard(corpus, tc_corpus_free);
      for (const json& d : in.items) {
        const std::string id = id_of(d, delex_path);
        const std::string text = d.dump();
        std::string assignment;
        if (assigned) {
          assignment = assigned->for_dialogue(id);
        } else {
          Owned gold;
          check(tc_gold_assignment(text.c_str(), gold.out()), id);
          assignment = gold.str();
        }
        check(tc_corpus_add(corpus, text.c_str(), kbs.for_dialogue(id).c_str(), assignment.c_str()), id);
      }

      if (*stats) {
        Owned coverage;
        check(tc_corpus_coverage(corpus, ablate.c_str(), coverage.out()), "stats");
        const json rows = json::parse(coverage.str());
        if (format == "json") {
          write_output(output, rows.dump(2));
        } else if (format == "markdown" || format == "md") {
          std::ostringstream md;
          md << "| Constraint | #Variables | %Coverage |\n|---|---|---|\n";
          for (const json& r : rows) {
            char pct[32];
            std::snprintf(pct, sizeof pct, "%.2f", r["coverage"].get<double>() * 100.0);
            md << "| " << r["constraint"].get<std::string>() << " | " << r["variables"].get<std::size_t>() << " | "
               << pct << " |\n";
          }
          write_output(output, md.str());
        } else {
          throw Exit{1, "unknown stats format '" + format + "' (expected json or markdown)"};
        }
      } else {
        tc_eval_options options;
        tc_eval_options_default(&options);
        options.cap = cap;
        options.concurrency = static_cast<std::uint32_t>(concurrency);
        options.seed = seed;
        options.ablation = ablate.c_str();
        options.with_ablations = with_ablations ? 1 : 0;
        const std::string label = !strategy_label.empty() ? strategy_label : use_gold ? "gold" : "file";
        options.strategy = label.c_str();
        tc_report* rep = nullptr;
        check(tc_corpus_evaluate(corpus, &options, &rep), "eval");
        Owned text;
        const tc_status s = tc_report_render(rep, format.c_str(), text.out());
        tc_report_free(rep);
        check(s, "eval");
        write_output(output, text.str());
      }
    } else if (*report) {
      const std::string text = read_text(report_path);
      tc_report* rep = nullptr;
      check(tc_report_from_json(text.c_str(), &rep), report_path);
      Owned rendered;
      const tc_status s = tc_report_render(rep, format.c_str(), rendered.out());
      tc_report_free(rep);
      check(s, report_path);
      write_output(output, rendered.str());
    } else if (*convert) {
      const std::string data = read_text(data_path);
      const std::string db = read_text(db_path);
      Owned ontology, kb, dialogues, warnings;
      check(tc_convert_multiwoz(data.c_str(), db.c_str(), ontology.out(), kb.out(), dialogues.out(), warnings.out()),
            data_path);
      fs::create_directories(out_dir);
      write_output((fs::path(out_dir) / "ontology.json").string(), ontology.str());
      write_output((fs::path(out_dir) / "global_kb.json").string(), kb.str());
      write_output((fs::path(out_dir) / "dialogues.json").string(), dialogues.str());
      for (const auto& msg : json::parse(warnings.str())) warn(msg.get<std::string>());
      std::cerr << json::parse(dialogues.str()).size() << " dialogues written to " << out_dir << '\n';
    }
  } catch (const Exit& e) {
    std::cerr << "error: " << e.message << '\n';
    return e.code;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
