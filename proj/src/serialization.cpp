#include "todcsp/serialization.hpp"

#include <fstream>
#include <sstream>

#include "todcsp/errors.hpp"

namespace todcsp::io {

namespace {

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(where + ": missing field '" + key + "'");
  return *it;
}

template <class T>
T get(const json& j, const char* key, const std::string& where) {
  const json& value = field(j, key, where);
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key) || j[key].is_null()) return fallback;
  return get<T>(j, key, where);
}

VarKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "value") return VarKind::value;
  if (s == "count") return VarKind::count;
  throw ValidationError(where + ": unknown variable kind '" + s + "'");
}

// Accepts strings and integers alike (report files lose variable kinds).
Value any_value(const json& j) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  throw ValidationError("value must be a string or an integer");
}

json variable_to_json(const Variable& v) {
  json j = {{"id", v.id},         {"kind", std::string(to_string(v.kind))}, {"slot", v.slot},
            {"turn", v.turn_index}, {"gold", value_to_json(v.gold)},         {"surface", v.surface}};
  if (v.cue) j["cue"] = std::string(to_string(*v.cue));
  return j;
}

Variable variable_from_json(const json& j) {
  Variable v;
  v.id = get<std::string>(j, "id", "variable");
  const std::string where = "variable " + v.id;
  v.kind = parse_kind(get<std::string>(j, "kind", where), where);
  v.slot = get_or<std::string>(j, "slot", "", where);
  v.turn_index = get<std::size_t>(j, "turn", where);
  v.gold = value_from_json(field(j, "gold", where), v.kind);
  v.surface = get_or<std::string>(j, "surface", "", where);
  if (j.contains("cue") && !j["cue"].is_null()) {
    try {
      v.cue = parse_cue(get<std::string>(j, "cue", where));
    } catch (const Error& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }
  if (v.kind == VarKind::value && v.slot.empty()) throw ValidationError(where + ": value variable without slot");
  return v;
}

std::size_t position_of(const std::vector<Variable>& variables, const std::string& id, const std::string& where) {
  for (std::size_t i = 0; i < variables.size(); ++i)
    if (variables[i].id == id) return i;
  throw ValidationError(where + ": unknown variable '" + id + "'");
}

json ids_of(const std::vector<std::size_t>& positions, const std::vector<std::string>& ids) {
  json out = json::array();
  for (std::size_t p : positions) out.push_back(p < ids.size() ? ids[p] : "?");
  return out;
}

std::vector<std::string> variable_ids(const std::vector<Variable>& variables) {
  std::vector<std::string> ids;
  for (const Variable& v : variables) ids.push_back(v.id);
  return ids;
}

json metric(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(what + ": invalid JSON (" + e.what() + ")");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << content)) throw ValidationError("cannot write " + path);
}

Ontology ontology_from_json(const json& j) {
  std::vector<SlotType> slots;
  const json& arr = field(j, "slots", "ontology");
  if (!arr.is_array()) throw ValidationError("ontology: 'slots' must be an array");
  for (const json& s : arr) {
    SlotType t;
    t.name = get<std::string>(s, "name", "ontology slot");
    t.values = get<std::vector<std::string>>(s, "values", "ontology slot " + t.name);
    slots.push_back(std::move(t));
  }
  return Ontology(std::move(slots));
}

json to_json(const Ontology& ontology) {
  json slots = json::array();
  for (const SlotType& s : ontology.slots()) slots.push_back({{"name", s.name}, {"values", s.values}});
  return {{"slots", slots}};
}

KnowledgeBase kb_from_json(const json& j, const Ontology& ontology) {
  KnowledgeBase kb = kb_from_json(j);
  validate_kb(kb, ontology);
  return kb;
}

KnowledgeBase kb_from_json(const json& j) {
  KnowledgeBase kb;
  const json& arr = field(j, "instances", "kb");
  if (!arr.is_array()) throw ValidationError("kb: 'instances' must be an array");
  for (const json& i : arr) {
    Instance inst;
    inst.id = get<std::string>(i, "id", "kb instance");
    const std::string where = "kb instance " + inst.id;
    for (const auto& [slot, value] : get<std::map<std::string, std::string>>(i, "attributes", where))
      inst.attributes[slot] = normalize_text(value);
    kb.instances.push_back(std::move(inst));
  }
  return kb;
}

json to_json(const KnowledgeBase& kb) {
  json arr = json::array();
  for (const Instance& i : kb.instances) arr.push_back({{"id", i.id}, {"attributes", i.attributes}});
  return {{"instances", arr}};
}

Dialogue dialogue_from_json(const json& j) {
  Dialogue d;
  d.dialogue_id = get<std::string>(j, "dialogue_id", "dialogue");
  const std::string where = "dialogue " + d.dialogue_id;
  const json& turns = field(j, "turns", where);
  if (!turns.is_array()) throw ValidationError(where + ": 'turns' must be an array");
  for (const json& t : turns) {
    Turn turn;
    turn.speaker = parse_speaker(get<std::string>(t, "speaker", where));
    turn.text = get<std::string>(t, "text", where);
    if (t.contains("spans")) {
      for (const json& s : t["spans"]) {
        Span span;
        span.start = get<std::size_t>(s, "start", where);
        span.end = get<std::size_t>(s, "end", where);
        span.slot = get<std::string>(s, "slot", where);
        if (s.contains("cue") && !s["cue"].is_null()) {
          try {
            span.cue = parse_cue(get<std::string>(s, "cue", where));
          } catch (const Error& e) {
            throw ValidationError(where + ": " + e.what());
          }
        }
        turn.spans.push_back(std::move(span));
      }
    }
    d.turns.push_back(std::move(turn));
  }
  validate_spans(d);
  return d;
}

json to_json(const Dialogue& d) {
  json turns = json::array();
  for (const Turn& t : d.turns) {
    json spans = json::array();
    for (const Span& s : t.spans) {
      json js = {{"start", s.start}, {"end", s.end}, {"slot", s.slot}};
      if (s.cue) js["cue"] = std::string(to_string(*s.cue));
      spans.push_back(js);
    }
    turns.push_back({{"speaker", std::string(to_string(t.speaker))}, {"text", t.text}, {"spans", spans}});
  }
  return {{"dialogue_id", d.dialogue_id}, {"turns", turns}};
}

json value_to_json(const Value& v) {
  if (const auto* n = std::get_if<std::int64_t>(&v)) return *n;
  return std::get<std::string>(v);
}

Value value_from_json(const json& j, VarKind kind) {
  if (kind == VarKind::count) {
    if (j.is_number_integer()) return j.get<std::int64_t>();
    if (j.is_string()) return normalize_count(j.get<std::string>());
    throw ValidationError("count value must be an integer");
  }
  if (!j.is_string()) throw ValidationError("slot value must be a string");
  return normalize_text(j.get<std::string>());
}

json to_json(const DelexDialogue& d) {
  json turns = json::array();
  for (const DelexTurn& t : d.turns) turns.push_back({{"speaker", std::string(to_string(t.speaker))}, {"text", t.text}});
  json vars = json::array();
  for (const Variable& v : d.variables) vars.push_back(variable_to_json(v));
  return {{"dialogue_id", d.dialogue_id}, {"turns", turns}, {"variables", vars}};
}

DelexDialogue delex_from_json(const json& j) {
  DelexDialogue d;
  d.dialogue_id = get<std::string>(j, "dialogue_id", "delexicalised dialogue");
  const std::string where = "delexicalised dialogue " + d.dialogue_id;
  for (const json& t : field(j, "turns", where)) {
    DelexTurn turn;
    turn.speaker = parse_speaker(get<std::string>(t, "speaker", where));
    turn.text = get<std::string>(t, "text", where);
    d.turns.push_back(std::move(turn));
  }
  for (const json& v : field(j, "variables", where)) d.variables.push_back(variable_from_json(v));
  for (std::size_t i = 0; i < d.variables.size(); ++i) {
    if (d.variables[i].id != "V" + std::to_string(i + 1))
      throw ValidationError(where + ": variables must be numbered V1, V2, ... in order");
    if (d.variables[i].turn_index >= d.turns.size())
      throw ValidationError(where + ": variable " + d.variables[i].id + " points past the last turn");
  }
  return d;
}

json to_json(const Assignment& a, const DelexDialogue& d) {
  json j = json::object();
  for (std::size_t i = 0; i < d.variables.size(); ++i)
    j[d.variables[i].id] = i < a.values.size() && a.values[i] ? value_to_json(*a.values[i]) : json(nullptr);
  return j;
}

Assignment assignment_from_json(const json& j, const DelexDialogue& d) {
  const std::string where = "assignment for " + d.dialogue_id;
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
  Assignment a;
  a.values.resize(d.variables.size());
  for (const auto& [id, value] : j.items()) {
    auto pos = d.index_of(id);
    if (!pos) throw ValidationError(where + ": unknown variable '" + id + "'");
    if (value.is_null()) continue;
    try {
      a.values[*pos] = value_from_json(value, d.variables[*pos].kind);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ", " + id + ": " + e.what());
    }
  }
  return a;
}

CueLexicon lexicon_from_json(const json& j) {
  CueLexicon l = CueLexicon::defaults();
  l.none_cues = get_or(j, "none_cues", l.none_cues, "lexicon");
  l.exists_cues = get_or(j, "exists_cues", l.exists_cues, "lexicon");
  l.entity_slots = get_or(j, "entity_slots", l.entity_slots, "lexicon");
  l.ignore_phrases = get_or(j, "ignore_phrases", l.ignore_phrases, "lexicon");
  return l;
}

json to_json(const CueLexicon& l) {
  return {{"none_cues", l.none_cues},
          {"exists_cues", l.exists_cues},
          {"entity_slots", l.entity_slots},
          {"ignore_phrases", l.ignore_phrases}};
}

json to_json(const Constraint& c, const std::vector<Variable>& variables) {
  const auto ids = variable_ids(variables);
  json j = {{"family", std::string(to_string(c.family))}, {"scope", ids_of(c.scope, ids)}};
  json payload = json::object();
  if (!c.filters.empty() || is_domain_family(c.family)) payload["filters"] = ids_of(c.filters, ids);
  if (c.count_variable) payload["count"] = ids[*c.count_variable];
  j["payload"] = payload;
  j["turn"] = c.turn_index ? json(*c.turn_index) : json(nullptr);
  return j;
}

json to_json(const CSPModel& m) {
  json vars = json::array();
  for (const Variable& v : m.variables) vars.push_back(variable_to_json(v));
  json domains = json::object();
  for (std::size_t v = 0; v < m.variables.size(); ++v) {
    json values = json::array();
    for (const Value& value : m.constraints.domains[v]) values.push_back(value_to_json(value));
    domains[m.variables[v].id] = values;
  }
  json constraints = json::array();
  for (const Constraint& c : m.constraints.constraints) constraints.push_back(to_json(c, m.variables));
  return {{"dialogue_id", m.dialogue_id},  {"ablation", m.ablation.spec()}, {"variables", vars},
          {"kb", to_json(m.kb)},           {"domains", domains},           {"constraints", constraints},
          {"warnings", m.constraints.warnings}};
}

CSPModel model_from_json(const json& j) {
  CSPModel m;
  m.dialogue_id = get<std::string>(j, "dialogue_id", "model");
  const std::string where = "model " + m.dialogue_id;
  try {
    m.ablation = AblationConfig::parse(get_or<std::string>(j, "ablation", "", where));
  } catch (const UsageError& e) {
    throw ValidationError(where + ": " + e.what());
  }
  for (const json& v : field(j, "variables", where)) m.variables.push_back(variable_from_json(v));
  m.kb = kb_from_json(field(j, "kb", where));
  m.index = KBIndex::build(m.kb);

  const json& domains = field(j, "domains", where);
  m.constraints.domains.resize(m.variables.size());
  for (std::size_t v = 0; v < m.variables.size(); ++v) {
    const json& values = field(domains, m.variables[v].id.c_str(), where + " domains");
    for (const json& value : values) m.constraints.domains[v].push_back(value_from_json(value, m.variables[v].kind));
    std::sort(m.constraints.domains[v].begin(), m.constraints.domains[v].end());
  }
  for (const json& jc : field(j, "constraints", where)) {
    Constraint c;
    c.family = parse_family(get<std::string>(jc, "family", where));
    for (const auto& id : get<std::vector<std::string>>(jc, "scope", where))
      c.scope.push_back(position_of(m.variables, id, where));
    std::sort(c.scope.begin(), c.scope.end());
    if (jc.contains("payload") && jc["payload"].is_object()) {
      const json& p = jc["payload"];
      for (const auto& id : get_or<std::vector<std::string>>(p, "filters", {}, where))
        c.filters.push_back(position_of(m.variables, id, where));
      if (p.contains("count")) c.count_variable = position_of(m.variables, get<std::string>(p, "count", where), where);
    }
    if (jc.contains("turn") && !jc["turn"].is_null()) c.turn_index = get<std::size_t>(jc, "turn", where);
    m.constraints.constraints.push_back(std::move(c));
  }
  m.constraints.warnings = get_or<std::vector<std::string>>(j, "warnings", {}, where);
  m.validate();
  return m;
}

json solution_to_json(const Solution& s, const std::vector<Variable>& variables) {
  json j = json::object();
  for (std::size_t v = 0; v < s.size() && v < variables.size(); ++v) j[variables[v].id] = value_to_json(s[v]);
  return j;
}

json to_json(const SolveResult& r, const CSPModel& m, bool include_solutions) {
  json j = {{"dialogue_id", m.dialogue_id}, {"count", r.count}, {"exact", r.exact}};
  // A capped count below 101 does not determine the bucket.
  j["bucket"] = r.exact || r.count >= kMinBucketCap ? json(std::string(to_string(r.bucket))) : json(nullptr);
  if (include_solutions) {
    json sols = json::array();
    for (const Solution& s : r.solutions) sols.push_back(solution_to_json(s, m.variables));
    j["solutions"] = sols;
  }
  return j;
}

json to_json(const ConsistencyVerdict& v, const std::vector<std::string>& variable_ids,
             const std::vector<Constraint>* constraints) {
  json violations = json::array();
  for (const Violation& viol : v.violations) {
    json jv = {{"rule", viol.rule},
               {"constraint", viol.constraint ? json(*viol.constraint) : json(nullptr)},
               {"variables", ids_of(viol.variables, variable_ids)}};
    if (constraints && viol.constraint && *viol.constraint < constraints->size())
      jv["scope"] = ids_of((*constraints)[*viol.constraint].scope, variable_ids);
    violations.push_back(jv);
  }
  return {{"consistent", v.consistent}, {"zero_solution_rule", v.zero_solution_rule_applied}, {"violations", violations}};
}

json to_json(const DialogueResult& r) {
  json matched = nullptr;
  if (r.matched_solution) {
    matched = json::array();
    for (const Value& value : *r.matched_solution) matched.push_back(value_to_json(value));
  }
  json verdict = to_json(r.verdict, r.variable_ids);
  return {{"dialogue_id", r.dialogue_id},
          {"variables", r.variable_ids},
          {"consistent", r.verdict.consistent},
          {"zero_solution_rule", r.verdict.zero_solution_rule_applied},
          {"violations", verdict["violations"]},
          {"bucket", std::string(to_string(r.bucket))},
          {"solution_count", r.solution_count},
          {"exact", r.exact},
          {"variable_total", r.variable_total},
          {"correct_variables", r.correct_variables},
          {"matched_solution", matched}};
}

json to_json(const Report& r) {
  json buckets = json::array();
  for (const BucketRow& b : r.buckets)
    buckets.push_back({{"bucket", std::string(to_string(b.bucket))},
                       {"label", std::string(bucket_label(b.bucket))},
                       {"dialogues", b.dialogues},
                       {"variables", b.variables},
                       {"gca", metric(b.gca)},
                       {"vca", metric(b.vca)}});
  json coverage = json::array();
  for (const CoverageRow& c : r.coverage)
    coverage.push_back(
        {{"constraint", std::string(to_string(c.family))}, {"variables", c.variables}, {"coverage", c.proportion}});
  json ablations = json::array();
  for (const AblationRow& a : r.ablations)
    ablations.push_back({{"config", a.label}, {"removed", a.removed}, {"gca", a.gca}, {"vca", a.vca}});
  json dialogues = json::array();
  for (const DialogueResult& d : r.dialogues) dialogues.push_back(to_json(d));
  const RunMetadata& m = r.metadata;
  return {{"metadata",
           {{"version", m.version},
            {"seed", m.seed},
            {"cap", m.cap},
            {"ablation", m.ablation},
            {"strategy", m.strategy},
            {"config_hash", m.config_hash}}},
          {"aggregates",
           {{"dialogues", r.aggregates.dialogues},
            {"variables", r.aggregates.variables},
            {"gca", r.aggregates.gca},
            {"vca", r.aggregates.vca}}},
          {"buckets", buckets},
          {"coverage", coverage},
          {"ablations", ablations},
          {"dialogues", dialogues}};
}

Report report_from_json(const json& j) {
  const std::string where = "report";
  Report r;
  const json& m = field(j, "metadata", where);
  r.metadata.version = get<std::string>(m, "version", where);
  r.metadata.seed = get<std::uint64_t>(m, "seed", where);
  r.metadata.cap = get<std::uint64_t>(m, "cap", where);
  r.metadata.ablation = get_or<std::string>(m, "ablation", "", where);
  r.metadata.strategy = get_or<std::string>(m, "strategy", "", where);
  r.metadata.config_hash = get_or<std::string>(m, "config_hash", "", where);

  const json& a = field(j, "aggregates", where);
  r.aggregates.dialogues = get<std::size_t>(a, "dialogues", where);
  r.aggregates.variables = get<std::size_t>(a, "variables", where);
  r.aggregates.gca = get<double>(a, "gca", where);
  r.aggregates.vca = get<double>(a, "vca", where);

  for (const json& b : get_or<json>(j, "buckets", json::array(), where)) {
    BucketRow row;
    row.bucket = parse_bucket(get<std::string>(b, "bucket", where));
    row.dialogues = get<std::size_t>(b, "dialogues", where);
    row.variables = get<std::size_t>(b, "variables", where);
    if (!b["gca"].is_null()) row.gca = get<double>(b, "gca", where);
    if (!b["vca"].is_null()) row.vca = get<double>(b, "vca", where);
    r.buckets.push_back(row);
  }
  for (const json& c : get_or<json>(j, "coverage", json::array(), where)) {
    CoverageRow row;
    row.family = parse_family(get<std::string>(c, "constraint", where));
    row.variables = get<std::size_t>(c, "variables", where);
    row.proportion = get<double>(c, "coverage", where);
    r.coverage.push_back(row);
  }
  for (const json& ab : get_or<json>(j, "ablations", json::array(), where))
    r.ablations.push_back({get<std::string>(ab, "config", where), get_or<std::string>(ab, "removed", "", where),
                           get<double>(ab, "gca", where), get<double>(ab, "vca", where)});
  for (const json& d : get_or<json>(j, "dialogues", json::array(), where)) {
    DialogueResult res;
    res.dialogue_id = get<std::string>(d, "dialogue_id", where);
    res.variable_ids = get<std::vector<std::string>>(d, "variables", where);
    res.verdict.consistent = get<bool>(d, "consistent", where);
    res.verdict.zero_solution_rule_applied = get_or<bool>(d, "zero_solution_rule", false, where);
    for (const json& v : get_or<json>(d, "violations", json::array(), where)) {
      Violation viol;
      viol.rule = get<std::string>(v, "rule", where);
      if (v.contains("constraint") && !v["constraint"].is_null())
        viol.constraint = get<std::size_t>(v, "constraint", where);
      for (const auto& id : get<std::vector<std::string>>(v, "variables", where)) {
        auto it = std::find(res.variable_ids.begin(), res.variable_ids.end(), id);
        if (it == res.variable_ids.end()) throw ValidationError(where + ": unknown variable '" + id + "'");
        viol.variables.push_back(static_cast<std::size_t>(it - res.variable_ids.begin()));
      }
      res.verdict.violations.push_back(std::move(viol));
    }
    res.bucket = parse_bucket(get<std::string>(d, "bucket", where));
    res.solution_count = get<std::uint64_t>(d, "solution_count", where);
    res.exact = get_or<bool>(d, "exact", true, where);
    res.variable_total = get<std::size_t>(d, "variable_total", where);
    res.correct_variables = get<std::size_t>(d, "correct_variables", where);
    if (d.contains("matched_solution") && d["matched_solution"].is_array()) {
      Solution s;
      for (const json& v : d["matched_solution"]) s.push_back(any_value(v));
      res.matched_solution = std::move(s);
    }
    r.dialogues.push_back(std::move(res));
  }
  return r;
}

}  // namespace todcsp::io
