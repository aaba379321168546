#include "todcsp/solver.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "todcsp/errors.hpp"

namespace todcsp {

namespace {

// Index-level view of a model used by the search. Values are interned so
// equality tests compare integers; value variables carry their kb postings.
class Search {
 public:
  explicit Search(const CSPModel& model) : model_(model), n_(model.variables.size()) {
    const DomainMap& domains = model.constraints.domains;
    std::map<Value, int> intern;
    gid_.resize(n_);
    postings_.resize(n_);
    counts_.resize(n_);
    alive_.resize(n_);
    alive_count_.resize(n_);
    var_constraints_.resize(n_);
    for (std::size_t v = 0; v < n_; ++v) {
      const Variable& var = model.variables[v];
      for (const Value& value : domains[v]) {
        gid_[v].push_back(intern.try_emplace(value, static_cast<int>(intern.size())).first->second);
        if (var.kind == VarKind::value) {
          postings_[v].push_back(&model.index.postings(var.slot, value_to_string(value)));
        } else {
          const auto* n = std::get_if<std::int64_t>(&value);
          counts_[v].push_back(n ? *n : -1);
        }
      }
      alive_[v].assign(domains[v].size(), 1);
      alive_count_[v] = domains[v].size();
    }
    for (std::size_t k = 0; k < model.constraints.constraints.size(); ++k) {
      const Constraint& c = model.constraints.constraints[k];
      Compiled cc{c.family, c.scope, {}, c.count_variable};
      std::map<std::string, std::vector<std::size_t>> by_slot;
      for (std::size_t f : c.filters) by_slot[model.variables[f].slot].push_back(f);
      for (auto& [slot, vars] : by_slot) cc.filter_groups.push_back(vars);
      for (std::size_t v : c.scope) var_constraints_[v].push_back(compiled_.size());
      compiled_.push_back(std::move(cc));
    }
    chosen_.assign(n_, -1);
  }

  std::size_t size() const { return n_; }
  std::size_t domain_size(std::size_t v) const { return alive_[v].size(); }
  bool alive(std::size_t v, std::size_t i) const { return alive_[v][i] != 0; }
  const std::vector<int>& chosen() const { return chosen_; }

  // Unary constraints pruned before search. False if some domain empties.
  bool propagate_root() {
    for (const Compiled& c : compiled_) {
      if (c.scope.size() != 1) continue;
      const std::size_t u = c.scope[0];
      for (std::size_t j = 0; j < alive_[u].size(); ++j) {
        if (!alive_[u][j]) continue;
        chosen_[u] = static_cast<int>(j);
        if (!holds(c)) kill(u, j);
        chosen_[u] = -1;
      }
      if (alive_count_[u] == 0) return false;
    }
    return std::all_of(alive_count_.begin(), alive_count_.end(), [](std::size_t c) { return c > 0; });
  }

  std::size_t mark() const { return trail_.size(); }

  // Assigns v := i and forward-checks. Returns false on a wipe-out or a
  // violated fully-assigned constraint; the caller must undo(mark) either way.
  bool assign(std::size_t v, std::size_t i) {
    chosen_[v] = static_cast<int>(i);
    for (std::size_t k : var_constraints_[v]) {
      const Compiled& c = compiled_[k];
      std::size_t unassigned = 0, last = 0;
      for (std::size_t u : c.scope) {
        if (chosen_[u] < 0) {
          ++unassigned;
          last = u;
        }
      }
      if (c.family == Family::C2 || c.family == Family::C3) {
        const int g = gid_[v][i];
        for (std::size_t u : c.scope) {
          if (chosen_[u] >= 0) continue;
          for (std::size_t j = 0; j < alive_[u].size(); ++j) {
            if (!alive_[u][j]) continue;
            const bool same = gid_[u][j] == g;
            if ((c.family == Family::C2) != same) kill(u, j);
          }
          if (alive_count_[u] == 0) return false;
        }
      }
      if (unassigned == 0) {
        if (!holds(c)) return false;
      } else if (unassigned == 1) {
        for (std::size_t j = 0; j < alive_[last].size(); ++j) {
          if (!alive_[last][j]) continue;
          chosen_[last] = static_cast<int>(j);
          if (!holds(c)) kill(last, j);
        }
        chosen_[last] = -1;
        if (alive_count_[last] == 0) return false;
      }
    }
    return true;
  }

  void undo(std::size_t to, std::size_t v) {
    while (trail_.size() > to) {
      auto [u, j] = trail_.back();
      trail_.pop_back();
      alive_[u][j] = 1;
      ++alive_count_[u];
    }
    chosen_[v] = -1;
  }

  Solution solution() const {
    Solution s;
    for (std::size_t v = 0; v < n_; ++v) s.push_back(model_.constraints.domains[v][static_cast<std::size_t>(chosen_[v])]);
    return s;
  }

 private:
  struct Compiled {
    Family family;
    std::vector<std::size_t> scope;
    std::vector<std::vector<std::size_t>> filter_groups;
    std::optional<std::size_t> count_variable;
  };

  void kill(std::size_t u, std::size_t j) {
    alive_[u][j] = 0;
    --alive_count_[u];
    trail_.emplace_back(u, j);
  }

  std::size_t pick(std::size_t v) const { return static_cast<std::size_t>(chosen_[v]); }

  bool holds(const Compiled& c) const {
    switch (c.family) {
      case Family::C1:
        return true;
      case Family::C2:
        for (std::size_t k = 1; k < c.scope.size(); ++k)
          if (gid_[c.scope[k]][pick(c.scope[k])] != gid_[c.scope[0]][pick(c.scope[0])]) return false;
        return true;
      case Family::C3:
        for (std::size_t a = 0; a < c.scope.size(); ++a)
          for (std::size_t b = a + 1; b < c.scope.size(); ++b)
            if (gid_[c.scope[a]][pick(c.scope[a])] == gid_[c.scope[b]][pick(c.scope[b])]) return false;
        return true;
      case Family::C4:
      case Family::C5:
      case Family::C6: {
        InstanceSet match(model_.index.total(), true);
        for (const auto& group : c.filter_groups) {
          InstanceSet any(model_.index.total());
          for (std::size_t f : group) any |= *postings_[f][pick(f)];
          match &= any;
        }
        if (c.family == Family::C4) return !match.any();
        if (c.family == Family::C5) return match.any();
        return static_cast<std::int64_t>(match.count()) == counts_[*c.count_variable][pick(*c.count_variable)];
      }
    }
    return false;
  }

  const CSPModel& model_;
  std::size_t n_;
  std::vector<std::vector<int>> gid_;
  std::vector<std::vector<const InstanceSet*>> postings_;
  std::vector<std::vector<std::int64_t>> counts_;
  std::vector<std::vector<char>> alive_;
  std::vector<std::size_t> alive_count_;
  std::vector<std::vector<std::size_t>> var_constraints_;
  std::vector<Compiled> compiled_;
  std::vector<int> chosen_;
  std::vector<std::pair<std::size_t, std::size_t>> trail_;
};

bool in_domain(const CSPModel& model, std::size_t v, const Value& value) {
  const auto& dom = model.constraints.domains[v];
  return std::binary_search(dom.begin(), dom.end(), value);
}

std::vector<std::size_t> offenders(const CSPModel& model, const Constraint& c, const std::vector<std::optional<Value>>& values) {
  switch (c.family) {
    case Family::C1:
      return c.scope;
    case Family::C2: {
      std::map<Value, std::size_t> freq;
      for (std::size_t v : c.scope) ++freq[*values[v]];
      const Value* majority = nullptr;
      std::size_t best = 0;
      for (std::size_t v : c.scope) {
        const std::size_t f = freq[*values[v]];
        if (f > best) {
          best = f;
          majority = &*values[v];
        }
      }
      std::vector<std::size_t> out;
      for (std::size_t v : c.scope)
        if (*values[v] != *majority) out.push_back(v);
      return out;
    }
    case Family::C3: {
      std::vector<std::size_t> out;
      for (std::size_t a : c.scope)
        for (std::size_t b : c.scope)
          if (a != b && *values[a] == *values[b]) {
            out.push_back(a);
            break;
          }
      return out;
    }
    case Family::C4:
    case Family::C5:
      return c.filters.empty() ? c.scope : c.filters;
    case Family::C6:
      return {*c.count_variable};
  }
  (void)model;
  return c.scope;
}

bool holds_values(const CSPModel& model, const Constraint& c, const std::vector<std::optional<Value>>& values) {
  switch (c.family) {
    case Family::C1:
      return in_domain(model, c.scope[0], *values[c.scope[0]]);
    case Family::C2:
      for (std::size_t v : c.scope)
        if (*values[v] != *values[c.scope[0]]) return false;
      return true;
    case Family::C3:
      for (std::size_t a = 0; a < c.scope.size(); ++a)
        for (std::size_t b = a + 1; b < c.scope.size(); ++b)
          if (*values[c.scope[a]] == *values[c.scope[b]]) return false;
      return true;
    case Family::C4:
      return !model.index.exists_matching(constraint_filters(model, c, values));
    case Family::C5:
      return model.index.exists_matching(constraint_filters(model, c, values));
    case Family::C6: {
      const auto* claimed = std::get_if<std::int64_t>(&*values[*c.count_variable]);
      return claimed &&
             *claimed == static_cast<std::int64_t>(model.index.count_matching(constraint_filters(model, c, values)));
    }
  }
  return false;
}

}  // namespace

void CSPModel::validate() const {
  validate_constraint_set(constraints, variables);
  for (std::size_t v = 0; v < variables.size(); ++v) {
    const auto& dom = constraints.domains[v];
    if (dom.empty()) throw ValidationError("model: variable " + variables[v].id + " has an empty domain");
    const bool want_count = variables[v].kind == VarKind::count;
    for (const Value& value : dom)
      if (std::holds_alternative<std::int64_t>(value) != want_count)
        throw ValidationError("model: domain of " + variables[v].id + " mixes value kinds");
    if (!std::is_sorted(dom.begin(), dom.end()) || std::adjacent_find(dom.begin(), dom.end()) != dom.end())
      throw ValidationError("model: domain of " + variables[v].id + " is not sorted and unique");
  }
  if (index.total() != kb.size()) throw ValidationError("model: kb index out of date");
}

CSPModel make_model(const DelexDialogue& delex, const Ontology& ontology, const KnowledgeBase& kb,
                    const CueLexicon& lexicon, const AblationConfig& ablation) {
  CSPModel m;
  m.dialogue_id = delex.dialogue_id;
  m.variables = delex.variables;
  m.kb = kb;
  validate_kb(m.kb, ontology);
  m.index = KBIndex::build(m.kb);
  m.ablation = ablation;
  m.constraints = extract_constraints(delex, ontology, m.kb, lexicon, ablation);
  m.validate();
  return m;
}

std::string_view to_string(Bucket b) {
  switch (b) {
    case Bucket::zero: return "zero";
    case Bucket::one: return "one";
    case Bucket::two_to_ten: return "two_to_ten";
    case Bucket::eleven_to_hundred: return "eleven_to_hundred";
    case Bucket::over_hundred: return "over_hundred";
  }
  return "?";
}

std::string_view bucket_label(Bucket b) {
  switch (b) {
    case Bucket::zero: return "0 sol.";
    case Bucket::one: return "1 sol.";
    case Bucket::two_to_ten: return "2-10 sol.";
    case Bucket::eleven_to_hundred: return "11-100 sol.";
    case Bucket::over_hundred: return "101+ sol.";
  }
  return "?";
}

Bucket parse_bucket(std::string_view s) {
  for (Bucket b : {Bucket::zero, Bucket::one, Bucket::two_to_ten, Bucket::eleven_to_hundred, Bucket::over_hundred})
    if (s == to_string(b) || s == bucket_label(b)) return b;
  throw ValidationError("unknown solution bucket '" + std::string(s) + "'");
}

Bucket count_bucket(std::uint64_t count, bool exact) {
  if (!exact && count < kMinBucketCap)
    throw CapError("solution count " + std::to_string(count) + " is a lower bound; raise --cap to at least 101");
  if (count == 0) return Bucket::zero;
  if (count == 1) return Bucket::one;
  if (count <= 10) return Bucket::two_to_ten;
  if (count <= 100) return Bucket::eleven_to_hundred;
  return Bucket::over_hundred;
}

Filters constraint_filters(const CSPModel& model, const Constraint& c, const std::vector<std::optional<Value>>& values) {
  Filters filters;
  for (std::size_t f : c.filters)
    if (values[f]) filters.emplace_back(model.variables[f].slot, value_to_string(*values[f]));
  return filters;
}

bool satisfies(const CSPModel& model, const Assignment& assignment, const Constraint& constraint) {
  for (std::size_t v : constraint.scope)
    if (v >= assignment.values.size() || !assignment.values[v])
      throw ValidationError("satisfies: variable " + (v < model.variables.size() ? model.variables[v].id : "?") +
                            " is unassigned");
  return holds_values(model, constraint, assignment.values);
}

SolveResult enumerate_solutions(const CSPModel& model, std::uint64_t cap, bool keep_solutions) {
  if (cap == 0) throw UsageError("solution cap must be at least 1");
  SolveResult result;
  Search search(model);
  bool stop = false;

  auto dfs = [&](auto&& self, std::size_t v) -> void {
    if (v == search.size()) {
      if (result.count == cap) {
        result.exact = false;
        stop = true;
        return;
      }
      ++result.count;
      if (keep_solutions) result.solutions.push_back(search.solution());
      return;
    }
    for (std::size_t i = 0; i < search.domain_size(v) && !stop; ++i) {
      if (!search.alive(v, i)) continue;
      const std::size_t mark = search.mark();
      if (search.assign(v, i)) self(self, v + 1);
      search.undo(mark, v);
    }
  };
  if (search.propagate_root()) dfs(dfs, 0);

  Assignment probe;
  for (const Solution& s : result.solutions) {
    probe.values.assign(s.begin(), s.end());
    for (const Constraint& c : model.constraints.constraints)
      if (!holds_values(model, c, probe.values))
        throw std::logic_error("solver produced a solution violating " + std::string(to_string(c.family)) +
                               " in " + model.dialogue_id);
  }
  // A capped count below 101 only bounds the bucket from below; count_bucket
  // refuses it when asked with exact=false.
  result.bucket = count_bucket(result.count, true);
  return result;
}

std::optional<BestMatch> best_match(const CSPModel& model, const Assignment& assignment) {
  Search search(model);
  const std::size_t n = search.size();
  std::vector<int> target(n, -1);
  for (std::size_t v = 0; v < n && v < assignment.values.size(); ++v) {
    if (!assignment.values[v]) continue;
    const auto& dom = model.constraints.domains[v];
    auto it = std::lower_bound(dom.begin(), dom.end(), *assignment.values[v]);
    if (it != dom.end() && *it == *assignment.values[v]) target[v] = static_cast<int>(it - dom.begin());
  }

  long best = -1;
  std::vector<int> best_choice;

  // Is chosen[0..depth) lexicographically greater than the incumbent's prefix?
  auto later_than_best = [&](std::size_t depth) {
    const auto& cur = search.chosen();
    for (std::size_t v = 0; v < depth; ++v)
      if (cur[v] != best_choice[v]) return cur[v] > best_choice[v];
    return false;
  };

  auto dfs = [&](auto&& self, std::size_t v, long agree) -> void {
    long optimistic = agree;
    for (std::size_t u = v; u < n; ++u)
      if (target[u] >= 0 && search.alive(u, static_cast<std::size_t>(target[u]))) ++optimistic;
    if (optimistic < best) return;
    if (optimistic == best && later_than_best(v)) return;
    if (v == n) {
      if (agree > best || (agree == best && search.chosen() < best_choice)) {
        best = agree;
        best_choice = search.chosen();
      }
      return;
    }
    auto visit = [&](std::size_t i) {
      const std::size_t mark = search.mark();
      if (search.assign(v, i)) self(self, v + 1, agree + (static_cast<int>(i) == target[v] ? 1 : 0));
      search.undo(mark, v);
    };
    if (target[v] >= 0 && search.alive(v, static_cast<std::size_t>(target[v]))) visit(static_cast<std::size_t>(target[v]));
    for (std::size_t i = 0; i < search.domain_size(v); ++i)
      if (static_cast<int>(i) != target[v] && search.alive(v, i)) visit(i);
  };
  if (search.propagate_root()) dfs(dfs, 0, 0);
  if (best < 0) return std::nullopt;

  BestMatch match;
  for (std::size_t v = 0; v < n; ++v)
    match.solution.push_back(model.constraints.domains[v][static_cast<std::size_t>(best_choice[v])]);
  match.agreement = static_cast<std::size_t>(best);
  return match;
}

ConsistencyVerdict check_consistency(const CSPModel& model, const Assignment& assignment, const SolveResult& solve) {
  const std::size_t n = model.variables.size();
  if (assignment.values.size() != n)
    throw ValidationError("assignment for " + model.dialogue_id + " has " + std::to_string(assignment.values.size()) +
                          " variables, model has " + std::to_string(n));
  ConsistencyVerdict verdict;
  const auto& values = assignment.values;

  if (solve.count == 0) {
    verdict.zero_solution_rule_applied = true;
    std::vector<std::size_t> grounded;
    for (std::size_t v = 0; v < n; ++v) {
      const Variable& var = model.variables[v];
      if (!values[v] || var.kind == VarKind::count) continue;
      if (model.index.kb_has_value(var.slot, value_to_string(*values[v]))) grounded.push_back(v);
    }
    if (!grounded.empty()) verdict.violations.push_back({"zero-solution", std::nullopt, grounded});
    verdict.consistent = verdict.violations.empty();
    return verdict;
  }

  if (model.ablation.removes(Family::C1)) {
    for (std::size_t v = 0; v < n; ++v)
      if (!values[v] || !in_domain(model, v, *values[v])) verdict.violations.push_back({"C1", std::nullopt, {v}});
  }
  const auto& constraints = model.constraints.constraints;
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    const Constraint& c = constraints[k];
    std::vector<std::size_t> unfilled;
    for (std::size_t v : c.scope)
      if (!values[v]) unfilled.push_back(v);
    const std::string rule(to_string(c.family));
    if (!unfilled.empty()) {
      verdict.violations.push_back({rule, k, unfilled});
    } else if (!holds_values(model, c, values)) {
      verdict.violations.push_back({rule, k, offenders(model, c, values)});
    }
  }
  verdict.consistent = verdict.violations.empty();
  return verdict;
}

}  // namespace todcsp
