#include "todcsp/evaluation.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "todcsp/errors.hpp"
#include "todcsp/random.hpp"
#include "todcsp/serialization.hpp"

namespace todcsp {

namespace {

constexpr std::string_view kUndefined = "—";

std::string metric_cell(const std::optional<double>& v) { return v ? format_metric(*v) : std::string(kUndefined); }

std::string violation_text(const Violation& v, const std::vector<std::string>& ids) {
  std::string out = v.rule + "@";
  for (std::size_t i = 0; i < v.variables.size(); ++i) {
    if (i > 0) out += '+';
    out += v.variables[i] < ids.size() ? ids[v.variables[i]] : "?";
  }
  return out;
}

std::string violations_text(const DialogueResult& r, std::string_view sep) {
  std::string out;
  for (const Violation& v : r.verdict.violations) {
    if (!out.empty()) out += sep;
    out += violation_text(v, r.variable_ids);
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string render_csv(const Report& r) {
  std::ostringstream out;
  out << "dialogue_id,consistent,bucket,solution_count,exact,variables,correct_variables,violations\n";
  for (const DialogueResult& d : r.dialogues)
    out << csv_field(d.dialogue_id) << ',' << (d.verdict.consistent ? "true" : "false") << ',' << to_string(d.bucket)
        << ',' << d.solution_count << ',' << (d.exact ? "true" : "false") << ',' << d.variable_total << ','
        << d.correct_variables << ',' << csv_field(violations_text(d, ";")) << '\n';
  return out.str();
}

std::string render_markdown(const Report& r) {
  std::ostringstream out;
  const RunMetadata& m = r.metadata;
  out << "# Consistency report\n\n";
  out << "- version: " << m.version << "\n- seed: " << m.seed << "\n- cap: " << m.cap
      << "\n- ablation: " << (m.ablation.empty() ? "none" : m.ablation)
      << "\n- strategy: " << (m.strategy.empty() ? "-" : m.strategy) << "\n- config hash: " << m.config_hash << "\n\n";

  out << "## Aggregates\n\n| N | M | GCA | VCA |\n|---|---|---|---|\n";
  out << "| " << r.aggregates.dialogues << " | " << r.aggregates.variables << " | " << format_metric(r.aggregates.gca)
      << " | " << format_metric(r.aggregates.vca) << " |\n\n";

  out << "## Solution groups\n\n| Solution group | #Dialogues | #Variables | GCA | VCA |\n|---|---|---|---|---|\n";
  for (const BucketRow& b : r.buckets)
    out << "| " << bucket_label(b.bucket) << " | " << b.dialogues << " | " << b.variables << " | "
        << metric_cell(b.gca) << " | " << metric_cell(b.vca) << " |\n";
  out << '\n';

  if (!r.coverage.empty()) {
    out << "## Constraint coverage\n\n| Constraint | #Variables | %Coverage |\n|---|---|---|\n";
    for (const CoverageRow& c : r.coverage)
      out << "| " << to_string(c.family) << " | " << c.variables << " | " << format_metric(c.proportion * 100.0)
          << " |\n";
    out << '\n';
  }

  if (!r.ablations.empty()) {
    out << "## Ablations\n\n| Configuration | GCA | VCA |\n|---|---|---|\n";
    out << "| all | " << format_metric(r.aggregates.gca) << " | " << format_metric(r.aggregates.vca) << " |\n";
    for (const AblationRow& a : r.ablations)
      out << "| " << a.label << " | " << format_metric(a.gca) << " | " << format_metric(a.vca) << " |\n";
    out << '\n';
  }

  out << "## Dialogues\n\n| Dialogue | Consistent | Solutions | Correct | Violations |\n|---|---|---|---|---|\n";
  for (const DialogueResult& d : r.dialogues) {
    const std::string count = std::to_string(d.solution_count) + (d.exact ? "" : "+");
    out << "| " << d.dialogue_id << " | " << (d.verdict.consistent ? "yes" : "no") << " | " << count << " | "
        << d.correct_variables << "/" << d.variable_total << " | " << violations_text(d, ", ") << " |\n";
  }
  return out.str();
}

}  // namespace

std::string format_metric(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return std::to_string(v);
  return std::string(buf, end);
}

std::string config_hash(const EvalOptions& options) {
  std::ostringstream key;
  key << "cap=" << options.cap << ";seed=" << options.seed << ";ablation=" << options.ablation.spec()
      << ";ablations=" << options.with_ablations << ";strategy=" << options.strategy;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(key.str())));
  return buf;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw UsageError("unknown report format '" + std::string(s) + "' (expected json, csv or markdown)");
}

std::string render_report(const Report& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: return io::to_json(report).dump(2) + "\n";
    case ReportFormat::csv: return render_csv(report);
    case ReportFormat::markdown: return render_markdown(report);
  }
  return {};
}

}  // namespace todcsp
