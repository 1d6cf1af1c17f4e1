#include "truex/step_format.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "truex/expression.hpp"

namespace truex {

namespace {

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c == '_'; });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool iequals_prefix(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      default:
        out += c;
    }
  }
  out += '"';
  return out;
}

struct LineParser {
  std::string_view line;
  int line_no;
  std::vector<ParseDiagnostic>& diags;
  size_t pos = 0;

  void error(size_t at, std::string code, std::string message) {
    diags.push_back({line_no, static_cast<int>(at) + 1, std::move(code), std::move(message), Severity::error});
  }

  void skip_space() {
    while (pos < line.size() && std::isspace(static_cast<unsigned char>(line[pos]))) ++pos;
  }

  // Parses one field value starting at pos; leaves pos at the ';' or end.
  std::optional<std::string> value() {
    skip_space();
    if (pos < line.size() && line[pos] == '"') {
      const size_t open = pos++;
      std::string out;
      bool closed = false;
      while (pos < line.size()) {
        const char c = line[pos++];
        if (c == '\\' && pos < line.size()) {
          const char esc = line[pos++];
          out += esc == 'n' ? '\n' : esc;
        } else if (c == '"') {
          closed = true;
          break;
        } else {
          out += c;
        }
      }
      if (!closed) {
        error(open, "unterminated-string", "unterminated quoted value");
        return std::nullopt;
      }
      skip_space();
      if (pos < line.size() && line[pos] != ';') {
        error(pos, "malformed-field", "unexpected text after quoted value");
        while (pos < line.size() && line[pos] != ';') ++pos;
        return std::nullopt;
      }
      return out;
    }
    const size_t start = pos;
    while (pos < line.size() && line[pos] != ';') ++pos;
    return std::string(trim(line.substr(start, pos - start)));
  }

  std::optional<ReasoningStep> step() {
    ReasoningStep s;
    pos = 4;  // after "STEP"
    skip_space();
    const size_t index_start = pos;
    while (pos < line.size() && std::isdigit(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos == index_start || pos - index_start > 6) {
      error(index_start, "malformed-step-header", "expected step index after STEP");
      return std::nullopt;
    }
    s.index = std::stoi(std::string(line.substr(index_start, pos - index_start)));
    skip_space();
    if (pos >= line.size() || line[pos] != ':') {
      error(pos, "malformed-step-header", "expected ':' after step index");
      return std::nullopt;
    }
    ++pos;
    skip_space();
    const size_t op_start = pos;
    while (pos < line.size() && (std::isalnum(static_cast<unsigned char>(line[pos])) || line[pos] == '_')) ++pos;
    const std::string op_name(line.substr(op_start, pos - op_start));
    if (op_name.empty()) {
      error(op_start, "malformed-step-header", "expected opcode");
      return std::nullopt;
    }
    auto op = opcode_from_string(op_name);
    if (!op) {
      error(op_start, "unknown-opcode", "unknown opcode '" + op_name + "'");
      return std::nullopt;
    }
    s.opcode = *op;
    skip_space();
    if (pos < line.size() && line[pos] != ';') {
      error(pos, "malformed-step-header", "expected ';' after opcode");
      return std::nullopt;
    }

    bool ok = true;
    std::set<std::string> seen;
    while (pos < line.size() && line[pos] == ';') {
      ++pos;
      skip_space();
      if (pos >= line.size()) break;
      if (line[pos] == ';') continue;
      const size_t key_start = pos;
      while (pos < line.size() && (std::isalnum(static_cast<unsigned char>(line[pos])) || line[pos] == '_')) ++pos;
      const std::string key(line.substr(key_start, pos - key_start));
      skip_space();
      if (key.empty() || pos >= line.size() || line[pos] != '=') {
        error(key_start, "malformed-field", "expected key=value");
        while (pos < line.size() && line[pos] != ';') ++pos;
        ok = false;
        continue;
      }
      ++pos;
      auto v = value();
      if (!v) {
        ok = false;
        continue;
      }
      if (!seen.insert(key).second) {
        error(key_start, "duplicate-field", "field '" + key + "' given twice");
        ok = false;
        continue;
      }
      if (key == "in") {
        std::string_view rest = *v;
        while (!rest.empty()) {
          const size_t comma = rest.find(',');
          std::string_view name = trim(rest.substr(0, comma));
          if (!is_identifier(name)) {
            error(key_start, "bad-identifier", "invalid variable name '" + std::string(name) + "'");
            ok = false;
          } else {
            s.inputs.emplace_back(name);
          }
          if (comma == std::string_view::npos) break;
          rest.remove_prefix(comma + 1);
        }
      } else if (key == "out") {
        if (!is_identifier(*v)) {
          error(key_start, "bad-identifier", "invalid variable name '" + *v + "'");
          ok = false;
        } else {
          s.output = *v;
        }
      } else if (key == "expr") {
        s.expression = *v;
      } else if (key == "rule") {
        s.rule = *v;
      } else if (key == "desc") {
        s.description = *v;
      } else {
        error(key_start, "unknown-field", "unknown field '" + key + "'");
        ok = false;
      }
    }
    if (!ok) return std::nullopt;
    return s;
  }
};

constexpr int kMaxStructuralConstant = 10;

bool is_structural_constant(const Rational& v) {
  if (!is_integer(v)) return false;
  const Rational a = abs_of(v);
  return a <= kMaxStructuralConstant || a == 100 || a == 1000;
}

bool contains_value(const std::vector<Rational>& values, const Rational& v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

void collect_literals(const ExprNode& node, std::vector<Rational>& out) {
  if (node.kind == ExprNode::Kind::literal) out.push_back(node.literal);
  for (const auto& c : node.children) collect_literals(c, out);
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// Labels asserted by phrases like "answer is B", "option (C)", "choice d".
std::vector<std::string> asserted_labels(std::string_view text, const std::vector<Choice>& choices) {
  std::set<std::string> labels;
  for (const auto& c : choices) labels.insert(canonical_choice_label(c.label));
  const std::string low = lower(text);
  std::vector<std::string> found;
  for (std::string_view cue : {"answer is", "option", "choice"}) {
    size_t at = 0;
    while ((at = low.find(cue, at)) != std::string::npos) {
      if (at > 0 && std::isalnum(static_cast<unsigned char>(low[at - 1]))) {
        at += cue.size();
        continue;
      }
      size_t p = at + cue.size();
      while (p < low.size() && (std::isspace(static_cast<unsigned char>(low[p])) || low[p] == '(' || low[p] == ':')) ++p;
      size_t e = p;
      while (e < low.size() && std::isalnum(static_cast<unsigned char>(low[e]))) ++e;
      const std::string token = canonical_choice_label(text.substr(p, e - p));
      if (!token.empty() && labels.count(token)) found.push_back(token);
      at = e;
    }
  }
  return found;
}

}  // namespace

ParseResult parse_spec(std::string_view source) {
  ParseResult result;
  ExplanationSpec spec;
  std::set<int> seen_indices;
  int expected = 1;
  bool failed = false;
  int line_no = 0;
  size_t start = 0;
  while (start <= source.size()) {
    size_t end = source.find('\n', start);
    if (end == std::string_view::npos) end = source.size();
    std::string_view raw = source.substr(start, end - start);
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    ++line_no;
    start = end + 1;

    size_t indent = 0;
    while (indent < raw.size() && std::isspace(static_cast<unsigned char>(raw[indent]))) ++indent;
    std::string_view line = raw.substr(indent);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    if (line.empty() || line.front() == '#') {
      if (end == source.size()) break;
      continue;
    }
    if (line.front() == '@') {
      if (line.rfind("@problem", 0) == 0) {
        spec.problem_id = std::string(trim(line.substr(8)));
      } else if (line.rfind("@generator", 0) == 0) {
        spec.generator = std::string(trim(line.substr(10)));
      } else {
        result.diagnostics.push_back({line_no, static_cast<int>(indent) + 1, "unknown-directive",
                                      "unknown directive", Severity::error});
        failed = true;
      }
    } else if (iequals_prefix(line, "step") &&
               (line.size() == 4 || std::isspace(static_cast<unsigned char>(line[4])))) {
      const size_t before = result.diagnostics.size();
      LineParser parser{line, line_no, result.diagnostics};
      auto step = parser.step();
      for (size_t i = before; i < result.diagnostics.size(); ++i) {
        result.diagnostics[i].column += static_cast<int>(indent);
      }
      if (!step) {
        failed = true;
      } else {
        if (seen_indices.count(step->index)) {
          result.diagnostics.push_back({line_no, static_cast<int>(indent) + 1, "duplicate-index",
                                        "step index " + std::to_string(step->index) + " repeated", Severity::error});
          failed = true;
        } else if (step->index != expected) {
          result.diagnostics.push_back({line_no, static_cast<int>(indent) + 1, "non-contiguous-index",
                                        "expected STEP " + std::to_string(expected) + ", found STEP " +
                                            std::to_string(step->index),
                                        Severity::error});
          failed = true;
        }
        seen_indices.insert(step->index);
        expected = std::max(expected, step->index + 1);
        spec.steps.push_back(std::move(*step));
      }
    } else {
      result.diagnostics.push_back({line_no, static_cast<int>(indent) + 1, "ignored-line",
                                    "line is not a STEP record and was ignored", Severity::warning});
    }
    if (end == source.size()) break;
  }

  if (spec.steps.empty() && !failed) {
    result.diagnostics.push_back({1, 1, "empty-spec", "no STEP records found", Severity::error});
    failed = true;
  }
  if (!failed) result.spec = std::move(spec);
  return result;
}

std::string serialize_step(const ReasoningStep& step) {
  std::string out = "STEP " + std::to_string(step.index) + ": " + std::string(to_string(step.opcode));
  if (!step.inputs.empty()) {
    out += "; in=";
    for (size_t i = 0; i < step.inputs.size(); ++i) {
      if (i) out += ',';
      out += step.inputs[i];
    }
  }
  if (step.output) out += "; out=" + *step.output;
  if (step.expression) out += "; expr=" + quote(*step.expression);
  if (step.rule) out += "; rule=" + quote(*step.rule);
  if (!step.description.empty()) out += "; desc=" + quote(step.description);
  return out;
}

std::string serialize_spec(const ExplanationSpec& spec) {
  std::string out;
  if (!spec.problem_id.empty()) out += "@problem " + spec.problem_id + "\n";
  if (!spec.generator.empty()) out += "@generator " + spec.generator + "\n";
  for (const auto& step : spec.steps) {
    out += serialize_step(step);
    out += '\n';
  }
  return out;
}

std::vector<Rational> extract_numerals(std::string_view text) {
  std::vector<Rational> out;
  size_t i = 0;
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
  while (i < text.size()) {
    if (!std::isdigit(static_cast<unsigned char>(text[i])) || (i > 0 && (is_word(text[i - 1]) || text[i - 1] == '.'))) {
      ++i;
      continue;
    }
    size_t j = i;
    std::string digits;
    auto take_digits = [&] {
      while (j < text.size()) {
        if (std::isdigit(static_cast<unsigned char>(text[j]))) {
          digits += text[j++];
        } else if (text[j] == ',' && j + 3 < text.size() &&
                   std::isdigit(static_cast<unsigned char>(text[j + 1])) &&
                   std::isdigit(static_cast<unsigned char>(text[j + 2])) &&
                   std::isdigit(static_cast<unsigned char>(text[j + 3])) &&
                   (j + 4 >= text.size() || !std::isdigit(static_cast<unsigned char>(text[j + 4])))) {
          ++j;  // thousands separator
        } else {
          break;
        }
      }
    };
    take_digits();
    if (j + 1 < text.size() && (text[j] == '.' || text[j] == '/') && std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
      digits += text[j++];
      while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) digits += text[j++];
    }
    if (j < text.size() && is_word(text[j])) {
      while (j < text.size() && is_word(text[j])) ++j;
      i = j;
      continue;
    }
    if (auto v = parse_rational(digits)) out.push_back(*v);
    i = j;
  }
  return out;
}

std::vector<LeakFinding> lint_leaks(const ExplanationSpec& spec, const Problem& problem) {
  std::vector<LeakFinding> findings;
  const std::vector<Rational> stated = extract_numerals(problem.statement);

  std::vector<Rational> givens;
  for (const auto& step : spec.steps) {
    if (step.opcode != Opcode::bind_given || !step.expression) continue;
    try {
      givens.push_back(eval_expr(*step.expression, {}).value);
    } catch (const std::exception&) {
    }
  }

  const bool numeric_gold = problem.answer.kind() == Answer::Kind::numeric;
  const bool gold_is_stated = numeric_gold && contains_value(stated, problem.answer.numeric_value());
  bool before_select = true;

  for (const auto& step : spec.steps) {
    if (step.opcode == Opcode::select_answer) before_select = false;

    std::vector<Rational> literals = extract_numerals(step.description);
    if (step.expression) {
      try {
        collect_literals(Expression::parse(*step.expression).root(), literals);
      } catch (const ExprParseError&) {
      }
    }

    if (step.opcode == Opcode::bind_given) {
      // Restating a statement quantity is the one permitted literal use.
      if (numeric_gold && !gold_is_stated && contains_value(literals, problem.answer.numeric_value())) {
        findings.push_back({step.index, "answer-leak", "given binds the gold answer"});
      }
      continue;
    }

    const char* code = nullptr;
    switch (step.opcode) {
      case Opcode::compute:
        code = "literal-in-compute";
        break;
      case Opcode::narrate:
        code = "literal-in-narrate";
        break;
      case Opcode::select_answer:
        code = "literal-in-select";
        break;
      default:
        break;
    }
    bool gold_seen = false;
    for (const auto& v : literals) {
      if (numeric_gold && v == problem.answer.numeric_value() && !is_structural_constant(v)) gold_seen = true;
      if (code && !contains_value(givens, v) && !contains_value(stated, v) && !is_structural_constant(v)) {
        findings.push_back({step.index, code, "literal " + to_string(v)});
      }
    }
    if (step.rule && numeric_gold) {
      for (const auto& v : extract_numerals(*step.rule)) {
        if (v == problem.answer.numeric_value() && !is_structural_constant(v)) gold_seen = true;
      }
    }
    if (gold_seen) findings.push_back({step.index, "answer-leak", "gold answer " + problem.answer.canonical()});

    if (!numeric_gold && before_select) {
      for (const auto& label : asserted_labels(step.description, problem.choices)) {
        findings.push_back({step.index, "choice-assertion", "asserts option " + label});
        if (label == problem.answer.choice_label()) {
          findings.push_back({step.index, "answer-leak", "gold answer " + label});
        }
      }
    }
  }
  std::sort(findings.begin(), findings.end(), [](const LeakFinding& a, const LeakFinding& b) {
    return std::tie(a.step, a.code, a.detail) < std::tie(b.step, b.code, b.detail);
  });
  findings.erase(std::unique(findings.begin(), findings.end()), findings.end());
  return findings;
}

bool LintReport::has_errors() const {
  return std::any_of(diagnostics.begin(), diagnostics.end(),
                     [](const ParseDiagnostic& d) { return d.severity == Severity::error; });
}

LintReport lint_spec(const ExplanationSpec& spec, const Problem* problem) {
  LintReport report;
  for (const auto& v : validate_spec(spec)) {
    report.diagnostics.push_back({v.step > 0 ? v.step : 1, 1, v.rule, v.id(), Severity::error});
  }

  // Outputs never read by a later step (the final one excepted).
  std::map<std::string, int> produced_at;
  std::set<std::string> consumed;
  for (const auto& step : spec.steps) {
    for (const auto& name : consumed_variables(step)) consumed.insert(name);
    if (step.output) produced_at.emplace(*step.output, step.index);
  }
  std::optional<std::string> final_output;
  for (auto it = spec.steps.rbegin(); it != spec.steps.rend(); ++it) {
    if (it->opcode == Opcode::narrate) continue;
    if (it->output) final_output = it->output;
    break;
  }
  for (const auto& [name, index] : produced_at) {
    if (!consumed.count(name) && name != final_output) {
      report.diagnostics.push_back(
          {index, 1, "unused-variable", "variable '" + name + "' is never used", Severity::warning});
    }
  }

  if (problem) {
    for (const auto& f : lint_leaks(spec, *problem)) {
      report.diagnostics.push_back({f.step, 1, f.code, f.detail, Severity::error});
    }
  } else {
    // Without a problem, numerals can only be checked against the givens.
    Problem blank;
    blank.answer = Answer::choice("");
    blank.task_kind = TaskKind::multiple_choice;
    for (const auto& f : lint_leaks(spec, blank)) {
      if (f.code.rfind("literal-in-", 0) == 0) report.diagnostics.push_back({f.step, 1, f.code, f.detail, Severity::error});
    }
  }
  std::stable_sort(report.diagnostics.begin(), report.diagnostics.end(),
                   [](const ParseDiagnostic& a, const ParseDiagnostic& b) { return a.line < b.line; });
  return report;
}

LintReport lint_source(std::string_view source, const Problem* problem) {
  ParseResult parsed = parse_spec(source);
  if (!parsed.spec) return {parsed.diagnostics};
  LintReport report = lint_spec(*parsed.spec, problem);
  // Diagnostics from lint_spec use step indices as "line"; remap to the
  // source lines when the spec came from text.
  std::vector<int> step_lines;
  {
    int line_no = 0;
    size_t start = 0;
    while (start <= source.size()) {
      size_t end = source.find('\n', start);
      if (end == std::string_view::npos) end = source.size();
      ++line_no;
      std::string_view line = trim(source.substr(start, end - start));
      if (iequals_prefix(line, "step") && (line.size() == 4 || std::isspace(static_cast<unsigned char>(line[4])))) {
        step_lines.push_back(line_no);
      }
      if (end == source.size()) break;
      start = end + 1;
    }
  }
  for (auto& d : report.diagnostics) {
    if (d.line >= 1 && d.line <= static_cast<int>(step_lines.size())) d.line = step_lines[d.line - 1];
  }
  report.diagnostics.insert(report.diagnostics.begin(), parsed.diagnostics.begin(), parsed.diagnostics.end());
  return report;
}

}  // namespace truex
