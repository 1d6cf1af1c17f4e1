#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "truex/model.hpp"

namespace truex {

// Line-oriented explanation format:
//
//   spec      = { line "\n" } ;
//   line      = blank | comment | directive | step ;
//   comment   = "#" { char } ;
//   directive = ( "@problem" | "@generator" ) space text ;
//   step      = "STEP" space index ":" space opcode { ";" field } [ ";" ] ;
//   opcode    = "bind_given" | "compute" | "lookup_rule" | "select_answer" | "narrate" ;
//   field     = ( "in" | "out" | "expr" | "rule" | "desc" ) "=" value ;
//   value     = quoted | bare ;
//   quoted    = '"' { char | '\"' | '\\' | '\n' } '"' ;
//   bare      = { char - ";" } ;
//
// `in` holds a comma-separated variable list. The STEP keyword is matched
// case-insensitively; indices must run 1..T without gaps.

enum class Severity { error, warning };

struct ParseDiagnostic {
  int line = 1;
  int column = 1;
  std::string code;
  std::string message;
  Severity severity = Severity::error;

  bool operator==(const ParseDiagnostic&) const = default;
};

struct ParseResult {
  std::optional<ExplanationSpec> spec;
  std::vector<ParseDiagnostic> diagnostics;

  bool ok() const { return spec.has_value(); }
};

// Total: never throws on malformed input, reports diagnostics instead.
ParseResult parse_spec(std::string_view source);

// Canonical text; parse_spec(serialize_spec(s)).spec == s for valid specs.
std::string serialize_spec(const ExplanationSpec& spec);
std::string serialize_step(const ReasoningStep& step);

struct LeakFinding {
  int step = 0;
  std::string code;
  std::string detail;

  std::string id() const { return code + "@" + std::to_string(step); }
  bool operator==(const LeakFinding&) const = default;
};

// Flags numerals that reveal values (compute/narrate/select literals that
// are neither givens, statement quantities nor small structural constants),
// the gold answer anywhere outside statement-backed givens, and choice
// assertions before select_answer.
std::vector<LeakFinding> lint_leaks(const ExplanationSpec& spec, const Problem& problem);

// Word-bounded numerals of a text ("2nd" and "x2" are not numerals;
// "1,200" reads as 1200).
std::vector<Rational> extract_numerals(std::string_view text);

struct LintReport {
  std::vector<ParseDiagnostic> diagnostics;  // parse + validation + leaks
  bool has_errors() const;
};

// Everything `true lint` reports for one spec. Problem is optional: without
// it the leak checks that need the statement or gold answer are skipped.
LintReport lint_source(std::string_view source, const Problem* problem);
LintReport lint_spec(const ExplanationSpec& spec, const Problem* problem);

}  // namespace truex
