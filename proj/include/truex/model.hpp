#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "truex/rational.hpp"
#include "truex/rules.hpp"

namespace truex {

enum class TaskKind { numeric, multiple_choice };

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> task_kind_from_string(std::string_view name);

// A gold or predicted answer. Numeric payloads are exact rationals; choice
// labels are stored upper-cased. `inexact` marks values produced by an
// approximating operation (sqrt of a non-square).
class Answer {
 public:
  enum class Kind { numeric, choice };

  static Answer numeric(Rational value, bool inexact = false);
  static Answer choice(std::string_view label);

  Kind kind() const { return kind_; }
  const Rational& numeric_value() const;
  const std::string& choice_label() const;
  bool inexact() const { return inexact_; }

  // "24", "1/3" or the choice label.
  std::string canonical() const;

  bool operator==(const Answer&) const = default;

 private:
  Kind kind_ = Kind::numeric;
  Rational numeric_;
  std::string label_;
  bool inexact_ = false;
};

std::string canonical_choice_label(std::string_view label);

class ComparisonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ToleranceMode { absolute, relative };

// Relative 1e-6: the comparison used when scoring predictions.
const Rational& default_tolerance();

// numeric: |a - b| <= tol (relative mode scales tol by max(1, |b|));
// choice: case-insensitive label equality. Inexact operands are compared
// with at least the default relative tolerance. Throws ComparisonError when
// the kinds differ.
bool answers_equal(const Answer& a, const Answer& b, const Rational& tol,
                   ToleranceMode mode = ToleranceMode::absolute);

// Scoring helper: default relative tolerance, and a kind mismatch counts as
// "not equal" instead of throwing.
bool answer_matches_gold(const Answer& predicted, const Answer& gold);

struct Problem {
  std::string id;
  std::string statement;
  Answer answer;
  std::vector<std::string> reference_steps;
  TaskKind task_kind = TaskKind::numeric;
  std::vector<Choice> choices;
  std::map<std::string, std::string> metadata;

  bool operator==(const Problem&) const = default;
};

// Empty when the problem satisfies its invariants.
std::vector<std::string> check_problem(const Problem& problem);

enum class Opcode { bind_given, compute, lookup_rule, select_answer, narrate };

std::string_view to_string(Opcode op);
std::optional<Opcode> opcode_from_string(std::string_view name);

struct ReasoningStep {
  int index = 0;
  Opcode opcode = Opcode::narrate;
  std::vector<std::string> inputs;
  std::optional<std::string> output;
  std::optional<std::string> expression;
  std::optional<std::string> rule;
  std::string description;

  bool operator==(const ReasoningStep&) const = default;
};

struct ExplanationSpec {
  std::string problem_id;
  std::vector<ReasoningStep> steps;
  std::string generator;

  bool operator==(const ExplanationSpec&) const = default;
};

struct Trajectory {
  std::string problem_id;
  std::vector<std::string> steps;
  std::optional<Answer> predicted_answer;
  std::optional<bool> correct;

  bool operator==(const Trajectory&) const = default;
};

struct Violation {
  int step = 0;  // 0 for spec-level violations
  std::string rule;

  // "unbound-variable@3", or just the rule for spec-level violations.
  std::string id() const;
  bool operator==(const Violation&) const = default;
  auto operator<=>(const Violation&) const = default;
};

// Returns the violations sorted by (step, rule); empty iff the spec
// satisfies every structural invariant.
std::vector<Violation> validate_spec(const ExplanationSpec& spec);

// Variables a step reads: its `in=` list plus the identifiers of its
// expression and rule. Unparseable expressions contribute nothing.
std::vector<std::string> consumed_variables(const ReasoningStep& step);

}  // namespace truex
