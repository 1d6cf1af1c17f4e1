#include "truex/model.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "truex/expression.hpp"

namespace truex {

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::numeric ? "numeric" : "multiple_choice";
}

std::optional<TaskKind> task_kind_from_string(std::string_view name) {
  if (name == "numeric") return TaskKind::numeric;
  if (name == "multiple_choice") return TaskKind::multiple_choice;
  return std::nullopt;
}

std::string canonical_choice_label(std::string_view label) {
  std::string out;
  for (char c : label) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '.') continue;
    out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

Answer Answer::numeric(Rational value, bool inexact) {
  Answer a;
  a.kind_ = Kind::numeric;
  a.numeric_ = std::move(value);
  a.inexact_ = inexact;
  return a;
}

Answer Answer::choice(std::string_view label) {
  Answer a;
  a.kind_ = Kind::choice;
  a.label_ = canonical_choice_label(label);
  return a;
}

const Rational& Answer::numeric_value() const {
  if (kind_ != Kind::numeric) throw ComparisonError("answer is not numeric");
  return numeric_;
}

const std::string& Answer::choice_label() const {
  if (kind_ != Kind::choice) throw ComparisonError("answer is not a choice");
  return label_;
}

std::string Answer::canonical() const { return kind_ == Kind::numeric ? to_string(numeric_) : label_; }

const Rational& default_tolerance() {
  static const Rational tol(1, 1000000);
  return tol;
}

bool answers_equal(const Answer& a, const Answer& b, const Rational& tol, ToleranceMode mode) {
  if (a.kind() != b.kind()) throw ComparisonError("cannot compare numeric and choice answers");
  if (a.kind() == Answer::Kind::choice) return a.choice_label() == b.choice_label();

  Rational bound = tol;
  if (mode == ToleranceMode::relative) bound *= std::max(Rational(1), abs_of(b.numeric_value()));
  if (a.inexact() || b.inexact()) {
    const Rational floor_bound = default_tolerance() * std::max(Rational(1), abs_of(b.numeric_value()));
    bound = std::max(bound, floor_bound);
  }
  return abs_of(a.numeric_value() - b.numeric_value()) <= bound;
}

bool answer_matches_gold(const Answer& predicted, const Answer& gold) {
  if (predicted.kind() != gold.kind()) return false;
  return answers_equal(predicted, gold, default_tolerance(), ToleranceMode::relative);
}

std::vector<std::string> check_problem(const Problem& problem) {
  std::vector<std::string> issues;
  if (problem.id.empty()) issues.emplace_back("empty-id");
  if (problem.task_kind == TaskKind::multiple_choice) {
    if (problem.choices.size() < 2) issues.emplace_back("too-few-choices");
    std::set<std::string> labels;
    for (const auto& c : problem.choices) {
      if (!labels.insert(canonical_choice_label(c.label)).second) issues.emplace_back("duplicate-choice-label");
    }
    if (problem.answer.kind() != Answer::Kind::choice) {
      issues.emplace_back("answer-kind-mismatch");
    } else if (!labels.count(problem.answer.choice_label())) {
      issues.emplace_back("answer-not-a-choice");
    }
  } else if (problem.answer.kind() != Answer::Kind::numeric) {
    issues.emplace_back("answer-kind-mismatch");
  }
  return issues;
}

std::string_view to_string(Opcode op) {
  switch (op) {
    case Opcode::bind_given:
      return "bind_given";
    case Opcode::compute:
      return "compute";
    case Opcode::lookup_rule:
      return "lookup_rule";
    case Opcode::select_answer:
      return "select_answer";
    case Opcode::narrate:
      return "narrate";
  }
  return "narrate";
}

std::optional<Opcode> opcode_from_string(std::string_view name) {
  if (name == "bind_given") return Opcode::bind_given;
  if (name == "compute") return Opcode::compute;
  if (name == "lookup_rule") return Opcode::lookup_rule;
  if (name == "select_answer") return Opcode::select_answer;
  if (name == "narrate") return Opcode::narrate;
  return std::nullopt;
}

std::string Violation::id() const { return step > 0 ? rule + "@" + std::to_string(step) : rule; }

std::vector<std::string> consumed_variables(const ReasoningStep& step) {
  std::set<std::string> names(step.inputs.begin(), step.inputs.end());
  if (step.expression && step.opcode != Opcode::bind_given) {
    try {
      for (auto& v : Expression::parse(*step.expression).variables()) names.insert(v);
    } catch (const ExprParseError&) {
    }
  }
  if (step.rule) {
    try {
      const RuleClause clause = parse_rule(*step.rule);
      if (clause.subject.kind == RuleOperand::Kind::variable) names.insert(clause.subject.name);
      for (const auto& o : clause.objects) {
        if (o.kind == RuleOperand::Kind::variable) names.insert(o.name);
      }
    } catch (const RuleError&) {
    }
  }
  return {names.begin(), names.end()};
}

std::vector<Violation> validate_spec(const ExplanationSpec& spec) {
  std::vector<Violation> out;
  if (spec.steps.empty()) {
    out.push_back({0, "empty-spec"});
    return out;
  }

  std::set<std::string> produced;
  int select_count = 0;
  const int total = static_cast<int>(spec.steps.size());
  for (int pos = 1; pos <= total; ++pos) {
    const ReasoningStep& step = spec.steps[pos - 1];
    if (step.index != pos) out.push_back({pos, "non-contiguous-index"});

    for (const auto& name : consumed_variables(step)) {
      if (!produced.count(name)) {
        out.push_back({pos, "unbound-variable"});
        break;
      }
    }

    switch (step.opcode) {
      case Opcode::bind_given: {
        if (!step.output) out.push_back({pos, "missing-output"});
        bool literal = false;
        if (step.expression) {
          try {
            literal = Expression::parse(*step.expression).is_literal();
          } catch (const ExprParseError&) {
          }
        }
        if (!literal) out.push_back({pos, "non-literal-given"});
        break;
      }
      case Opcode::compute:
        if (!step.output) out.push_back({pos, "missing-output"});
        if (!step.expression) {
          out.push_back({pos, "missing-expression"});
        } else {
          try {
            Expression::parse(*step.expression);
          } catch (const ExprParseError&) {
            out.push_back({pos, "bad-expression"});
          }
        }
        break;
      case Opcode::lookup_rule:
        if (step.rule) {
          try {
            parse_rule(*step.rule);
          } catch (const RuleError&) {
            out.push_back({pos, "bad-rule"});
          }
        }
        break;
      case Opcode::select_answer:
        ++select_count;
        if (select_count > 1) out.push_back({pos, "multiple-select"});
        if (pos != total) out.push_back({pos, "select-not-last"});
        if (step.inputs.size() != 1) out.push_back({pos, "bad-select"});
        break;
      case Opcode::narrate:
        break;
    }

    if (step.output) {
      if (!produced.insert(*step.output).second) out.push_back({pos, "duplicate-output"});
    }
  }

  auto last = std::find_if(spec.steps.rbegin(), spec.steps.rend(),
                           [](const ReasoningStep& s) { return s.opcode != Opcode::narrate; });
  if (last == spec.steps.rend() || last->opcode == Opcode::bind_given) out.push_back({0, "no-final-answer"});

  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace truex
