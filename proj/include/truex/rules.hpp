#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "truex/expression.hpp"

namespace truex {

struct Choice {
  std::string label;
  std::string text;

  bool operator==(const Choice&) const = default;
};

enum class Predicate { equals, contains, greater, less, in_range, regex_like_pattern };

std::string_view to_string(Predicate p);
std::optional<Predicate> predicate_from_string(std::string_view name);

struct RuleOperand {
  enum class Kind { variable, number, text, option };

  Kind kind = Kind::text;
  std::string name;  // variable name
  Rational number;
  std::string text;

  bool operator==(const RuleOperand&) const = default;
};

// `predicate(subject, object[, upper])`. The placeholder `option` stands for
// the candidate choice text. Rules that never mention `option` act as a
// guard on the subject: when the guard holds, the choice whose value equals
// the subject's value is selected.
struct RuleClause {
  Predicate predicate = Predicate::equals;
  RuleOperand subject;
  std::vector<RuleOperand> objects;

  bool references_option() const;
  std::string to_source() const;

  bool operator==(const RuleClause&) const = default;
};

class RuleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws RuleError on malformed text, wrong arity or an invalid pattern.
RuleClause parse_rule(std::string_view source);

struct MatchResult {
  std::optional<std::string> label;
  bool ambiguous = false;
};

// Throws RuleError if a variable operand is not bound in env.
MatchResult match_rule(const RuleClause& clause, const Environment& env, const std::vector<Choice>& choices);

}  // namespace truex
