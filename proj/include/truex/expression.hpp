#pragma once

#include <initializer_list>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "truex/rational.hpp"

namespace truex {

// Syntax tree of an arithmetic expression. Literals are always
// non-negative; a leading minus is a `negate` node.
struct ExprNode {
  enum class Kind { literal, variable, negate, binary, call };

  Kind kind = Kind::literal;
  Rational literal;
  std::string name;  // variable or function name
  char op = 0;       // one of + - * / ^ for binary nodes
  std::vector<ExprNode> children;
};

class ExprParseError : public std::runtime_error {
 public:
  ExprParseError(std::string code, size_t position, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)), position_(position) {}

  const std::string& code() const noexcept { return code_; }
  size_t position() const noexcept { return position_; }

 private:
  std::string code_;
  size_t position_;
};

enum class EvalErrorCode {
  unbound_variable,
  division_by_zero,
  non_integer_exponent,
  exponent_too_large,
  domain_error,
};

std::string_view to_string(EvalErrorCode code);

class EvalError : public std::runtime_error {
 public:
  EvalError(EvalErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
  EvalErrorCode code() const noexcept { return code_; }

 private:
  EvalErrorCode code_;
};

// Single-assignment variable bindings.
class Environment {
 public:
  Environment() = default;
  Environment(std::initializer_list<std::pair<const std::string, Rational>> init) : values_(init) {}

  // Returns false (and leaves the existing binding) if the name is taken.
  bool bind(const std::string& name, const Rational& value);
  const Rational* find(const std::string& name) const;
  bool contains(const std::string& name) const { return values_.count(name) != 0; }
  const std::map<std::string, Rational>& values() const { return values_; }

 private:
  std::map<std::string, Rational> values_;
};

struct EvalResult {
  Rational value;
  bool exact = true;
};

class Expression {
 public:
  // Throws ExprParseError. Unknown functions and wrong arity are parse
  // errors; division by zero and friends surface only in evaluate().
  static Expression parse(std::string_view source);

  const std::string& source() const { return source_; }
  const ExprNode& root() const { return *root_; }

  // Minimal-parenthesis rendering; parse(canonical()) yields the same tree.
  std::string canonical() const;

  // Sorted, de-duplicated variable names.
  std::vector<std::string> variables() const;

  // True when the expression is a single (possibly negated) number.
  bool is_literal() const;

  EvalResult evaluate(const Environment& env) const;

 private:
  std::string source_;
  std::shared_ptr<const ExprNode> root_;
};

// Convenience wrapper: parse + evaluate.
EvalResult eval_expr(std::string_view source, const Environment& env);

// Functions accepted in expressions with their arity (-1 = variadic, >= 1).
bool is_known_function(std::string_view name);

}  // namespace truex
