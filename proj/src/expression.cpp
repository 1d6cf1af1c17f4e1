#include "truex/expression.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace truex {

namespace {

constexpr long kMaxExponent = 1024;

struct FunctionSpec {
  std::string_view name;
  int arity;  // -1: variadic, at least one argument
};

constexpr FunctionSpec kFunctions[] = {
    {"abs", 1},  {"min", -1},  {"max", -1},  {"floor", 1}, {"ceil", 1},
    {"round", 1}, {"sqrt", 1}, {"mod", 2},   {"percent", 1},
};

const FunctionSpec* find_function(std::string_view name) {
  for (const auto& f : kFunctions) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  ExprNode parse() {
    skip_space();
    if (pos_ >= src_.size()) throw ExprParseError("empty-expression", 0, "empty expression");
    ExprNode node = parse_sum();
    skip_space();
    if (pos_ < src_.size()) {
      throw ExprParseError("unexpected-token", pos_, "unexpected '" + std::string(1, src_[pos_]) + "'");
    }
    return node;
  }

 private:
  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_space();
    return pos_ < src_.size() ? src_[pos_] : '\0';
  }

  static ExprNode binary(char op, ExprNode lhs, ExprNode rhs) {
    ExprNode node;
    node.kind = ExprNode::Kind::binary;
    node.op = op;
    node.children.push_back(std::move(lhs));
    node.children.push_back(std::move(rhs));
    return node;
  }

  ExprNode parse_sum() {
    ExprNode lhs = parse_product();
    for (;;) {
      char c = peek();
      if (c != '+' && c != '-') return lhs;
      ++pos_;
      lhs = binary(c, std::move(lhs), parse_product());
    }
  }

  ExprNode parse_product() {
    ExprNode lhs = parse_power();
    for (;;) {
      char c = peek();
      if (c != '*' && c != '/') return lhs;
      ++pos_;
      lhs = binary(c, std::move(lhs), parse_power());
    }
  }

  bool accept_power_operator() {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == '^') {
      ++pos_;
      return true;
    }
    if (pos_ + 1 < src_.size() && src_[pos_] == '*' && src_[pos_ + 1] == '*') {
      pos_ += 2;
      return true;
    }
    return false;
  }

  ExprNode parse_power() {
    ExprNode base = parse_unary();
    if (accept_power_operator()) {
      return binary('^', std::move(base), parse_power());
    }
    return base;
  }

  ExprNode parse_unary() {
    char c = peek();
    if (c == '-') {
      ++pos_;
      ExprNode node;
      node.kind = ExprNode::Kind::negate;
      node.children.push_back(parse_unary());
      return node;
    }
    if (c == '+') {
      ++pos_;
      return parse_unary();
    }
    return parse_primary();
  }

  ExprNode parse_primary() {
    skip_space();
    if (pos_ >= src_.size()) throw ExprParseError("unexpected-end", pos_, "unexpected end of expression");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      ExprNode inner = parse_sum();
      if (!accept(')')) throw ExprParseError("unbalanced-parenthesis", pos_, "expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ExprParseError("unexpected-token", pos_, "unexpected '" + std::string(1, c) + "'");
  }

  ExprNode parse_number() {
    const size_t start = pos_;
    bool seen_dot = false;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '.' && !seen_dot) {
        seen_dot = true;
        ++pos_;
      } else {
        break;
      }
    }
    auto value = parse_rational(src_.substr(start, pos_ - start));
    if (!value) throw ExprParseError("bad-number", start, "malformed number");
    ExprNode node;
    node.kind = ExprNode::Kind::literal;
    node.literal = *value;
    return node;
  }

  ExprNode parse_identifier() {
    const size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      ++pos_;
    }
    std::string name(src_.substr(start, pos_ - start));
    if (peek() != '(') {
      ExprNode node;
      node.kind = ExprNode::Kind::variable;
      node.name = std::move(name);
      return node;
    }
    const FunctionSpec* fn = find_function(name);
    if (!fn) throw ExprParseError("unknown-function", start, "unknown function '" + name + "'");
    ++pos_;  // '('
    ExprNode node;
    node.kind = ExprNode::Kind::call;
    node.name = std::move(name);
    if (!accept(')')) {
      do {
        node.children.push_back(parse_sum());
      } while (accept(','));
      if (!accept(')')) throw ExprParseError("unbalanced-parenthesis", pos_, "expected ')' after arguments");
    }
    const int argc = static_cast<int>(node.children.size());
    if ((fn->arity >= 0 && argc != fn->arity) || (fn->arity < 0 && argc < 1)) {
      throw ExprParseError("bad-arity", start, "wrong number of arguments to '" + node.name + "'");
    }
    return node;
  }

  std::string_view src_;
  size_t pos_ = 0;
};

int precedence(const ExprNode& node) {
  switch (node.kind) {
    case ExprNode::Kind::binary:
      switch (node.op) {
        case '+':
        case '-':
          return 1;
        case '*':
        case '/':
          return 2;
        default:
          return 3;
      }
    case ExprNode::Kind::negate:
      return 4;
    default:
      return 5;
  }
}

void render(const ExprNode& node, std::string& out);

void render_child(const ExprNode& child, bool parens, std::string& out) {
  if (parens) out += '(';
  render(child, out);
  if (parens) out += ')';
}

void render(const ExprNode& node, std::string& out) {
  switch (node.kind) {
    case ExprNode::Kind::literal:
      out += to_string(node.literal);
      return;
    case ExprNode::Kind::variable:
      out += node.name;
      return;
    case ExprNode::Kind::negate:
      out += '-';
      render_child(node.children[0], precedence(node.children[0]) < 4, out);
      return;
    case ExprNode::Kind::call:
      out += node.name;
      out += '(';
      for (size_t i = 0; i < node.children.size(); ++i) {
        if (i) out += ", ";
        render(node.children[i], out);
      }
      out += ')';
      return;
    case ExprNode::Kind::binary: {
      const int prec = precedence(node);
      const auto& lhs = node.children[0];
      const auto& rhs = node.children[1];
      if (node.op == '^') {
        render_child(lhs, precedence(lhs) <= prec, out);
        out += '^';
        render_child(rhs, precedence(rhs) < prec, out);
      } else {
        render_child(lhs, precedence(lhs) < prec, out);
        out += ' ';
        out += node.op;
        out += ' ';
        render_child(rhs, precedence(rhs) <= prec, out);
      }
      return;
    }
  }
}

void collect_variables(const ExprNode& node, std::set<std::string>& out) {
  if (node.kind == ExprNode::Kind::variable) out.insert(node.name);
  for (const auto& child : node.children) collect_variables(child, out);
}

Rational checked_divide(const Rational& a, const Rational& b) {
  if (b == 0) throw EvalError(EvalErrorCode::division_by_zero, "division by zero");
  return a / b;
}

Rational power(const Rational& base, const Rational& exponent) {
  if (!is_integer(exponent)) {
    throw EvalError(EvalErrorCode::non_integer_exponent, "exponent " + to_string(exponent) + " is not an integer");
  }
  const BigInt e = boost::multiprecision::numerator(exponent);
  if (e > kMaxExponent || e < -kMaxExponent) {
    throw EvalError(EvalErrorCode::exponent_too_large, "exponent " + e.str() + " out of range");
  }
  long n = e.convert_to<long>();
  if (n < 0 && base == 0) throw EvalError(EvalErrorCode::division_by_zero, "zero raised to a negative power");
  const bool invert = n < 0;
  n = invert ? -n : n;
  Rational result = 1;
  Rational factor = base;
  while (n > 0) {
    if (n & 1) result *= factor;
    factor *= factor;
    n >>= 1;
  }
  return invert ? Rational(1 / result) : result;
}

EvalResult eval_node(const ExprNode& node, const Environment& env) {
  switch (node.kind) {
    case ExprNode::Kind::literal:
      return {node.literal, true};
    case ExprNode::Kind::variable: {
      const Rational* value = env.find(node.name);
      if (!value) throw EvalError(EvalErrorCode::unbound_variable, "unbound variable '" + node.name + "'");
      return {*value, true};
    }
    case ExprNode::Kind::negate: {
      EvalResult r = eval_node(node.children[0], env);
      return {-r.value, r.exact};
    }
    case ExprNode::Kind::binary: {
      const EvalResult a = eval_node(node.children[0], env);
      const EvalResult b = eval_node(node.children[1], env);
      const bool exact = a.exact && b.exact;
      switch (node.op) {
        case '+':
          return {a.value + b.value, exact};
        case '-':
          return {a.value - b.value, exact};
        case '*':
          return {a.value * b.value, exact};
        case '/':
          return {checked_divide(a.value, b.value), exact};
        default:
          return {power(a.value, b.value), exact};
      }
    }
    case ExprNode::Kind::call: {
      std::vector<EvalResult> args;
      args.reserve(node.children.size());
      bool exact = true;
      for (const auto& child : node.children) {
        args.push_back(eval_node(child, env));
        exact = exact && args.back().exact;
      }
      const std::string& fn = node.name;
      if (fn == "abs") return {abs_of(args[0].value), exact};
      if (fn == "floor") return {Rational(floor_of(args[0].value)), exact};
      if (fn == "ceil") return {Rational(ceil_of(args[0].value)), exact};
      if (fn == "round") return {Rational(round_of(args[0].value)), exact};
      if (fn == "percent") return {args[0].value / 100, exact};
      if (fn == "min" || fn == "max") {
        Rational best = args[0].value;
        for (const auto& a : args) {
          if (fn == "min" ? a.value < best : a.value > best) best = a.value;
        }
        return {best, exact};
      }
      if (fn == "mod") {
        if (args[1].value == 0) throw EvalError(EvalErrorCode::division_by_zero, "mod by zero");
        const Rational q(floor_of(args[0].value / args[1].value));
        return {args[0].value - args[1].value * q, exact};
      }
      if (fn == "sqrt") {
        if (args[0].value < 0) throw EvalError(EvalErrorCode::domain_error, "sqrt of negative value");
        bool root_exact = true;
        Rational root = sqrt_of(args[0].value, &root_exact);
        return {root, exact && root_exact};
      }
      break;
    }
  }
  throw EvalError(EvalErrorCode::domain_error, "unsupported node");
}

}  // namespace

std::string_view to_string(EvalErrorCode code) {
  switch (code) {
    case EvalErrorCode::unbound_variable:
      return "unbound-variable";
    case EvalErrorCode::division_by_zero:
      return "division-by-zero";
    case EvalErrorCode::non_integer_exponent:
      return "non-integer-exponent";
    case EvalErrorCode::exponent_too_large:
      return "exponent-too-large";
    case EvalErrorCode::domain_error:
      return "domain-error";
  }
  return "unknown";
}

bool Environment::bind(const std::string& name, const Rational& value) {
  return values_.emplace(name, value).second;
}

const Rational* Environment::find(const std::string& name) const {
  auto it = values_.find(name);
  return it == values_.end() ? nullptr : &it->second;
}

Expression Expression::parse(std::string_view source) {
  Expression e;
  e.source_ = std::string(source);
  e.root_ = std::make_shared<const ExprNode>(Parser(source).parse());
  return e;
}

std::string Expression::canonical() const {
  std::string out;
  render(*root_, out);
  return out;
}

std::vector<std::string> Expression::variables() const {
  std::set<std::string> names;
  collect_variables(*root_, names);
  return {names.begin(), names.end()};
}

bool Expression::is_literal() const {
  const ExprNode* node = root_.get();
  while (node->kind == ExprNode::Kind::negate) node = &node->children[0];
  return node->kind == ExprNode::Kind::literal;
}

EvalResult Expression::evaluate(const Environment& env) const { return eval_node(*root_, env); }

EvalResult eval_expr(std::string_view source, const Environment& env) {
  return Expression::parse(source).evaluate(env);
}

bool is_known_function(std::string_view name) { return find_function(name) != nullptr; }

}  // namespace truex
