#include "truex/rules.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace truex {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim_copy(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

class RuleParser {
 public:
  explicit RuleParser(std::string_view src) : src_(src) {}

  RuleClause parse() {
    skip();
    const std::string name = identifier();
    auto predicate = predicate_from_string(name);
    if (!predicate) throw RuleError("unknown predicate '" + name + "'");
    expect('(');
    std::vector<RuleOperand> operands;
    operands.push_back(operand());
    while (accept(',')) operands.push_back(operand());
    expect(')');
    skip();
    if (pos_ != src_.size()) throw RuleError("trailing characters after rule");

    const size_t want = *predicate == Predicate::in_range ? 3 : 2;
    if (operands.size() != want) {
      throw RuleError(std::string(to_string(*predicate)) + " expects " + std::to_string(want) + " operands");
    }
    RuleClause clause;
    clause.predicate = *predicate;
    clause.subject = std::move(operands.front());
    clause.objects.assign(std::make_move_iterator(operands.begin() + 1), std::make_move_iterator(operands.end()));
    if (clause.predicate == Predicate::regex_like_pattern) {
      try {
        std::regex check(clause.objects[0].text, std::regex::ECMAScript | std::regex::icase);
      } catch (const std::regex_error&) {
        throw RuleError("invalid pattern '" + clause.objects[0].text + "'");
      }
    }
    return clause;
  }

 private:
  void skip() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) throw RuleError(std::string("expected '") + c + "' in rule");
  }

  std::string identifier() {
    skip();
    const size_t start = pos_;
    while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
    if (start == pos_) throw RuleError("expected identifier in rule");
    return std::string(src_.substr(start, pos_ - start));
  }

  RuleOperand operand() {
    skip();
    if (pos_ >= src_.size()) throw RuleError("unexpected end of rule");
    RuleOperand op;
    const char c = src_[pos_];
    if (c == '"') {
      ++pos_;
      std::string text;
      while (pos_ < src_.size() && src_[pos_] != '"') {
        if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) ++pos_;
        text += src_[pos_++];
      }
      if (pos_ >= src_.size()) throw RuleError("unterminated string in rule");
      ++pos_;
      op.kind = RuleOperand::Kind::text;
      op.text = std::move(text);
      return op;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '.') {
      const size_t start = pos_++;
      while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
                                    src_[pos_] == '/')) {
        ++pos_;
      }
      auto value = parse_rational(src_.substr(start, pos_ - start));
      if (!value) throw RuleError("malformed number in rule");
      op.kind = RuleOperand::Kind::number;
      op.number = *value;
      op.text = to_string(*value);
      return op;
    }
    std::string name = identifier();
    if (name == "option") {
      op.kind = RuleOperand::Kind::option;
    } else {
      op.kind = RuleOperand::Kind::variable;
      op.name = std::move(name);
    }
    return op;
  }

  std::string_view src_;
  size_t pos_ = 0;
};

struct Value {
  std::optional<Rational> number;
  std::string text;
};

Value resolve(const RuleOperand& op, const Environment& env, const Choice* option) {
  switch (op.kind) {
    case RuleOperand::Kind::variable: {
      const Rational* v = env.find(op.name);
      if (!v) throw RuleError("unresolvable subject '" + op.name + "'");
      return {*v, to_string(*v)};
    }
    case RuleOperand::Kind::number:
      return {op.number, to_string(op.number)};
    case RuleOperand::Kind::text:
      return {parse_rational(op.text), op.text};
    case RuleOperand::Kind::option: {
      std::string text = option ? trim_copy(option->text) : std::string();
      return {parse_rational(text), text};
    }
  }
  return {};
}

bool values_equal(const Value& a, const Value& b) {
  if (a.number && b.number) return *a.number == *b.number;
  return lower(trim_copy(a.text)) == lower(trim_copy(b.text));
}

bool holds(const RuleClause& clause, const Environment& env, const Choice* option) {
  const Value subject = resolve(clause.subject, env, option);
  const Value object = resolve(clause.objects[0], env, option);
  switch (clause.predicate) {
    case Predicate::equals:
      return values_equal(subject, object);
    case Predicate::contains:
      return lower(subject.text).find(lower(object.text)) != std::string::npos;
    case Predicate::greater:
      return subject.number && object.number && *subject.number > *object.number;
    case Predicate::less:
      return subject.number && object.number && *subject.number < *object.number;
    case Predicate::in_range: {
      const Value upper = resolve(clause.objects[1], env, option);
      return subject.number && object.number && upper.number && *object.number <= *subject.number &&
             *subject.number <= *upper.number;
    }
    case Predicate::regex_like_pattern: {
      std::regex pattern(object.text, std::regex::ECMAScript | std::regex::icase);
      return std::regex_search(subject.text, pattern);
    }
  }
  return false;
}

std::string operand_source(const RuleOperand& op) {
  switch (op.kind) {
    case RuleOperand::Kind::variable:
      return op.name;
    case RuleOperand::Kind::number:
      return to_string(op.number);
    case RuleOperand::Kind::text:
      return quote(op.text);
    case RuleOperand::Kind::option:
      return "option";
  }
  return {};
}

}  // namespace

std::string_view to_string(Predicate p) {
  switch (p) {
    case Predicate::equals:
      return "equals";
    case Predicate::contains:
      return "contains";
    case Predicate::greater:
      return "greater";
    case Predicate::less:
      return "less";
    case Predicate::in_range:
      return "in_range";
    case Predicate::regex_like_pattern:
      return "regex_like_pattern";
  }
  return "equals";
}

std::optional<Predicate> predicate_from_string(std::string_view name) {
  if (name == "equals") return Predicate::equals;
  if (name == "contains") return Predicate::contains;
  if (name == "greater") return Predicate::greater;
  if (name == "less") return Predicate::less;
  if (name == "in_range") return Predicate::in_range;
  if (name == "regex_like_pattern" || name == "matches") return Predicate::regex_like_pattern;
  return std::nullopt;
}

bool RuleClause::references_option() const {
  if (subject.kind == RuleOperand::Kind::option) return true;
  return std::any_of(objects.begin(), objects.end(),
                     [](const RuleOperand& o) { return o.kind == RuleOperand::Kind::option; });
}

std::string RuleClause::to_source() const {
  std::string out(to_string(predicate));
  out += '(';
  out += operand_source(subject);
  for (const auto& o : objects) {
    out += ", ";
    out += operand_source(o);
  }
  out += ')';
  return out;
}

RuleClause parse_rule(std::string_view source) { return RuleParser(source).parse(); }

MatchResult match_rule(const RuleClause& clause, const Environment& env, const std::vector<Choice>& choices) {
  std::vector<const Choice*> candidates;
  if (clause.references_option()) {
    for (const auto& choice : choices) {
      if (holds(clause, env, &choice)) candidates.push_back(&choice);
    }
  } else {
    if (!holds(clause, env, nullptr)) return {};
    const Value subject = resolve(clause.subject, env, nullptr);
    for (const auto& choice : choices) {
      const Value option{parse_rational(trim_copy(choice.text)), trim_copy(choice.text)};
      if (values_equal(subject, option)) candidates.push_back(&choice);
    }
  }
  if (candidates.size() == 1) return {candidates.front()->label, false};
  return {std::nullopt, candidates.size() > 1};
}

}  // namespace truex
