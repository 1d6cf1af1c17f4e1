#include "truex/executor.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <variant>

#include "truex/errors.hpp"
#include "truex/parallel.hpp"
#include "truex/step_format.hpp"

namespace truex {

std::string_view to_string(StepStatus s) {
  switch (s) {
    case StepStatus::executed:
      return "executed";
    case StepStatus::tool_failed:
      return "tool_failed";
    case StepStatus::interpreter_failed:
      return "interpreter_failed";
    case StepStatus::skipped_narrate:
      return "skipped_narrate";
  }
  return "executed";
}

std::string_view to_string(ToolUsed t) {
  switch (t) {
    case ToolUsed::none:
      return "none";
    case ToolUsed::calculator:
      return "calculator";
    case ToolUsed::rule_matcher:
      return "rule_matcher";
    case ToolUsed::provider_interpreter:
      return "provider_interpreter";
  }
  return "none";
}

namespace {

std::optional<StepStatus> status_from_string(std::string_view s) {
  for (auto v : {StepStatus::executed, StepStatus::tool_failed, StepStatus::interpreter_failed,
                 StepStatus::skipped_narrate}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<ToolUsed> tool_from_string(std::string_view s) {
  for (auto v : {ToolUsed::none, ToolUsed::calculator, ToolUsed::rule_matcher, ToolUsed::provider_interpreter}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && ws(s.back())) s.pop_back();
  size_t i = 0;
  while (i < s.size() && ws(s[i])) ++i;
  return s.substr(i);
}

// Strips one layer of matching quotes or backticks.
std::string unwrap(std::string s) {
  s = trim(std::move(s));
  if (s.size() >= 2 && (s.front() == '`' || s.front() == '"') && s.back() == s.front()) s = s.substr(1, s.size() - 2);
  return trim(std::move(s));
}

struct Interpretation {
  enum class Kind { expr, rule, fail } kind = Kind::fail;
  std::string body;
};

Interpretation parse_interpretation(const std::string& text) {
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = trim(text.substr(start, end - start));
    std::string upper;
    for (char c : line.substr(0, 5)) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (upper == "EXPR:") return {Interpretation::Kind::expr, unwrap(line.substr(5))};
    if (upper == "RULE:") return {Interpretation::Kind::rule, unwrap(line.substr(5))};
    if (upper == "FAIL:") return {Interpretation::Kind::fail, trim(line.substr(5))};
    start = end + 1;
  }
  return {Interpretation::Kind::fail, "unrecognized interpreter reply"};
}

// Result of one attempt to produce a value for a step.
struct StepValue {
  enum class Kind { number, label, none } kind = Kind::none;
  Rational number;
  bool exact = true;
  std::string label;
};

struct Failure {
  StepStatus status;
  std::string detail;
};

class BlindRun {
 public:
  BlindRun(const std::vector<Choice>& choices, const ExecOptions& options) : choices_(choices), options_(options) {}

  VerificationOutcome run(const ExplanationSpec& spec) {
    VerificationOutcome out;
    out.problem_id = spec.problem_id;
    std::optional<Answer> selected;
    std::optional<Answer> terminal;
    bool failed = false;

    for (const auto& step : spec.steps) {
      ExecutionRecord rec;
      rec.step_index = step.index;
      if (step.opcode == Opcode::narrate) {
        rec.status = StepStatus::skipped_narrate;
        out.records.push_back(rec);
        continue;
      }
      tool_ = ToolUsed::none;
      std::variant<StepValue, Failure> result = execute(step);
      rec.tool = tool_;
      if (auto* f = std::get_if<Failure>(&result)) {
        rec.status = f->status;
        rec.detail = f->detail;
        out.records.push_back(rec);
        failed = true;
        break;
      }
      const StepValue& v = std::get<StepValue>(result);
      rec.status = StepStatus::executed;

      if (step.opcode == Opcode::select_answer) {
        auto answer = to_answer(v);
        if (!answer) {
          rec.status = StepStatus::tool_failed;
          rec.detail = answer_failure_;
          out.records.push_back(rec);
          failed = true;
          break;
        }
        selected = answer;
        rec.bound_output = std::make_pair(std::string("answer"), answer->canonical());
      } else if (step.output && step.opcode != Opcode::bind_given) {
        if (!bind(*step.output, v)) {
          rec.status = StepStatus::tool_failed;
          rec.detail = "variable '" + *step.output + "' is already bound";
          out.records.push_back(rec);
          failed = true;
          break;
        }
        rec.bound_output = std::make_pair(*step.output, render(v));
      } else if (step.output) {
        rec.bound_output = std::make_pair(*step.output, render(v));
      }
      if (step.opcode == Opcode::compute || step.opcode == Opcode::lookup_rule) {
        terminal = to_answer(v);
      } else if (step.opcode == Opcode::bind_given) {
        terminal.reset();
      }
      out.records.push_back(rec);
    }

    if (!failed) {
      if (selected) {
        out.predicted = selected;
      } else if (terminal) {
        out.predicted = terminal;
      }
    }
    out.executable = !failed && out.predicted.has_value();
    return out;
  }

 private:
  std::variant<StepValue, Failure> execute(const ReasoningStep& step) {
    switch (step.opcode) {
      case Opcode::bind_given:
        return bind_given(step);
      case Opcode::compute:
        return compute(step);
      case Opcode::lookup_rule:
        return lookup(step);
      case Opcode::select_answer:
        return select(step);
      case Opcode::narrate:
        break;
    }
    return Failure{StepStatus::tool_failed, "unexpected opcode"};
  }

  std::variant<StepValue, Failure> bind_given(const ReasoningStep& step) {
    tool_ = ToolUsed::calculator;
    if (!step.output) return Failure{StepStatus::tool_failed, "bind_given without output"};
    if (!step.expression) return Failure{StepStatus::tool_failed, "bind_given without a literal"};
    try {
      Expression e = Expression::parse(*step.expression);
      if (!e.is_literal()) return Failure{StepStatus::tool_failed, "bind_given value is not a literal"};
      StepValue v{StepValue::Kind::number, e.evaluate({}).value, true, {}};
      if (!bind(*step.output, v)) return Failure{StepStatus::tool_failed, "variable '" + *step.output + "' is already bound"};
      return v;
    } catch (const ExprParseError& e) {
      return Failure{StepStatus::tool_failed, std::string("bad literal: ") + e.what()};
    }
  }

  std::variant<StepValue, Failure> compute(const ReasoningStep& step) {
    if (step.expression) {
      auto r = calculate(*step.expression, ToolUsed::calculator);
      if (!std::holds_alternative<std::monostate>(r)) return unwrap_calc(r);
    }
    return interpret(step, /*want_label=*/false);
  }

  std::variant<StepValue, Failure> lookup(const ReasoningStep& step) {
    if (step.rule) {
      std::optional<RuleClause> clause;
      try {
        clause = parse_rule(*step.rule);
      } catch (const RuleError&) {
      }
      if (clause) {
        tool_ = ToolUsed::rule_matcher;
        try {
          MatchResult m = match_rule(*clause, env_, choices_);
          if (m.label) return StepValue{StepValue::Kind::label, {}, true, *m.label};
        } catch (const RuleError& e) {
          return Failure{StepStatus::tool_failed, e.what()};
        }
      }
    }
    return interpret(step, /*want_label=*/true);
  }

  std::variant<StepValue, Failure> select(const ReasoningStep& step) {
    if (step.rule) return lookup(step);
    if (step.expression) return compute(step);
    if (step.inputs.empty()) return interpret(step, !choices_.empty());
    const std::string& name = step.inputs.front();
    if (auto it = labels_.find(name); it != labels_.end()) return StepValue{StepValue::Kind::label, {}, true, it->second};
    if (const Rational* v = env_.find(name)) {
      return StepValue{StepValue::Kind::number, *v, !inexact_.count(name), {}};
    }
    return Failure{StepStatus::tool_failed, "unbound variable '" + name + "'"};
  }

  // monostate: the expression did not parse, so the caller may fall back.
  using Calc = std::variant<std::monostate, StepValue, Failure>;

  Calc calculate(const std::string& source, ToolUsed tool) {
    std::optional<Expression> e;
    try {
      e = Expression::parse(source);
    } catch (const ExprParseError&) {
      return std::monostate{};
    }
    tool_ = tool;
    try {
      EvalResult r = e->evaluate(env_);
      bool exact = r.exact;
      for (const auto& v : e->variables()) exact = exact && !inexact_.count(v);
      return StepValue{StepValue::Kind::number, r.value, exact, {}};
    } catch (const EvalError& err) {
      return Failure{StepStatus::tool_failed, std::string(to_string(err.code())) + ": " + err.what()};
    }
  }

  static std::variant<StepValue, Failure> unwrap_calc(const Calc& c) {
    if (auto* v = std::get_if<StepValue>(&c)) return *v;
    return std::get<Failure>(c);
  }

  std::variant<StepValue, Failure> interpret(const ReasoningStep& step, bool want_label) {
    tool_ = ToolUsed::provider_interpreter;
    if (!options_.interpreter) return Failure{StepStatus::interpreter_failed, "no interpreter configured"};
    ProviderRequest req;
    req.template_id = "execute.interpret";
    req.slots["step"] = trim(serialize_step(step));
    std::string bound;
    for (const auto& name : bound_names()) bound += (bound.empty() ? "" : ", ") + name;
    req.slots["bound"] = bound.empty() ? "(none)" : bound;
    req.temperature = options_.temperature;
    req.max_output = 256;
    Interpretation reply;
    try {
      reply = parse_interpretation(options_.interpreter->complete(req).text);
    } catch (const ProviderError& e) {
      return Failure{StepStatus::interpreter_failed, std::string("provider error: ") + e.what()};
    }
    switch (reply.kind) {
      case Interpretation::Kind::fail:
        return Failure{StepStatus::interpreter_failed, "interpreter declined: " + reply.body};
      case Interpretation::Kind::expr: {
        Calc c = calculate(reply.body, ToolUsed::provider_interpreter);
        tool_ = ToolUsed::provider_interpreter;
        if (std::holds_alternative<std::monostate>(c)) {
          return Failure{StepStatus::interpreter_failed, "interpreter expression does not parse: " + reply.body};
        }
        if (auto* f = std::get_if<Failure>(&c)) return Failure{StepStatus::interpreter_failed, f->detail};
        StepValue v = std::get<StepValue>(c);
        if (want_label && !choices_.empty()) {
          auto label = option_for(v.number);
          if (!label) return Failure{StepStatus::interpreter_failed, "no unique option equals " + to_string(v.number)};
          return StepValue{StepValue::Kind::label, {}, true, *label};
        }
        return v;
      }
      case Interpretation::Kind::rule: {
        if (!want_label) return Failure{StepStatus::interpreter_failed, "rule given for a numeric step"};
        try {
          MatchResult m = match_rule(parse_rule(reply.body), env_, choices_);
          if (m.label) return StepValue{StepValue::Kind::label, {}, true, *m.label};
          return Failure{StepStatus::interpreter_failed, m.ambiguous ? "rule still ambiguous" : "rule matches no option"};
        } catch (const RuleError& e) {
          return Failure{StepStatus::interpreter_failed, e.what()};
        }
      }
    }
    return Failure{StepStatus::interpreter_failed, "unreachable"};
  }

  std::optional<std::string> option_for(const Rational& value) const {
    std::optional<std::string> found;
    for (const auto& c : choices_) {
      auto parsed = parse_rational(c.text);
      if (parsed && *parsed == value) {
        if (found) return std::nullopt;
        found = c.label;
      }
    }
    return found;
  }

  std::optional<Answer> to_answer(const StepValue& v) {
    if (v.kind == StepValue::Kind::label) {
      if (!choices_.empty()) {
        const std::string label = canonical_choice_label(v.label);
        bool known = std::any_of(choices_.begin(), choices_.end(),
                                 [&](const Choice& c) { return canonical_choice_label(c.label) == label; });
        if (!known) {
          answer_failure_ = "label '" + v.label + "' is not an option";
          return std::nullopt;
        }
      }
      return Answer::choice(v.label);
    }
    if (v.kind == StepValue::Kind::number) {
      if (choices_.empty()) return Answer::numeric(v.number, !v.exact);
      auto label = option_for(v.number);
      if (!label) {
        answer_failure_ = "no unique option equals " + to_string(v.number);
        return std::nullopt;
      }
      return Answer::choice(*label);
    }
    answer_failure_ = "no value to select";
    return std::nullopt;
  }

  bool bind(const std::string& name, const StepValue& v) {
    if (env_.contains(name) || labels_.count(name)) return false;
    if (v.kind == StepValue::Kind::label) {
      labels_[name] = v.label;
      return true;
    }
    env_.bind(name, v.number);
    if (!v.exact) inexact_.insert(name);
    return true;
  }

  static std::string render(const StepValue& v) {
    return v.kind == StepValue::Kind::label ? v.label : to_string(v.number);
  }

  std::vector<std::string> bound_names() const {
    std::set<std::string> names;
    for (const auto& [n, v] : env_.values()) names.insert(n);
    for (const auto& [n, l] : labels_) names.insert(n);
    return {names.begin(), names.end()};
  }

  const std::vector<Choice>& choices_;
  const ExecOptions& options_;
  Environment env_;
  std::map<std::string, std::string> labels_;
  std::set<std::string> inexact_;
  ToolUsed tool_ = ToolUsed::none;
  std::string answer_failure_;
};

}  // namespace

VerificationOutcome blind_execute(const ExplanationSpec& spec, const std::vector<Choice>& choices,
                                  const ExecOptions& options) {
  return BlindRun(choices, options).run(spec);
}

std::vector<VerificationOutcome> verify_dataset(const std::vector<Problem>& problems,
                                                const std::vector<ExplanationSpec>& specs, const ExecOptions& options,
                                                int workers) {
  std::map<std::string, const ExplanationSpec*> by_id;
  for (const auto& s : specs) by_id.emplace(s.problem_id, &s);
  std::vector<VerificationOutcome> out(problems.size());
  parallel_for(problems.size(), workers, [&](size_t i) {
    const Problem& p = problems[i];
    auto it = by_id.find(p.id);
    VerificationOutcome o;
    if (it == by_id.end()) {
      o.problem_id = p.id;
    } else {
      o = blind_execute(*it->second, p.choices, options);
      o.problem_id = p.id;
    }
    o.gold = p.answer;
    o.correct = o.predicted && answer_matches_gold(*o.predicted, p.answer);
    out[i] = std::move(o);
  });
  return out;
}

json to_json(const VerificationOutcome& o) {
  json j;
  j["v"] = kSchemaVersion;
  j["problem_id"] = o.problem_id;
  j["predicted"] = o.predicted ? to_json(*o.predicted) : json(nullptr);
  j["executable"] = o.executable;
  j["blind"] = o.blind;
  json records = json::array();
  for (const auto& r : o.records) {
    json rj;
    rj["step"] = r.step_index;
    rj["status"] = std::string(to_string(r.status));
    rj["tool"] = std::string(to_string(r.tool));
    rj["output"] = r.bound_output ? json{{"name", r.bound_output->first}, {"value", r.bound_output->second}}
                                  : json(nullptr);
    if (!r.detail.empty()) rj["detail"] = r.detail;
    records.push_back(rj);
  }
  j["records"] = records;
  j["gold"] = o.gold ? to_json(*o.gold) : json(nullptr);
  j["correct"] = o.correct ? json(*o.correct) : json(nullptr);
  return j;
}

VerificationOutcome outcome_from_json(const json& j) {
  VerificationOutcome o;
  try {
    o.problem_id = j.at("problem_id").get<std::string>();
    if (!j.at("predicted").is_null()) o.predicted = answer_from_json(j.at("predicted"));
    o.executable = j.at("executable").get<bool>();
    o.blind = j.value("blind", true);
    for (const auto& rj : j.at("records")) {
      ExecutionRecord r;
      r.step_index = rj.at("step").get<int>();
      auto status = status_from_string(rj.at("status").get<std::string>());
      auto tool = tool_from_string(rj.value("tool", "none"));
      if (!status || !tool) throw DataError("unknown status or tool in outcome record");
      r.status = *status;
      r.tool = *tool;
      if (rj.contains("output") && !rj.at("output").is_null()) {
        r.bound_output = std::make_pair(rj.at("output").at("name").get<std::string>(),
                                        rj.at("output").at("value").get<std::string>());
      }
      r.detail = rj.value("detail", "");
      o.records.push_back(r);
    }
    if (j.contains("gold") && !j.at("gold").is_null()) o.gold = answer_from_json(j.at("gold"));
    if (j.contains("correct") && !j.at("correct").is_null()) o.correct = j.at("correct").get<bool>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed outcome: ") + e.what());
  }
  return o;
}

std::vector<VerificationOutcome> read_outcomes(const std::filesystem::path& path) {
  std::vector<VerificationOutcome> out;
  int n = 0;
  for (const auto& j : read_jsonl(path)) {
    ++n;
    try {
      out.push_back(outcome_from_json(j));
    } catch (const DataError& e) {
      throw DataError(path.string() + " record " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void check_counts(const E3Counts& c) {
  auto fail = [](const char* what) { throw DataError(std::string("inconsistent E3 counts: ") + what); };
  if (c.N < 0 || c.N_exec < 0 || c.N_orig < 0 || c.N_joint < 0 || c.N_rec < 0) fail("negative count");
  if (c.N_exec > c.N || c.N_orig > c.N) fail("count exceeds N");
  if (c.N_joint > std::min(c.N_exec, c.N_orig)) fail("N_joint > min(N_exec, N_orig)");
  if (c.N_rec > c.N_exec - c.N_joint) fail("N_rec > N_exec - N_joint");
  if (c.N_rec > c.N - c.N_orig) fail("N_rec > N - N_orig");
}

E3Metrics e3_from_counts(const E3Counts& c) {
  check_counts(c);
  E3Metrics m;
  if (c.N > 0) {
    m.EA = Rational(c.N_exec, c.N);
    m.OA = Rational(c.N_orig, c.N);
  }
  if (c.N_orig > 0) m.EC = Rational(c.N_joint, c.N_orig);
  if (c.N - c.N_orig > 0) m.ERR = Rational(c.N_rec, c.N - c.N_orig);
  return m;
}

std::pair<E3Counts, E3Metrics> score_e3(const std::vector<E3Item>& items) {
  E3Counts c;
  for (const auto& item : items) {
    const bool exec_ok = item.outcome.predicted && answer_matches_gold(*item.outcome.predicted, item.gold);
    ++c.N;
    c.N_exec += exec_ok;
    c.N_orig += item.original_correct;
    c.N_joint += exec_ok && item.original_correct;
    c.N_rec += exec_ok && !item.original_correct;
  }
  return {c, e3_from_counts(c)};
}

std::vector<E3Item> join_e3_inputs(const std::vector<VerificationOutcome>& outcomes,
                                   const std::vector<Trajectory>& originals) {
  std::map<std::string, const Trajectory*> by_id;
  for (const auto& t : originals) by_id.emplace(t.problem_id, &t);
  std::vector<E3Item> items;
  for (const auto& o : outcomes) {
    if (!o.gold) throw DataError("outcome for '" + o.problem_id + "' has no gold answer");
    E3Item item{o, false, *o.gold};
    if (auto it = by_id.find(o.problem_id); it != by_id.end()) {
      const Trajectory& t = *it->second;
      if (t.correct) {
        item.original_correct = *t.correct;
      } else if (t.predicted_answer) {
        item.original_correct = answer_matches_gold(*t.predicted_answer, *o.gold);
      }
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::string format_percent(const std::optional<Rational>& proportion) {
  if (!proportion) return "—";
  return to_fixed(*proportion * 100, 1);
}

json to_json(const E3Counts& c, const E3Metrics& m) {
  auto metric = [](const std::optional<Rational>& v) {
    if (!v) return json(nullptr);
    return json{{"exact", to_string(*v)}, {"percent", format_percent(v)}};
  };
  json j;
  j["v"] = kSchemaVersion;
  j["counts"] = {{"N", c.N}, {"N_exec", c.N_exec}, {"N_orig", c.N_orig}, {"N_joint", c.N_joint}, {"N_rec", c.N_rec}};
  j["metrics"] = {{"EA", metric(m.EA)}, {"OA", metric(m.OA)}, {"EC", metric(m.EC)}, {"ERR", metric(m.ERR)}};
  return j;
}

}  // namespace truex
