#include "truex/neighborhood.hpp"

#include <set>

#include "truex/errors.hpp"
#include "truex/parallel.hpp"
#include "truex/step_format.hpp"

namespace truex {

std::string_view to_string(PerturbationKind k) {
  switch (k) {
    case PerturbationKind::parameter_variation:
      return "parameter_variation";
    case PerturbationKind::entity_substitution:
      return "entity_substitution";
    case PerturbationKind::condition_adjustment:
      return "condition_adjustment";
  }
  return "parameter_variation";
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::mild:
      return "mild";
    case Regime::moderate:
      return "moderate";
    case Regime::aggressive:
      return "aggressive";
  }
  return "mild";
}

std::optional<PerturbationKind> perturbation_kind_from_string(std::string_view s) {
  for (auto k : {PerturbationKind::parameter_variation, PerturbationKind::entity_substitution,
                 PerturbationKind::condition_adjustment}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::optional<Regime> regime_from_string(std::string_view s) {
  for (auto r : {Regime::mild, Regime::moderate, Regime::aggressive}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

std::optional<Rational> regime_bound(Regime r) {
  switch (r) {
    case Regime::mild:
      return Rational(1, 5);
    case Regime::moderate:
      return Rational(1, 2);
    case Regime::aggressive:
      return std::nullopt;
  }
  return std::nullopt;
}

std::vector<const Problem*> Neighborhood::instances() const {
  std::vector<const Problem*> out{&anchor};
  for (const auto& p : perturbed) out.push_back(&p);
  return out;
}

ExplanationSpec reference_spec(const Problem& problem) {
  std::string text;
  for (const auto& line : problem.reference_steps) text += line + "\n";
  ParseResult parsed = parse_spec(text);
  if (!parsed.spec) {
    const auto& d = parsed.diagnostics.front();
    throw DataError("problem '" + problem.id + "': reference steps: " + d.code + " at line " + std::to_string(d.line));
  }
  parsed.spec->problem_id = problem.id;
  return *parsed.spec;
}

namespace {

ExplanationSpec apply_overrides(const Problem& base, const std::map<std::string, Rational>& overrides,
                                std::string* why) {
  ExplanationSpec spec = reference_spec(base);
  std::set<std::string> used;
  for (auto& step : spec.steps) {
    if (step.opcode != Opcode::bind_given || !step.output) continue;
    if (auto it = overrides.find(*step.output); it != overrides.end()) {
      step.expression = to_string(it->second);
      used.insert(it->first);
    }
  }
  for (const auto& [name, value] : overrides) {
    if (!used.count(name)) {
      if (why) *why = "binding '" + name + "' is not a given of the reference procedure";
      throw DataError("unknown binding " + name);
    }
  }
  return spec;
}

}  // namespace

std::optional<Answer> relabel(const Problem& base, const std::map<std::string, Rational>& overrides,
                              const std::vector<Choice>& choices, std::string* why) {
  ExplanationSpec spec;
  try {
    spec = apply_overrides(base, overrides, why);
  } catch (const DataError& e) {
    if (why && why->empty()) *why = e.what();
    return std::nullopt;
  }
  VerificationOutcome out = blind_execute(spec, choices);
  if (!out.executable || !out.predicted) {
    if (why) {
      *why = "reference procedure did not execute";
      for (const auto& r : out.records) {
        if (r.status == StepStatus::tool_failed || r.status == StepStatus::interpreter_failed) {
          *why += " (step " + std::to_string(r.step_index) + ": " + r.detail + ")";
        }
      }
    }
    return std::nullopt;
  }
  return out.predicted;
}

std::vector<std::string> rewrite_reference(const Problem& base, const std::map<std::string, Rational>& overrides) {
  ExplanationSpec spec = apply_overrides(base, overrides, nullptr);
  std::vector<std::string> lines;
  for (const auto& step : spec.steps) {
    std::string line = serialize_step(step);
    while (!line.empty() && line.back() == '\n') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string render_choices(const std::vector<Choice>& choices) {
  std::string out;
  for (const auto& c : choices) out += c.label + ") " + c.text + "\n";
  return out;
}

namespace {

std::string reference_text(const Problem& p) {
  std::string out;
  for (const auto& line : p.reference_steps) out += line + "\n";
  return out;
}

struct Candidate {
  std::optional<Problem> problem;
  std::string rejection;
};

Candidate check_candidate(const Problem& anchor, const std::string& reply, PerturbationKind kind, Regime regime,
                          int index) {
  auto j = extract_json_object(reply);
  if (!j || !j->is_object()) return {std::nullopt, "reply is not a JSON object"};
  const std::string statement = j->value("statement", "");
  if (statement.empty()) return {std::nullopt, "missing statement"};
  if (statement == anchor.statement) return {std::nullopt, "statement unchanged"};

  std::map<std::string, Rational> overrides;
  try {
    if (j->contains("bindings") && !(*j)["bindings"].is_null()) {
      for (const auto& [name, value] : (*j)["bindings"].items()) overrides[name] = rational_from_json(value);
    }
  } catch (const DataError& e) {
    return {std::nullopt, std::string("bad binding: ") + e.what()};
  }

  std::vector<Choice> choices = anchor.choices;
  if (j->contains("choices") && (*j)["choices"].is_array()) {
    choices.clear();
    for (const auto& c : (*j)["choices"]) {
      choices.push_back({canonical_choice_label(c.value("label", "")), c.value("text", "")});
    }
  }

  // Regime bound on parameter changes.
  if (auto bound = regime_bound(regime)) {
    const ExplanationSpec ref = reference_spec(anchor);
    for (const auto& step : ref.steps) {
      if (step.opcode != Opcode::bind_given || !step.output || !step.expression) continue;
      auto it = overrides.find(*step.output);
      if (it == overrides.end()) continue;
      auto old_value = parse_rational(*step.expression);
      if (!old_value) continue;
      const Rational delta = abs_of(it->second - *old_value);
      if (*old_value == 0 ? delta != 0 : delta > *bound * abs_of(*old_value)) {
        return {std::nullopt, "change of '" + *step.output + "' exceeds the " + std::string(to_string(regime)) +
                                  " bound"};
      }
    }
  }

  std::string why;
  auto gold = relabel(anchor, overrides, choices, &why);
  if (!gold) return {std::nullopt, "relabel failed: " + why};

  if (j->contains("answer") && !(*j)["answer"].is_null()) {
    std::optional<Answer> claimed;
    try {
      const json& a = (*j)["answer"];
      claimed = (anchor.task_kind == TaskKind::multiple_choice && a.is_string()) ? Answer::choice(a.get<std::string>())
                                                                                   : answer_from_json(a);
    } catch (const DataError&) {
      return {std::nullopt, "unreadable claimed answer"};
    }
    if (!answer_matches_gold(*claimed, *gold)) {
      return {std::nullopt, "claimed answer " + claimed->canonical() + " disagrees with recomputed " + gold->canonical()};
    }
  }

  Problem p = anchor;
  p.id = anchor.id + "~p" + std::to_string(index);
  p.statement = statement;
  p.answer = *gold;
  p.choices = choices;
  p.reference_steps = rewrite_reference(anchor, overrides);
  p.metadata["anchor"] = anchor.id;
  p.metadata["perturbation"] = std::string(to_string(kind));
  p.metadata["regime"] = std::string(to_string(regime));
  auto issues = check_problem(p);
  if (!issues.empty()) return {std::nullopt, issues.front()};
  return {p, {}};
}

}  // namespace

Neighborhood generate_neighborhood(const Problem& anchor, Provider& generator, const NeighborhoodOptions& options) {
  Neighborhood n;
  n.anchor = anchor;
  n.regime = options.regime;
  if (anchor.reference_steps.empty()) throw DataError("anchor '" + anchor.id + "' has no reference steps");
  {
    std::string why;
    auto recomputed = relabel(anchor, {}, anchor.choices, &why);
    if (!recomputed) throw DataError("anchor '" + anchor.id + "': " + why);
    if (!answer_matches_gold(*recomputed, anchor.answer)) {
      n.warnings.push_back("anchor reference procedure yields " + recomputed->canonical() + ", gold is " +
                           anchor.answer.canonical());
    }
  }
  if (options.K <= 0) return n;
  const std::vector<PerturbationKind> kinds =
      options.kinds.empty() ? std::vector<PerturbationKind>{PerturbationKind::parameter_variation} : options.kinds;

  struct Slot {
    std::optional<Problem> problem;
    std::vector<std::string> warnings;
  };
  std::vector<Slot> slots(static_cast<size_t>(options.K));
  parallel_for(slots.size(), options.workers, [&](size_t i) {
    const int index = static_cast<int>(i) + 1;
    const PerturbationKind kind = kinds[i % kinds.size()];
    for (int attempt = 1; attempt <= std::max(1, options.retry_budget); ++attempt) {
      ProviderRequest req;
      req.template_id = "perturb.generate";
      req.slots = {{"problem", anchor.statement},       {"choices", render_choices(anchor.choices)},
                   {"reference", reference_text(anchor)}, {"kind", std::string(to_string(kind))},
                   {"regime", std::string(to_string(options.regime))}, {"index", std::to_string(index)},
                   {"attempt", std::to_string(attempt)}};
      req.temperature = options.temperature;
      req.seed = options.seed;
      Candidate c = check_candidate(anchor, generator.complete(req).text, kind, options.regime, index);
      if (c.problem) {
        slots[i].problem = std::move(c.problem);
        return;
      }
      slots[i].warnings.push_back("perturbation " + std::to_string(index) + " attempt " + std::to_string(attempt) +
                                  " rejected: " + c.rejection);
    }
    slots[i].warnings.push_back("perturbation " + std::to_string(index) + " dropped after " +
                                std::to_string(std::max(1, options.retry_budget)) + " attempts");
  });
  for (size_t i = 0; i < slots.size(); ++i) {
    for (auto& w : slots[i].warnings) n.warnings.push_back(std::move(w));
    if (slots[i].problem) {
      n.perturbed.push_back(std::move(*slots[i].problem));
      n.kinds.push_back(kinds[i % kinds.size()]);
    }
  }
  return n;
}

json to_json(const Neighborhood& n) {
  json j;
  j["v"] = kSchemaVersion;
  j["anchor"] = to_json(n.anchor);
  j["regime"] = std::string(to_string(n.regime));
  json items = json::array();
  for (size_t i = 0; i < n.perturbed.size(); ++i) {
    items.push_back({{"kind", std::string(to_string(n.kinds[i]))}, {"problem", to_json(n.perturbed[i])}});
  }
  j["perturbed"] = items;
  j["warnings"] = n.warnings;
  return j;
}

Neighborhood neighborhood_from_json(const json& j) {
  Neighborhood n;
  try {
    n.anchor = problem_from_json(j.at("anchor"));
    auto regime = regime_from_string(j.at("regime").get<std::string>());
    if (!regime) throw DataError("unknown regime");
    n.regime = *regime;
    for (const auto& item : j.at("perturbed")) {
      auto kind = perturbation_kind_from_string(item.at("kind").get<std::string>());
      if (!kind) throw DataError("unknown perturbation kind");
      n.kinds.push_back(*kind);
      n.perturbed.push_back(problem_from_json(item.at("problem")));
    }
    if (j.contains("warnings")) n.warnings = j.at("warnings").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed neighborhood: ") + e.what());
  }
  return n;
}

}  // namespace truex
