#include "simulated_model.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <stdexcept>

#include "truex/expression.hpp"
#include "truex/hash.hpp"
#include "truex/judge.hpp"
#include "truex/json_io.hpp"
#include "truex/step_format.hpp"

namespace corpus {

using namespace truex;

namespace {

std::vector<ClusterDef> make_clusters() {
  return {
      {"shopping",
       "Everyday purchase and quantity problems answered with a wrong total",
       0.08,
       {{"Irrelevant detail", "The statement contains a sentence unrelated to any quantity", "Comprehension", "Low",
         {"meanwhile"}, "Meanwhile, a neighbor is repainting the garden fence.", Placement::after_first, 0.45},
        {"Verbose framing", "A long preamble comes before the quantities", "Comprehension", "Medium",
         {"receipt is checked"}, "Before answering, note that the shop is busy and every receipt is checked twice.",
         Placement::prefix, 0.25},
        {"Unit reminder", "A closing remark restates the units", "Notation", "Low", {"same units"},
         "All amounts use the same units.", Placement::suffix, 0.05}}},
      {"travel",
       "Distance, pace and schedule problems answered with a wrong value",
       0.08,
       {{"Irrelevant detail", "The statement contains a sentence unrelated to any quantity", "Comprehension", "Low",
         {"meanwhile"}, "Meanwhile, a friend is planning a picnic by the lake.", Placement::after_first, 0.50},
        {"Nested time reference", "An earlier event is mentioned before the timeline of the question",
         "Temporal reasoning", "High", {"earlier that morning"},
         "Earlier that morning, the plan had already been changed once.", Placement::prefix, 0.40},
        {"Constant rate reminder", "A closing remark says the pace does not change", "Notation", "Low",
         {"stays constant"}, "The pace stays constant throughout.", Placement::suffix, 0.05}}},
  };
}

std::vector<FamilyDef> make_families() {
  using K = TaskKind;
  return {
      {"notebooks", "notebooks for", 0, K::numeric,
       {{"price", "A store sells notebooks for {} dollars each.",
         {"Read the price of one notebook", "Read the price of a notebook"}},
        {"qty", "Maya buys {} notebooks.", {"Read how many notebooks Maya buys", "Read how many notebooks Maya bought"}},
        {"bill", "She pays with a {} dollar bill.",
         {"Read the value of the bill she pays with", "Read the value of the bill she uses"}}},
       {{"cost", {"price", "qty"}, "price * qty",
         {"Multiply the notebook price by the number of notebooks",
          "Multiply the price per notebook by the number of notebooks"},
         "price + qty", "Add price to the notebook count"},
        {"change", {"bill", "cost"}, "bill - cost",
         {"Subtract the total cost from the bill", "Subtract the total cost from the bill value"}, "", ""}},
       "How much change does she get?", "change"},

      {"baskets", "baskets of", 0, K::numeric,
       {{"apples", "A farmer picks {} apples.", {"Note the apple harvest", "Note the apple harvest size"}},
        {"pears", "He also picks {} pears.", {"Record the pear count", "Record the pear count given"}},
        {"size", "He packs the fruit into baskets of {} fruits each.",
         {"Take the basket capacity", "Take the capacity of one basket"}}},
       {{"total", {"apples", "pears"}, "apples + pears",
         {"Add apples and pears for the total fruit", "Add apples and pears to get the total fruit"},
         "apples * pears", "Multiply apple harvest with pear count"},
        {"baskets", {"total", "size"}, "floor(total / size)",
         {"Divide the total fruit by the basket capacity and round down",
          "Divide total fruit by basket capacity and round down"},
         "", ""}},
       "How many full baskets does he fill?", "baskets"},

      {"savings", "every week", 0, K::numeric,
       {{"weekly", "Leo saves {} dollars every week.", {"Read the weekly saving amount", "Read the weekly amount saved"}},
        {"weeks", "He saves for {} weeks.", {"Read the number of saving weeks", "Read the number of weeks"}},
        {"spent", "Then he spends {} dollars on a game.", {"Read the price of the game", "Read the game price"}}},
       {{"saved", {"weekly", "weeks"}, "weekly * weeks",
         {"Multiply the weekly amount by the number of weeks", "Multiply weekly amount by number of weeks"},
         "weekly + weeks", "Add weekly figure plus week count"},
        {"left", {"saved", "spent"}, "saved - spent",
         {"Subtract the game price from the savings", "Subtract the game price from total savings"}, "", ""}},
       "How much money does he have left?", "left"},

      {"discount", "percent off", 0, K::numeric,
       {{"price", "A jacket costs {} dollars.", {"Read the original jacket price", "Read the jacket price"}},
        {"pct", "It is on sale for {} percent off.", {"Read the discount percentage", "Read the percentage discount"}}},
       {{"off", {"price", "pct"}, "price * percent(pct)",
         {"Work out how much is taken off", "Work out how much gets taken off"}, "price * pct",
         "Apply rate without scaling by hundred"},
        {"sale", {"price", "off"}, "price - off",
         {"Subtract the discount amount from the price", "Subtract the discount amount from the original price"}, "",
         ""}},
       "What is the sale price?", "sale"},

      {"tiles", "square meter", 0, K::numeric,
       {{"len", "A room is {} meters long.", {"Read the room length", "Read the length of the room"}},
        {"wid", "It is {} meters wide.", {"Note how wide it is", "Note how wide the room is"}},
        {"cost", "Tiles cost {} dollars per square meter.",
         {"Take the tile cost per square meter", "Take the tile cost for each square meter"}}},
       {{"area", {"len", "wid"}, "len * wid",
         {"Multiply length by width for the floor area", "Multiply length by width to get the floor area"},
         "len + wid", "Add up both sides"},
        {"total", {"area", "cost"}, "area * cost",
         {"Scale tile cost up to the whole room", "Scale the tile cost up to the whole room"}, "", ""}},
       "How much do the tiles cost in total?", "total"},

      {"pencils", "boxes of", 0, K::multiple_choice,
       {{"students", "A class has {} students.", {"Read the class size", "Read the size of the class"}},
        {"pens", "Each student needs {} pencils.",
         {"Read pencils needed per student", "Read the pencils needed per student"}},
        {"box", "Pencils come in boxes of {}.",
         {"Read how many pencils fit in a box", "Read how many pencils fit in one box"}}},
       {{"need", {"students", "pens"}, "students * pens",
         {"Multiply class size by pencils per student", "Multiply the class size by pencils per student"},
         "students + pens", "Add students to pencil demand"},
        {"boxes", {"need", "box"}, "ceil(need / box)",
         {"Divide the pencil total by box size and round up", "Divide pencil total by box size then round up"}, "",
         ""}},
       "How many boxes must the teacher buy?", "boxes"},

      {"train", "kilometers per hour", 1, K::numeric,
       {{"speed", "A train travels at {} kilometers per hour.", {"Read the train speed", "Read the speed of the train"}},
        {"hours", "It travels for {} hours.", {"Read the travel time in hours", "Read the travel time"}}},
       {{"dist", {"speed", "hours"}, "speed * hours",
         {"Multiply speed by travel time for the distance", "Multiply speed by time for the distance"},
         "speed + hours", "Add speed plus duration"}},
       "How far does it travel in kilometers?", "dist"},

      {"commute", "by bus", 1, K::numeric,
       {{"walk", "Ana walks {} kilometers to the station.", {"Read the walking distance", "Read the distance walked"}},
        {"bus", "She then rides {} kilometers by bus.", {"Note the bus leg", "Note the bus leg length"}}},
       {{"one_way", {"walk", "bus"}, "walk + bus",
         {"Add both legs for the one way trip", "Add both legs to get the one way trip"}, "walk * bus",
         "Multiply walking figure with bus leg"},
        {"total", {"one_way"}, "one_way * 2",
         {"Double it to cover the return", "Double it to include the return"}, "", ""}},
       "She makes the same trip back. How many kilometers does she travel in total?", "total"},

      {"meetings", "of the workday", 1, K::multiple_choice,
       {{"start", "A meeting starts at minute {} of the workday.",
         {"Read the meeting start minute", "Read the start minute of the meeting"}},
        {"len", "It lasts {} minutes.", {"Read how long the meeting lasts", "Read how long it lasts"}},
        {"gap", "A second meeting follows after a break of {} minutes.",
         {"Read the break length", "Read the length of the break"}}},
       {{"end", {"start", "len"}, "start + len",
         {"Add duration to the start for the end minute", "Add the duration to the start to get the end minute"},
         "start * len", "Multiply start with duration"},
        {"second", {"end", "gap"}, "end + gap",
         {"Add the break after the end", "Add the break after the first meeting ends"}, "", ""}},
       "At which minute does the second meeting start?", "second"},

      {"fuel", "liters of fuel", 1, K::numeric,
       {{"rate", "A car uses {} liters of fuel per hundred kilometers.",
         {"Read the fuel use per hundred kilometers", "Read fuel use per hundred kilometers"}},
        {"dist", "The trip is {} kilometers long.", {"Read the trip length", "Read the length of the trip"}}},
       {{"fuel", {"rate", "dist"}, "rate * dist / 100",
         {"Scale fuel use to the trip length", "Scale the fuel use to the trip length"}, "rate * dist",
         "Multiply rate with distance unscaled"}},
       "How many liters does the trip need?", "fuel"},

      {"reading", "pages a day", 1, K::multiple_choice,
       {{"ppd", "Sam reads {} pages a day.", {"Read the daily reading pace", "Read the daily pace"}},
        {"pages", "His book has {} pages.", {"Read the book length", "Read the length of the book"}},
        {"done", "He has already read {} pages.",
         {"Read the pages already finished", "Read pages already finished"}}},
       {{"rem", {"pages", "done"}, "pages - done",
         {"Subtract finished pages from the book length", "Subtract the finished pages from the book length"},
         "pages + done", "Add finished pages onto total"},
        {"days", {"rem", "ppd"}, "ceil(rem / ppd)",
         {"Divide remaining pages by the pace and round up", "Divide the remaining pages by the pace and round up"},
         "", ""}},
       "How many more days does he need to finish?", "days"},

      {"cyclist", "At the same speed", 1, K::numeric,
       {{"d", "A cyclist rides {} kilometers in the morning.",
         {"Read the morning ride distance", "Read the distance of the morning ride"}},
        {"t", "The ride takes {} hours.", {"Note how many hours it took", "Note how many hours the ride took"}},
        {"t2", "At the same speed, how far does she ride in {} hours?",
         {"Take the later duration", "Take the later duration given"}}},
       {{"speed", {"d", "t"}, "d / t",
         {"Divide distance by hours for the speed", "Divide the distance by hours for the speed"}, "d * t",
         "Multiply distance with hours"},
        {"far", {"speed", "t2"}, "speed * t2",
         {"Multiply the speed by the later duration", "Multiply speed by the later duration"}, "", ""}},
       "", "far"},
  };
}

const std::vector<std::string> kLookupDesc{"Pick the option equal to the result",
                                           "Pick the option equal to the computed result"};
const std::vector<std::string> kSelectNumeric{"Report the result", "Report the final result"};
const std::vector<std::string> kSelectChoice{"Report the chosen option", "Report the chosen option label"};
const std::string kNarrate = "Restate what the question asks";

// Uniform in [0, 1) from a string key.
double unit(const std::string& key) {
  const std::string h = sha256_hex(key);
  return static_cast<double>(std::stoull(h.substr(0, 13), nullptr, 16)) / 4503599627370496.0;  // 16^13
}

std::string replace_placeholder(const std::string& sentence, const std::string& value) {
  std::string s = sentence;
  s.replace(s.find("{}"), 2, value);
  return s;
}

std::string regex_escape(const std::string& s) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

double error_rate(const Instance& inst) {
  const ClusterDef& c = clusters()[inst.family->cluster];
  double ok = 1.0 - c.base_error;
  for (size_t i = 0; i < c.features.size(); ++i) {
    if (inst.features & (1u << i)) ok *= 1.0 - c.features[i].error_rate;
  }
  return 1.0 - ok;
}

Environment evaluate(const Instance& inst) {
  Environment env;
  for (size_t i = 0; i < inst.family->givens.size(); ++i) env.bind(inst.family->givens[i].name, inst.values[i]);
  for (const auto& c : inst.family->computes) env.bind(c.out, eval_expr(c.expr, env).value);
  return env;
}

std::string pick(const std::vector<std::string>& options, double u) {
  return options[std::min(options.size() - 1, static_cast<size_t>(u * static_cast<double>(options.size())))];
}

ReasoningStep make_step(Opcode op, std::vector<std::string> in, std::optional<std::string> out,
                        std::optional<std::string> expr, std::optional<std::string> rule, std::string desc) {
  ReasoningStep s;
  s.opcode = op;
  s.inputs = std::move(in);
  s.output = std::move(out);
  s.expression = std::move(expr);
  s.rule = std::move(rule);
  s.description = std::move(desc);
  return s;
}

// The procedure for an instance. `h` seeds paraphrase and ordering choices;
// an empty key gives the canonical reference procedure.
ExplanationSpec procedure(const Instance& inst, const std::string& h, bool mistake) {
  const FamilyDef& f = *inst.family;
  const bool canonical = h.empty();
  auto u = [&](const std::string& what) { return canonical ? 0.0 : unit(h + "|" + what); };
  std::vector<ReasoningStep> steps;
  if (!canonical && u("narrate") < 0.2) steps.push_back(make_step(Opcode::narrate, {}, {}, {}, {}, kNarrate));
  std::vector<size_t> order(f.givens.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (order.size() >= 2 && u("order") >= 0.65) std::swap(order[0], order[1]);
  for (size_t i : order) {
    const GivenDef& g = f.givens[i];
    steps.push_back(make_step(Opcode::bind_given, {}, g.name, to_string(inst.values[i]), {}, pick(g.desc, u(g.name))));
  }
  bool slipped = false;
  for (const auto& c : f.computes) {
    if (mistake && !slipped && !c.wrong_expr.empty()) {
      steps.push_back(make_step(Opcode::compute, c.in, c.out, c.wrong_expr, {}, c.wrong_desc));
      slipped = true;
    } else {
      steps.push_back(make_step(Opcode::compute, c.in, c.out, c.expr, {}, pick(c.desc, u(c.out))));
    }
  }
  if (f.kind == TaskKind::multiple_choice) {
    steps.push_back(make_step(Opcode::lookup_rule, {f.answer_var}, std::string("pick"), {},
                              "equals(" + f.answer_var + ", option)", pick(kLookupDesc, u("lookup"))));
    steps.push_back(make_step(Opcode::select_answer, {"pick"}, {}, {}, {}, pick(kSelectChoice, u("select"))));
  } else {
    steps.push_back(make_step(Opcode::select_answer, {f.answer_var}, {}, {}, {}, pick(kSelectNumeric, u("select"))));
  }
  ExplanationSpec spec;
  for (size_t i = 0; i < steps.size(); ++i) steps[i].index = static_cast<int>(i) + 1;
  spec.steps = std::move(steps);
  return spec;
}

std::string strip_prefix(std::string line) {
  while (!line.empty() && line.back() == '\n') line.pop_back();
  return line;
}

// ---- per-template responders -------------------------------------------

std::string respond_explain(const ProviderRequest& req) {
  const std::string statement = req.slots.at("problem");
  auto inst = parse_statement(statement);
  if (!inst) return "I could not follow this problem.";
  const auto sample = req.slots.count("sample") ? req.slots.at("sample") : "0";
  const std::string h = "explain|" + req.template_id + "|" + statement + "|" + sample;
  const bool mistake = unit(h + "|error") < error_rate(*inst);
  return serialize_spec(procedure(*inst, h, mistake));
}

std::string respond_solve(const ProviderRequest& req) {
  const std::string statement = req.slots.at("problem");
  auto inst = parse_statement(statement);
  if (!inst) return "I could not follow this problem.";
  const std::string h = "solve|" + statement + "|" + req.slots.at("sample");
  const bool wrong = unit(h + "|error") < 0.1 + 0.8 * error_rate(*inst);
  std::string out = "Collect the quantities stated in the problem.\nApply the operations in order.\n";
  if (inst->family->kind == TaskKind::multiple_choice) {
    const auto choices = choices_for(*inst);
    const Rational value = answer_value(*inst);
    size_t right = 0;
    for (size_t i = 0; i < choices.size(); ++i) {
      if (parse_rational(choices[i].text) == value) right = i;
    }
    out += "ANSWER: " + choices[wrong ? (right + 1) % choices.size() : right].label + "\n";
  } else {
    out += "ANSWER: " + to_string(answer_value(*inst) + (wrong ? 1 : 0)) + "\n";
  }
  return out;
}

std::string respond_perturb(const ProviderRequest& req) {
  auto inst = parse_statement(req.slots.at("problem"));
  if (!inst) return "{}";
  const int index = std::stoi(req.slots.at("index"));
  const int attempt = std::stoi(req.slots.at("attempt"));
  std::vector<size_t> variable;
  for (size_t i = 0; i < inst->values.size(); ++i) {
    if (is_integer(inst->values[i]) && inst->values[i] >= 5) variable.push_back(i);
  }
  if (variable.empty()) return "{}";
  static const int kPercent[] = {10, 15, 5, 20};
  const size_t which = variable[static_cast<size_t>(index - 1) % variable.size()];
  const Rational old = inst->values[which];
  Rational delta = floor_of(old * kPercent[(index - 1) % 4] / 100).convert_to<long>();
  if (delta < 1) delta = 1;
  Instance next = *inst;
  next.values[which] = index % 2 ? Rational(old + delta) : Rational(old - delta);

  json reply;
  reply["statement"] = render_statement(next);
  reply["bindings"] = json::object({{inst->family->givens[which].name, to_string(next.values[which])}});
  if (next.family->kind == TaskKind::multiple_choice) {
    json choices = json::array();
    std::string label;
    for (const auto& c : choices_for(next)) {
      choices.push_back({{"label", c.label}, {"text", c.text}});
      if (parse_rational(c.text) == answer_value(next)) label = c.label;
    }
    reply["choices"] = choices;
    reply["answer"] = label;
  } else {
    // One deliberately wrong claim exercises the regeneration path.
    const bool bad_claim = index == 2 && attempt == 1;
    reply["answer"] = to_string(answer_value(next) + (bad_claim ? 1 : 0));
  }
  return reply.dump();
}

std::string respond_discover(const ProviderRequest& req) {
  const std::string statement = first_line(req.slots.at("problem"));
  auto inst = parse_statement(statement);
  json candidates = json::array();
  if (inst) {
    const ClusterDef& c = clusters()[inst->family->cluster];
    for (size_t i = 0; i < c.features.size(); ++i) {
      if (!(inst->features & (1u << i))) continue;
      const FeatureDef& f = c.features[i];
      // Casing varies between replies; discovery merges by normalized name.
      const bool shout = unit("discover|" + statement + "|" + f.name) < 0.3;
      candidates.push_back({{"name", shout ? lower(f.name) : f.name},
                            {"description", f.description},
                            {"error_type", f.error_type},
                            {"complexity", f.complexity},
                            {"keywords", f.keywords}});
    }
  }
  return json{{"candidates", candidates}}.dump();
}

std::string respond_intervene(const ProviderRequest& req) {
  auto inst = parse_statement(first_line(req.slots.at("problem")));
  if (!inst) return R"({"infeasible": true})";
  const ClusterDef& c = clusters()[inst->family->cluster];
  for (size_t i = 0; i < c.features.size(); ++i) {
    if (lower(c.features[i].name) != lower(req.slots.at("mode"))) continue;
    Instance next = *inst;
    if (req.slots.at("action") == "inject") {
      next.features |= 1u << i;
    } else {
      next.features &= ~(1u << i);
    }
    return json{{"statement", render_statement(next)}, {"bindings", json::object()}}.dump();
  }
  return R"({"infeasible": true})";
}

std::string respond_detect(const ProviderRequest& req) {
  auto inst = parse_statement(first_line(req.slots.at("problem")));
  if (!inst) return "NO";
  const ClusterDef& c = clusters()[inst->family->cluster];
  for (size_t i = 0; i < c.features.size(); ++i) {
    if (lower(c.features[i].name) == lower(req.slots.at("mode"))) return (inst->features & (1u << i)) ? "YES" : "NO";
  }
  return "NO";
}

// Probability from how much of the trace follows high-weight graph nodes.
std::string respond_predict(const ProviderRequest& req) {
  static const std::regex node_re(R"(^S\d+ \(w=([0-9.]+)\): (.*)$)");
  static const std::regex step_re(R"(^\d+\. (.*)$)");
  std::vector<std::pair<double, std::string>> nodes;
  auto lines = [](const std::string& text) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start < text.size()) {
      size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      out.push_back(text.substr(start, end - start));
      start = end + 1;
    }
    return out;
  };
  std::smatch m;
  for (const auto& line : lines(req.slots.at("dag"))) {
    if (std::regex_match(line, m, node_re)) nodes.emplace_back(std::stod(m[1]), m[2]);
  }
  double sum = 0;
  int steps = 0;
  for (const auto& line : lines(req.slots.at("trace"))) {
    if (!std::regex_match(line, m, step_re)) continue;
    ++steps;
    double best = 0;
    for (const auto& [w, text] : nodes) {
      if (token_overlap(text, m[1].str()) >= 0.5) best = std::max(best, w);
    }
    sum += best;
  }
  const double p = 0.1 + 0.8 * (steps ? sum / steps : 0.0);
  char buf[64];
  std::snprintf(buf, sizeof buf, "PROBABILITY: %.3f", p);
  return buf;
}

}  // namespace

const std::vector<ClusterDef>& clusters() {
  static const std::vector<ClusterDef> all = make_clusters();
  return all;
}

const std::vector<FamilyDef>& families() {
  static const std::vector<FamilyDef> all = make_families();
  return all;
}

const FamilyDef& family(const std::string& id) {
  for (const auto& f : families()) {
    if (f.id == id) return f;
  }
  throw std::logic_error("unknown family " + id);
}

std::string render_statement(const Instance& inst) {
  const FamilyDef& f = *inst.family;
  const ClusterDef& c = clusters()[f.cluster];
  auto features_at = [&](Placement where) {
    std::vector<std::string> out;
    for (size_t i = 0; i < c.features.size(); ++i) {
      if ((inst.features & (1u << i)) && c.features[i].where == where) out.push_back(c.features[i].sentence);
    }
    return out;
  };
  std::vector<std::string> parts = features_at(Placement::prefix);
  for (size_t i = 0; i < f.givens.size(); ++i) {
    parts.push_back(replace_placeholder(f.givens[i].sentence, to_string(inst.values[i])));
    if (i == 0) {
      for (auto& s : features_at(Placement::after_first)) parts.push_back(s);
    }
  }
  if (!f.question.empty()) parts.push_back(f.question);
  for (auto& s : features_at(Placement::suffix)) parts.push_back(s);
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : " ") + p;
  return out;
}

std::optional<Instance> parse_statement(const std::string& statement) {
  for (const auto& f : families()) {
    if (statement.find(f.key) == std::string::npos) continue;
    Instance inst;
    inst.family = &f;
    for (const auto& g : f.givens) {
      std::string pattern = regex_escape(g.sentence);
      pattern.replace(pattern.find("\\{\\}"), 4, "([0-9]+(?:\\.[0-9]+)?)");
      std::smatch m;
      if (!std::regex_search(statement, m, std::regex(pattern))) return std::nullopt;
      inst.values.push_back(*parse_rational(m[1].str()));
    }
    const ClusterDef& c = clusters()[f.cluster];
    for (size_t i = 0; i < c.features.size(); ++i) {
      if (statement.find(c.features[i].sentence) != std::string::npos) inst.features |= 1u << i;
    }
    return inst;
  }
  return std::nullopt;
}

std::vector<std::string> reference_steps(const Instance& inst) {
  std::vector<std::string> lines;
  for (const auto& s : procedure(inst, "", false).steps) lines.push_back(strip_prefix(serialize_step(s)));
  return lines;
}

Rational answer_value(const Instance& inst) { return *evaluate(inst).find(inst.family->answer_var); }

std::vector<Choice> choices_for(const Instance& inst) {
  const Rational x = answer_value(inst);
  std::vector<Rational> values{x, x + 1, x + 2, x > 1 ? Rational(x - 1) : Rational(x + 3)};
  std::string key = inst.family->id;
  for (const auto& v : inst.values) key += "|" + to_string(v);
  const size_t shift = static_cast<size_t>(unit("choices|" + key) * 4.0) % 4;
  std::rotate(values.begin(), values.begin() + static_cast<long>(shift), values.end());
  std::vector<Choice> out;
  for (size_t i = 0; i < values.size(); ++i) out.push_back({std::string(1, static_cast<char>('A' + i)), to_string(values[i])});
  return out;
}

Problem make_problem(const std::string& id, const Instance& inst) {
  Problem p;
  p.id = id;
  p.statement = render_statement(inst);
  p.reference_steps = reference_steps(inst);
  p.task_kind = inst.family->kind;
  if (p.task_kind == TaskKind::multiple_choice) {
    p.choices = choices_for(inst);
    for (const auto& c : p.choices) {
      if (parse_rational(c.text) == answer_value(inst)) p.answer = Answer::choice(c.label);
    }
  } else {
    p.answer = Answer::numeric(answer_value(inst));
  }
  p.metadata["family"] = inst.family->id;
  p.metadata["cluster"] = clusters()[inst.family->cluster].id;
  return p;
}

std::string respond(const ProviderRequest& req) {
  const std::string& t = req.template_id;
  if (t.rfind("explain.", 0) == 0) return respond_explain(req);
  if (t == "solve.cot") return respond_solve(req);
  if (t == "perturb.generate") return respond_perturb(req);
  if (t == "failures.discover") return respond_discover(req);
  if (t == "failures.intervene") return respond_intervene(req);
  if (t == "failures.detect") return respond_detect(req);
  if (t == "predict.success") return respond_predict(req);
  if (t == "judge.equivalent") {
    return token_overlap(req.slots.at("first"), req.slots.at("second")) >= 0.5 ? "YES" : "NO";
  }
  if (t == "execute.interpret") return "FAIL: the step names no operation I can apply";
  throw ProviderError(ProviderError::Kind::template_missing, "simulated model has no behavior for " + t);
}

void check_catalog(double threshold) {
  for (const auto& f : families()) {
    std::vector<std::vector<std::string>> groups;
    std::vector<std::string> wrong;
    for (const auto& g : f.givens) groups.push_back(g.desc);
    for (const auto& c : f.computes) {
      groups.push_back(c.desc);
      if (!c.wrong_desc.empty()) wrong.push_back(c.wrong_desc);
    }
    groups.push_back(f.kind == TaskKind::multiple_choice ? kSelectChoice : kSelectNumeric);
    if (f.kind == TaskKind::multiple_choice) groups.push_back(kLookupDesc);
    groups.push_back({kNarrate});
    for (size_t a = 0; a < groups.size(); ++a) {
      for (const auto& x : groups[a]) {
        for (const auto& y : groups[a]) {
          if (token_overlap(x, y) < threshold) {
            throw std::logic_error(f.id + ": paraphrases do not merge: '" + x + "' / '" + y + "'");
          }
        }
        for (size_t b = a + 1; b < groups.size(); ++b) {
          for (const auto& y : groups[b]) {
            if (token_overlap(x, y) >= threshold) {
              throw std::logic_error(f.id + ": distinct steps merge: '" + x + "' / '" + y + "'");
            }
          }
        }
        for (const auto& w : wrong) {
          if (token_overlap(x, w) >= threshold) {
            throw std::logic_error(f.id + ": mistaken step merges with '" + x + "': '" + w + "'");
          }
        }
      }
    }
  }
}

}  // namespace corpus
