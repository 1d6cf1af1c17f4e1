#include <gtest/gtest.h>

#include "truex/executor.hpp"
#include "truex/step_format.hpp"

using truex::Answer;
using truex::E3Counts;
using truex::ExecOptions;
using truex::FunctionProvider;
using truex::Rational;
using truex::StepStatus;
using truex::ToolUsed;

namespace {

truex::ExplanationSpec spec_of(const std::string& text) {
  auto r = truex::parse_spec(text);
  EXPECT_TRUE(r.ok()) << text;
  return r.spec.value_or(truex::ExplanationSpec{});
}

struct ScriptedInterpreter {
  int calls = 0;
  std::vector<std::string> replies;
  std::vector<truex::ProviderRequest> seen;
  std::shared_ptr<FunctionProvider> provider() {
    return std::make_shared<FunctionProvider>("scripted", [this](const truex::ProviderRequest& r) {
      seen.push_back(r);
      const std::string reply = replies.at(std::min<size_t>(calls, replies.size() - 1));
      ++calls;
      return reply;
    });
  }
};

}  // namespace

TEST(BlindExecute, ArithmeticChain) {
  auto out = truex::blind_execute(spec_of("STEP 1: bind_given; out=a; expr=\"12\"\n"
                                          "STEP 2: compute; in=a; out=b; expr=\"a*2\"\n"
                                          "STEP 3: select_answer; in=b\n"),
                                  {});
  ASSERT_TRUE(out.predicted);
  EXPECT_EQ(*out.predicted, Answer::numeric(Rational(24)));
  EXPECT_TRUE(out.executable);
  EXPECT_TRUE(out.blind);
  ASSERT_EQ(out.records.size(), 3u);
  EXPECT_EQ(out.records[1].tool, ToolUsed::calculator);
  EXPECT_EQ(out.records[1].bound_output->second, "24");
}

TEST(BlindExecute, UnboundVariableHaltsWithToolFailure) {
  auto out = truex::blind_execute(spec_of("STEP 1: bind_given; out=a; expr=\"12\"\n"
                                          "STEP 2: compute; in=v; out=b; expr=\"v*2\"\n"
                                          "STEP 3: select_answer; in=b\n"),
                                  {});
  EXPECT_FALSE(out.executable);
  EXPECT_FALSE(out.predicted);
  ASSERT_EQ(out.records.size(), 2u);
  EXPECT_EQ(out.records[1].status, StepStatus::tool_failed);
}

TEST(BlindExecute, ToolErrorDoesNotFallBackToInterpreter) {
  ScriptedInterpreter interp{0, {"EXPR: 1"}, {}};
  auto provider = interp.provider();
  ExecOptions opts{provider.get()};
  auto out = truex::blind_execute(spec_of("STEP 1: bind_given; out=a; expr=\"0\"\n"
                                          "STEP 2: compute; in=a; out=b; expr=\"1/a\"\n"),
                                  {}, opts);
  EXPECT_FALSE(out.executable);
  EXPECT_EQ(out.records[1].status, StepStatus::tool_failed);
  EXPECT_EQ(interp.calls, 0);
}

TEST(BlindExecute, AmbiguousRuleConsultsInterpreterOnce) {
  const std::vector<truex::Choice> choices{{"A", "24"}, {"B", "24.0"}, {"C", "30"}};
  const std::string text =
      "STEP 1: bind_given; out=a; expr=\"12\"\n"
      "STEP 2: compute; in=a; out=b; expr=\"a*2\"\n"
      "STEP 3: lookup_rule; in=b; out=pick; rule=\"equals(b, option)\"\n"
      "STEP 4: select_answer; in=pick\n";

  ScriptedInterpreter resolves{0, {"RULE: contains(option, \".0\")"}, {}};
  auto p1 = resolves.provider();
  auto ok = truex::blind_execute(spec_of(text), choices, ExecOptions{p1.get()});
  EXPECT_EQ(resolves.calls, 1);
  EXPECT_TRUE(ok.executable);
  EXPECT_EQ(*ok.predicted, Answer::choice("B"));
  EXPECT_EQ(ok.records[2].tool, ToolUsed::provider_interpreter);
  // The interpreter sees the step and variable names, never values or the statement.
  EXPECT_EQ(resolves.seen[0].slots.at("bound"), "a, b");
  EXPECT_EQ(resolves.seen[0].template_id, "execute.interpret");

  ScriptedInterpreter still_ambiguous{0, {"RULE: greater(option, 20)"}, {}};
  auto p2 = still_ambiguous.provider();
  auto bad = truex::blind_execute(spec_of(text), choices, ExecOptions{p2.get()});
  EXPECT_EQ(still_ambiguous.calls, 1);
  EXPECT_FALSE(bad.executable);
  EXPECT_FALSE(bad.predicted);
  EXPECT_EQ(bad.records[2].status, StepStatus::interpreter_failed);
}

TEST(BlindExecute, StepWithoutExpressionGoesToInterpreter) {
  ScriptedInterpreter interp{0, {"Sure.\nEXPR: `price * qty`"}, {}};
  auto p = interp.provider();
  auto out = truex::blind_execute(spec_of("STEP 1: bind_given; out=price; expr=\"15\"\n"
                                          "STEP 2: bind_given; out=qty; expr=\"4\"\n"
                                          "STEP 3: compute; in=price,qty; out=total; desc=\"multiply them\"\n"
                                          "STEP 4: select_answer; in=total\n"),
                                  {}, ExecOptions{p.get()});
  EXPECT_TRUE(out.executable);
  EXPECT_EQ(*out.predicted, Answer::numeric(Rational(60)));
  EXPECT_EQ(out.records[2].tool, ToolUsed::provider_interpreter);
}

TEST(BlindExecute, InterpreterDeclineOrAbsenceFails) {
  const auto spec = spec_of("STEP 1: compute; out=x; desc=\"guess\"\n");
  auto none = truex::blind_execute(spec, {});
  EXPECT_EQ(none.records[0].status, StepStatus::interpreter_failed);
  ScriptedInterpreter interp{0, {"FAIL: not enough information"}, {}};
  auto p = interp.provider();
  auto declined = truex::blind_execute(spec, {}, ExecOptions{p.get()});
  EXPECT_EQ(declined.records[0].status, StepStatus::interpreter_failed);
  EXPECT_FALSE(declined.executable);
}

TEST(BlindExecute, NumericSelectionMapsToOption) {
  auto out = truex::blind_execute(spec_of("STEP 1: bind_given; out=d; expr=\"3\"\n"
                                          "STEP 2: compute; in=d; out=e; expr=\"d+4\"\n"
                                          "STEP 3: select_answer; in=e\n"),
                                  {{"A", "7"}, {"B", "9"}});
  EXPECT_EQ(*out.predicted, Answer::choice("A"));
  auto miss = truex::blind_execute(spec_of("STEP 1: bind_given; out=d; expr=\"3\"\n"
                                           "STEP 2: select_answer; in=d\n"),
                                   {{"A", "7"}, {"B", "9"}});
  EXPECT_FALSE(miss.executable);
}

TEST(BlindExecute, TerminalComputeWithoutSelect) {
  auto out = truex::blind_execute(spec_of("STEP 1: bind_given; out=a; expr=\"2.5\"\n"
                                          "STEP 2: compute; in=a; out=b; expr=\"a*4\"\n"
                                          "STEP 3: narrate; desc=\"done\"\n"),
                                  {});
  EXPECT_TRUE(out.executable);
  EXPECT_EQ(*out.predicted, Answer::numeric(Rational(10)));
  EXPECT_EQ(out.records[2].status, StepStatus::skipped_narrate);
}

TEST(BlindExecute, InexactnessPropagates) {
  auto out = truex::blind_execute(spec_of("STEP 1: bind_given; out=a; expr=\"2\"\n"
                                          "STEP 2: compute; in=a; out=r; expr=\"sqrt(a)\"\n"
                                          "STEP 3: compute; in=r; out=s; expr=\"r*r\"\n"
                                          "STEP 4: select_answer; in=s\n"),
                                  {});
  ASSERT_TRUE(out.predicted);
  EXPECT_TRUE(out.predicted->inexact());
  EXPECT_TRUE(truex::answer_matches_gold(*out.predicted, Answer::numeric(Rational(2))));
}

TEST(BlindExecute, DeterministicAcrossRuns) {
  const auto spec = spec_of("STEP 1: bind_given; out=a; expr=\"7\"\nSTEP 2: compute; in=a; out=b; expr=\"a/3\"\n");
  EXPECT_EQ(truex::to_json(truex::blind_execute(spec, {})).dump(), truex::to_json(truex::blind_execute(spec, {})).dump());
}

TEST(VerifyDataset, ScoresAgainstGoldInDatasetOrder) {
  std::vector<truex::Problem> problems(3);
  for (int i = 0; i < 3; ++i) {
    problems[i].id = "p" + std::to_string(i);
    problems[i].statement = "s";
    problems[i].answer = Answer::numeric(Rational(24));
  }
  auto s0 = spec_of("@problem p0\nSTEP 1: bind_given; out=a; expr=\"12\"\nSTEP 2: compute; in=a; out=b; expr=\"a*2\"\n");
  auto s2 = spec_of("@problem p2\nSTEP 1: bind_given; out=a; expr=\"12\"\nSTEP 2: compute; in=a; out=b; expr=\"a*3\"\n");
  auto outcomes = truex::verify_dataset(problems, {s2, s0}, {}, 3);
  ASSERT_EQ(outcomes.size(), 3u);
  EXPECT_EQ(outcomes[0].problem_id, "p0");
  EXPECT_TRUE(*outcomes[0].correct);
  EXPECT_FALSE(*outcomes[1].correct);
  EXPECT_TRUE(outcomes[1].records.empty());
  EXPECT_FALSE(*outcomes[2].correct);
  EXPECT_TRUE(outcomes[2].executable);
}

TEST(OutcomeJson, RoundTrip) {
  auto out = truex::blind_execute(spec_of("@problem q\nSTEP 1: bind_given; out=a; expr=\"1/3\"\n"
                                          "STEP 2: narrate; desc=\"x\"\nSTEP 3: compute; in=z; out=b; expr=\"z\"\n"),
                                  {});
  out.gold = Answer::numeric(Rational(1));
  out.correct = false;
  EXPECT_EQ(truex::outcome_from_json(truex::to_json(out)), out);
}

TEST(E3, TableRowsFromBackSolvedCounts) {
  struct Row {
    E3Counts c;
    const char* ea;
    const char* oa;
    const char* ec;
    const char* err;
  };
  const Row rows[] = {
      {{50, 44, 46, 44, 0}, "88.0", "92.0", "95.7", "0.0"},
      {{50, 27, 32, 24, 3}, "54.0", "64.0", "75.0", "16.7"},
      {{50, 31, 35, 26, 5}, "62.0", "70.0", "74.3", "33.3"},
  };
  for (const auto& r : rows) {
    auto m = truex::e3_from_counts(r.c);
    EXPECT_EQ(truex::format_percent(m.EA), r.ea);
    EXPECT_EQ(truex::format_percent(m.OA), r.oa);
    EXPECT_EQ(truex::format_percent(m.EC), r.ec);
    EXPECT_EQ(truex::format_percent(m.ERR), r.err);
    EXPECT_EQ(*m.EC * r.c.N_orig, Rational(r.c.N_joint));
    EXPECT_EQ(*m.ERR * (r.c.N - r.c.N_orig), Rational(r.c.N_rec));
  }
}

TEST(E3, EmptyInputIsAllUndefined) {
  auto [c, m] = truex::score_e3({});
  EXPECT_EQ(c.N, 0);
  EXPECT_FALSE(m.EA || m.OA || m.EC || m.ERR);
  EXPECT_EQ(truex::format_percent(m.EC), "—");
}

TEST(E3, UndefinedWhenDenominatorsVanish) {
  auto all_orig = truex::e3_from_counts({4, 2, 4, 2, 0});
  EXPECT_FALSE(all_orig.ERR);
  EXPECT_TRUE(all_orig.EC);
  auto none_orig = truex::e3_from_counts({4, 2, 0, 0, 2});
  EXPECT_FALSE(none_orig.EC);
}

TEST(E3, InconsistentCountsRejected) {
  EXPECT_THROW(truex::e3_from_counts({10, 3, 5, 4, 0}), truex::DataError);
  EXPECT_THROW(truex::e3_from_counts({10, 5, 5, 2, 4}), truex::DataError);
}

TEST(E3, ScoringFromOutcomes) {
  auto make = [](bool exec_ok) {
    truex::VerificationOutcome o;
    o.problem_id = "x";
    if (exec_ok) o.predicted = Answer::numeric(Rational(5));
    return o;
  };
  const Answer gold = Answer::numeric(Rational(5));
  std::vector<truex::E3Item> items{{make(true), true, gold}, {make(true), false, gold}, {make(false), true, gold},
                                   {make(false), false, gold}};
  auto [c, m] = truex::score_e3(items);
  EXPECT_EQ(c, (E3Counts{4, 2, 2, 1, 1}));
  EXPECT_EQ(*m.ERR, Rational(1, 2));
}

TEST(E3, MissingOriginalCountsAsIncorrect) {
  truex::VerificationOutcome o;
  o.problem_id = "a";
  o.gold = Answer::numeric(Rational(1));
  o.predicted = Answer::numeric(Rational(1));
  truex::Trajectory wrong;
  wrong.problem_id = "b";
  wrong.predicted_answer = Answer::numeric(Rational(2));
  auto o2 = o;
  o2.problem_id = "b";
  auto items = truex::join_e3_inputs({o, o2}, {wrong});
  EXPECT_FALSE(items[0].original_correct);
  EXPECT_FALSE(items[1].original_correct);
  auto [c, m] = truex::score_e3(items);
  EXPECT_EQ(c.N_rec, 2);
}
