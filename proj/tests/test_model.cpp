#include <gtest/gtest.h>

#include "truex/errors.hpp"
#include "truex/json_io.hpp"
#include "truex/model.hpp"
#include "truex/step_format.hpp"

using truex::Answer;
using truex::ExplanationSpec;
using truex::Rational;
using truex::ToleranceMode;

namespace {

ExplanationSpec spec_of(const char* text) {
  auto parsed = truex::parse_spec(text);
  EXPECT_TRUE(parsed.ok()) << text;
  return parsed.spec.value_or(ExplanationSpec{});
}

std::vector<std::string> violation_ids(const ExplanationSpec& spec) {
  std::vector<std::string> ids;
  for (const auto& v : truex::validate_spec(spec)) ids.push_back(v.id());
  return ids;
}

}  // namespace

TEST(ValidateSpec, WellFormedFourStepSpecHasNoViolations) {
  auto spec = spec_of(
      "STEP 1: bind_given; out=price; expr=\"15\"\n"
      "STEP 2: bind_given; out=qty; expr=\"4\"\n"
      "STEP 3: compute; in=price,qty; out=total; expr=\"price*qty\"\n"
      "STEP 4: select_answer; in=total\n");
  EXPECT_TRUE(truex::validate_spec(spec).empty());
}

TEST(ValidateSpec, UnboundVariableNamesTheStep) {
  auto spec = spec_of(
      "STEP 1: bind_given; out=a; expr=\"12\"\n"
      "STEP 2: compute; in=a; out=b; expr=\"a*2\"\n"
      "STEP 3: compute; in=c; out=d; expr=\"c+b\"\n"
      "STEP 4: select_answer; in=d\n");
  EXPECT_EQ(violation_ids(spec), (std::vector<std::string>{"unbound-variable@3"}));
}

TEST(ValidateSpec, BindOnlySpecHasNoFinalAnswer) {
  auto spec = spec_of("STEP 1: bind_given; out=a; expr=\"12\"\n");
  EXPECT_EQ(violation_ids(spec), (std::vector<std::string>{"no-final-answer"}));
}

TEST(ValidateSpec, StructuralRules) {
  auto spec = spec_of(
      "STEP 1: bind_given; out=a; expr=\"a0\"\n"
      "STEP 2: compute; in=a; out=a; expr=\"a+\"\n"
      "STEP 3: select_answer; in=a\n"
      "STEP 4: compute; in=a; expr=\"a\"\n");
  auto ids = violation_ids(spec);
  for (const char* want : {"non-literal-given@1", "bad-expression@2", "duplicate-output@2", "select-not-last@3",
                           "missing-output@4"}) {
    EXPECT_NE(std::find(ids.begin(), ids.end(), want), ids.end()) << want;
  }
}

TEST(ValidateSpec, DeterministicAndSorted) {
  auto spec = spec_of(
      "STEP 1: compute; in=z; out=y; expr=\"z\"\n"
      "STEP 2: lookup_rule; in=q; rule=\"equals(q, option)\"\n"
      "STEP 3: select_answer; in=y\n");
  auto a = truex::validate_spec(spec);
  auto b = truex::validate_spec(spec);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
}

TEST(AnswersEqual, Examples) {
  EXPECT_TRUE(truex::answers_equal(Answer::numeric(Rational(14)), Answer::numeric(Rational(14)), Rational(0)));
  EXPECT_TRUE(truex::answers_equal(Answer::numeric(*truex::parse_rational("0.333333")), Answer::numeric(Rational(1, 3)),
                                   Rational(1, 10000)));
  EXPECT_TRUE(truex::answers_equal(Answer::choice("B"), Answer::choice("b"), Rational(0)));
  EXPECT_FALSE(truex::answers_equal(Answer::numeric(*truex::parse_rational("0.333333")),
                                    Answer::numeric(Rational(1, 3)), Rational(0)));
}

TEST(AnswersEqual, KindMismatchIsAComparisonError) {
  EXPECT_THROW(truex::answers_equal(Answer::choice("A"), Answer::numeric(Rational(1)), Rational(0)),
               truex::ComparisonError);
  EXPECT_FALSE(truex::answer_matches_gold(Answer::choice("A"), Answer::numeric(Rational(1))));
}

TEST(AnswersEqual, RelativeModeScalesWithMagnitude) {
  const Answer big = Answer::numeric(Rational(1000000));
  const Answer near = Answer::numeric(Rational(1000000) + Rational(1, 2));
  EXPECT_TRUE(truex::answers_equal(near, big, truex::default_tolerance(), ToleranceMode::relative));
  EXPECT_FALSE(truex::answers_equal(near, big, truex::default_tolerance(), ToleranceMode::absolute));
}

TEST(AnswersEqual, InexactOperandsGetDefaultTolerance) {
  const Answer approx = Answer::numeric(*truex::parse_rational("1.41421356237309504880"), true);
  const Answer close = Answer::numeric(*truex::parse_rational("1.4142136"));
  EXPECT_TRUE(truex::answers_equal(approx, close, Rational(0)));
}

TEST(AnswersEqual, EquivalenceAtZeroTolerance) {
  const std::vector<Answer> pool{Answer::numeric(Rational(1, 2)), Answer::numeric(*truex::parse_rational("0.5")),
                                 Answer::numeric(Rational(2, 4)), Answer::numeric(Rational(3)),
                                 Answer::choice("c"), Answer::choice(" (C) ")};
  auto eq = [](const Answer& a, const Answer& b) {
    return a.kind() == b.kind() && truex::answers_equal(a, b, Rational(0));
  };
  for (const auto& a : pool) {
    EXPECT_TRUE(eq(a, a));
    for (const auto& b : pool) {
      EXPECT_EQ(eq(a, b), eq(b, a));
      for (const auto& c : pool) {
        if (eq(a, b) && eq(b, c)) EXPECT_TRUE(eq(a, c));
      }
    }
  }
}

TEST(Problem, Invariants) {
  truex::Problem p;
  p.id = "q1";
  p.statement = "pick";
  p.task_kind = truex::TaskKind::multiple_choice;
  p.answer = Answer::choice("A");
  p.choices = {{"A", "1"}};
  EXPECT_FALSE(truex::check_problem(p).empty());
  p.choices.push_back({"A", "2"});
  EXPECT_FALSE(truex::check_problem(p).empty());
  p.choices.back().label = "B";
  EXPECT_TRUE(truex::check_problem(p).empty());
  p.answer = Answer::numeric(Rational(1));
  EXPECT_FALSE(truex::check_problem(p).empty());
  p.id.clear();
  EXPECT_FALSE(truex::check_problem(p).empty());
}

TEST(JsonIo, ProblemRoundTrip) {
  truex::Problem p;
  p.id = "gsm-1";
  p.statement = "Apples cost $15 each. How much do 4 cost?";
  p.answer = Answer::numeric(Rational(60));
  p.reference_steps = {"STEP 1: bind_given; out=price; expr=\"15\""};
  p.metadata = {{"dataset", "synthetic"}};
  auto back = truex::problem_from_json(truex::to_json(p));
  EXPECT_EQ(back, p);
  EXPECT_EQ(truex::to_json(p)["v"], 1);
}

TEST(JsonIo, ChoiceTaskReadsBareLabel) {
  auto j = truex::json::parse(
      R"({"id":"m1","statement":"s","task_kind":"multiple_choice","answer":"b",)"
      R"("choices":[{"label":"a","text":"x"},{"label":"b","text":"y"}]})");
  auto p = truex::problem_from_json(j);
  EXPECT_EQ(p.answer, Answer::choice("B"));
  EXPECT_EQ(p.choices[0].label, "A");
}

TEST(JsonIo, MalformedProblemIsADataError) {
  EXPECT_THROW(truex::problem_from_json(truex::json::parse(R"({"id":"x"})")), truex::DataError);
  EXPECT_THROW(truex::problem_from_json(truex::json::parse(R"({"id":"x","statement":"s","answer":"1","v":2})")),
               truex::DataError);
}

TEST(JsonIo, SpecFromTextAndStructuredFormsAgree) {
  const char* text = "STEP 1: bind_given; out=a; expr=\"12\"\nSTEP 2: compute; in=a; out=b; expr=\"a*2\"\n";
  auto from_text = truex::spec_from_json({{"problem_id", "p"}, {"text", text}});
  auto from_struct = truex::spec_from_json(truex::to_json(from_text));
  EXPECT_EQ(from_text, from_struct);
  EXPECT_EQ(from_struct.problem_id, "p");
}
