#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "truex/dag.hpp"
#include "truex/step_format.hpp"

using truex::AssessedTrajectory;
using truex::FeasibleRegionDag;
using truex::Rational;
using truex::StepAssessment;

namespace {

struct ExactJudge : truex::StepJudge {
  bool equivalent(const std::string& a, const std::string& b) override { return a == b; }
};

AssessedTrajectory traj(const std::string& id, const std::vector<std::string>& texts, int C = 1, long n = 1,
                        long size = 1) {
  AssessedTrajectory t{id, {}};
  int i = 0;
  for (const auto& s : texts) t.steps.push_back({id, ++i, s, C, n, size});
  return t;
}

std::vector<std::string> random_texts(std::mt19937& rng, int vocab, int max_len) {
  std::uniform_int_distribution<int> len(1, max_len), word(0, vocab - 1);
  std::vector<std::string> out;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) out.push_back("s" + std::to_string(word(rng)));
  return out;
}

truex::Problem problem_with_steps(const std::string& id, const std::vector<std::string>& steps) {
  truex::Problem p;
  p.id = id;
  p.statement = "statement " + id;
  p.answer = truex::Answer::numeric(Rational(1));
  p.reference_steps = steps;
  return p;
}

}  // namespace

TEST(StepAssessment, WeightExamples) {
  StepAssessment a{"q", 1, "x", 1, 7, 10};
  EXPECT_EQ(a.W(), Rational(7, 10));
  StepAssessment b{"q", 1, "x", 0, 9, 10};
  EXPECT_EQ(b.W(), Rational(0));
  StepAssessment c{"q", 1, "x", 1, 5, 8};
  EXPECT_EQ(c.W(), Rational(5, 8));
  EXPECT_EQ(truex::to_fixed(c.W(), 3), "0.625");
  StepAssessment empty{"q", 1, "x", 1, 0, 0};
  EXPECT_EQ(empty.R(), Rational(0));
}

TEST(BuildDag, PathHasOneNodePerStep) {
  ExactJudge judge;
  auto dag = truex::build_dag({traj("a", {"x", "y", "z"})}, judge);
  EXPECT_EQ(dag.nodes.size(), 3u);
  ASSERT_EQ(dag.edges.size(), 2u);
  EXPECT_EQ(dag.edges[0], (truex::DagEdge{1, 2, 1}));
  EXPECT_EQ(dag.anchor_id, "a");
  EXPECT_EQ(dag.nodes[2].rank, 3);
}

TEST(BuildDag, IdenticalTrajectoriesShareNodesAndCountEdges) {
  ExactJudge judge;
  auto dag = truex::build_dag({traj("a", {"x", "y"}), traj("b", {"x", "y"})}, judge);
  ASSERT_EQ(dag.nodes.size(), 2u);
  ASSERT_EQ(dag.edges.size(), 1u);
  EXPECT_EQ(dag.edges[0].count, 2);
  EXPECT_EQ(dag.nodes[0].members.size(), 2u);
}

TEST(BuildDag, DiamondFixture) {
  ExactJudge judge;
  auto dag = truex::build_dag({traj("a", {"read", "left", "finish"}), traj("b", {"read", "right", "finish"})}, judge);
  EXPECT_EQ(dag.nodes.size(), 4u);
  EXPECT_EQ(dag.edges.size(), 4u);
  EXPECT_TRUE(truex::is_acyclic(dag));
}

TEST(BuildDag, ReversedOrderDoesNotCloseCycle) {
  ExactJudge judge;
  auto dag = truex::build_dag({traj("a", {"x", "y"}), traj("b", {"y", "x"})}, judge);
  EXPECT_TRUE(truex::is_acyclic(dag));
  EXPECT_EQ(dag.nodes.size(), 3u);
}

TEST(BuildDag, RepeatedStepOpensNewNode) {
  ExactJudge judge;
  auto dag = truex::build_dag({traj("a", {"x", "x"})}, judge);
  EXPECT_EQ(dag.nodes.size(), 2u);
  EXPECT_TRUE(truex::is_acyclic(dag));
}

TEST(BuildDag, PooledWeight) {
  ExactJudge judge;
  auto dag = truex::build_dag({traj("a", {"x"}, 1, 3, 4), traj("b", {"x"}, 0, 1, 4)}, judge);
  ASSERT_EQ(dag.nodes.size(), 1u);
  EXPECT_EQ(dag.nodes[0].weight(), Rational(1, 2) * Rational(4, 8));
}

TEST(BuildDag, StaysAcyclicOverRandomSets) {
  std::mt19937 rng(7);
  ExactJudge judge;
  for (int set = 0; set < 500; ++set) {
    std::vector<AssessedTrajectory> trajectories;
    const int count = 1 + static_cast<int>(rng() % 8);
    FeasibleRegionDag dag;
    for (int t = 0; t < count; ++t) {
      trajectories.push_back(traj("t" + std::to_string(t), random_texts(rng, 6, 7)));
      dag = truex::build_dag(trajectories, judge);
      ASSERT_TRUE(truex::is_acyclic(dag)) << "set " << set << " after " << t + 1;
    }
    for (const auto& t : trajectories) {
      std::vector<std::string> texts;
      for (const auto& s : t.steps) texts.push_back(s.text);
      EXPECT_EQ(truex::coverage_fraction(dag, texts, judge), Rational(1));
    }
  }
}

TEST(BuildDag, CoverageIsMonotoneAsTrajectoriesAreAdded) {
  std::mt19937 rng(11);
  ExactJudge judge;
  for (int set = 0; set < 100; ++set) {
    const auto probe = random_texts(rng, 10, 8);
    std::vector<AssessedTrajectory> trajectories;
    Rational last = 0;
    for (int t = 0; t < 8; ++t) {
      trajectories.push_back(traj("t" + std::to_string(t), random_texts(rng, 10, 5)));
      const Rational now = *truex::coverage_fraction(truex::build_dag(trajectories, judge), probe, judge);
      EXPECT_GE(now, last);
      last = now;
    }
  }
}

TEST(BuildDag, JsonRoundTripAndDot) {
  ExactJudge judge;
  auto dag = truex::build_dag({traj("a", {"read", "left", "finish"}, 1, 5, 8), traj("b", {"read", "right"})}, judge);
  auto back = truex::dag_from_json(truex::to_json(dag));
  EXPECT_EQ(truex::to_json(back), truex::to_json(dag));
  const std::string dot = truex::to_dot(dag);
  EXPECT_NE(dot.find("n1 -> n2"), std::string::npos);
  EXPECT_NE(dot.find("W=0.625"), std::string::npos);
  EXPECT_THROW(truex::dag_from_json(truex::json{{"nodes", 3}}), truex::DataError);
}

TEST(AssessSteps, CorrectnessAndExecutionCounts) {
  ExactJudge judge;
  std::vector<truex::InstanceRun> runs(2);
  runs[0].problem = problem_with_steps("p0", {"STEP 1: compute; in=a; out=b; expr=\"a+1\"; desc=\"add one\""});
  runs[1].problem = problem_with_steps("p1", {"STEP 1: compute; in=a; out=b; expr=\"a+1\"; desc=\"add one\""});
  runs[0].steps = {{1, "add one", true}, {2, "guess", true}};
  runs[1].steps = {{1, "add one", false}};
  auto result = truex::assess_steps(runs, judge);
  ASSERT_EQ(result.trajectories.size(), 2u);
  const auto& first = result.trajectories[0].steps;
  EXPECT_EQ(first[0].C, 1);
  EXPECT_EQ(first[0].n_exec, 1);
  EXPECT_EQ(first[0].neighborhood_size, 2);
  EXPECT_EQ(first[1].C, 0);
  EXPECT_EQ(first[1].W(), Rational(0));
}

TEST(Coverage, LeaveOneOutAndReference) {
  ExactJudge judge;
  std::vector<truex::InstanceRun> runs(3);
  const std::vector<std::string> ref{"STEP 1: compute; in=a; out=b; expr=\"a+1\"; desc=\"x\""};
  for (int i = 0; i < 3; ++i) runs[i].problem = problem_with_steps("p" + std::to_string(i), ref);
  runs[0].steps = {{1, "x", true}};
  runs[1].steps = {{1, "x", true}, {2, "y", true}};
  runs[2].steps = {{1, "x", true}, {2, "z", true}};
  auto report = truex::neighborhood_coverage(runs, judge);
  ASSERT_TRUE(report.pret_match);
  // p1 and p2 each have one step only they produced.
  EXPECT_EQ(*report.pret_match, Rational(1, 2));
  EXPECT_EQ(*report.gt_match, Rational(1));
  EXPECT_EQ(report.dag_nodes, 3u);
}

TEST(Prediction, CrossEntropyValues) {
  EXPECT_NEAR(truex::cross_entropy(0.5, 1), 0.6931, 1e-4);
  EXPECT_NEAR(truex::cross_entropy(1.0, 1), 0.0, 1e-5);
  EXPECT_NEAR(truex::cross_entropy(0.2, 0), -std::log(0.8), 1e-12);
  EXPECT_NEAR(truex::cross_entropy(0.2, 0), 0.2231, 1e-4);
  EXPECT_NEAR(truex::cross_entropy(0.0, 1), -std::log(truex::kProbabilityEpsilon), 1e-9);
}

TEST(Prediction, ParseProbability) {
  EXPECT_EQ(truex::parse_probability("PROBABILITY: 0.7"), 0.7);
  EXPECT_EQ(truex::parse_probability("I think 0.25"), 0.25);
  EXPECT_EQ(truex::parse_probability("probability = 70%"), 0.7);
  EXPECT_FALSE(truex::parse_probability("PROBABILITY: 3"));
  EXPECT_FALSE(truex::parse_probability("no idea"));
}

TEST(Prediction, RetryOnceThenExclude) {
  std::vector<truex::InstanceRun> runs(2);
  runs[0].problem = problem_with_steps("ok", {});
  runs[0].outcome.correct = true;
  runs[1].problem = problem_with_steps("bad", {});
  int calls = 0;
  truex::FunctionProvider predictor("p", [&](const truex::ProviderRequest& r) {
    ++calls;
    if (r.slots.at("problem").find("bad") != std::string::npos) return std::string("unsure");
    return std::string("PROBABILITY: 0.5");
  });
  auto summary = truex::predict_success(runs, FeasibleRegionDag{}, predictor, {});
  EXPECT_EQ(calls, 3);
  EXPECT_FALSE(summary.records[0].excluded);
  EXPECT_TRUE(summary.records[1].excluded);
  ASSERT_TRUE(summary.mean_ce);
  EXPECT_NEAR(*summary.mean_ce, std::log(2.0), 1e-12);
}

TEST(Explain, RequestParsesAndExecutes) {
  truex::FunctionProvider gen("g", [](const truex::ProviderRequest& r) {
    EXPECT_EQ(r.template_id, "explain.cot");
    return std::string(
        "STEP 1: bind_given; out=a; expr=\"10\"; desc=\"read count\"\n"
        "STEP 2: narrate; desc=\"think\"\n"
        "STEP 3: compute; in=a; out=b; expr=\"a*2\"; desc=\"double it\"\n"
        "STEP 4: select_answer; in=b\n");
  });
  auto p = problem_with_steps("q", {});
  p.answer = truex::Answer::numeric(Rational(20));
  auto runs = truex::run_instances({&p}, gen, nullptr, {});
  ASSERT_EQ(runs.size(), 1u);
  EXPECT_EQ(runs[0].outcome.correct, true);
  ASSERT_EQ(runs[0].steps.size(), 3u);
  EXPECT_EQ(runs[0].steps[1].text, "double it");
  EXPECT_TRUE(runs[0].steps[1].executed);
  auto back = truex::instance_run_from_json(truex::to_json(runs[0]));
  EXPECT_EQ(back.steps, runs[0].steps);
}
