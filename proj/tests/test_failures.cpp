#include <gtest/gtest.h>

#include <random>

#include "truex/failures.hpp"

using truex::CharacteristicTable;
using truex::FailureModeSet;
using truex::Mask;
using truex::Rational;

namespace {

struct ExactJudge : truex::StepJudge {
  bool equivalent(const std::string& a, const std::string& b) override { return a == b; }
};

truex::Problem arithmetic(const std::string& id, int given = 12) {
  truex::Problem p;
  p.id = id;
  p.statement = "A shirt costs " + std::to_string(given) + " dollars. What do two shirts cost?";
  p.answer = truex::Answer::numeric(Rational(given * 2));
  p.reference_steps = {"STEP 1: bind_given; out=a; expr=\"" + std::to_string(given) + "\"",
                       "STEP 2: compute; in=a; out=b; expr=\"a*2\"; desc=\"double the price\"",
                       "STEP 3: select_answer; in=b"};
  return p;
}

truex::InstanceRun run_of(const truex::Problem& p, bool correct) {
  truex::InstanceRun r;
  r.problem = p;
  r.outcome.problem_id = p.id;
  r.outcome.correct = correct;
  r.steps = {{1, "double the price", true}};
  return r;
}

std::string candidates(const std::vector<std::string>& names) {
  truex::json list = truex::json::array();
  for (const auto& n : names) {
    list.push_back({{"name", n}, {"description", "about " + n}, {"error_type", "Logic"}, {"complexity", "Low"},
                    {"keywords", {n}}});
  }
  return truex::json{{"candidates", list}}.dump();
}

FailureModeSet two_modes() {
  FailureModeSet s;
  s.modes = {{"f1", "percent context", "", "Calculation", "High", {"percent"}, 1},
             {"f2", "extra distractor", "", "Comprehension", "Low", {"meanwhile"}, 1}};
  return s;
}

CharacteristicTable random_table(std::mt19937& rng, size_t K) {
  std::vector<Rational> v(size_t{1} << K);
  for (auto& x : v) x = Rational(static_cast<long>(rng() % 1001), 1000);
  return CharacteristicTable::from_values(K, v);
}

Rational u_of(const CharacteristicTable& t, Mask m) { return Rational(1) - *t.v[m]; }

}  // namespace

TEST(Discovery, NoErrorsGivesEmptySet) {
  int calls = 0;
  truex::FunctionProvider p("p", [&](const truex::ProviderRequest&) {
    ++calls;
    return std::string("{}");
  });
  ExactJudge judge;
  auto set = truex::discover_failure_modes("c", {run_of(arithmetic("a"), true), run_of(arithmetic("b"), true)}, p,
                                           judge, {});
  EXPECT_EQ(set.size(), 0u);
  EXPECT_EQ(calls, 0);
  ASSERT_EQ(set.notices.size(), 1u);
}

TEST(Discovery, SevenCandidatesThreeMergesGiveFourModes) {
  // Replies per incorrect member; "unit slip" x2, "percent base" x2 and
  // "rounding" x2 collapse into one mode each.
  std::map<std::string, std::string> replies{
      {"a", candidates({"unit slip", "percent base", "rounding"})},
      {"b", candidates({"unit slip", "off by one"})},
      {"c", candidates({"Percent  Base", "rounding"})}};
  truex::FunctionProvider p("p", [&](const truex::ProviderRequest& r) {
    for (const auto& [id, text] : replies) {
      if (r.slots.at("problem").find("costs " + std::to_string(10 + id[0] - 'a')) != std::string::npos) return text;
    }
    return std::string("{}");
  });
  ExactJudge judge;
  std::vector<truex::InstanceRun> runs{run_of(arithmetic("a", 10), false), run_of(arithmetic("b", 11), false),
                                       run_of(arithmetic("c", 12), false), run_of(arithmetic("d", 13), true)};
  auto set = truex::discover_failure_modes("c1", runs, p, judge, {});
  EXPECT_EQ(set.candidates, 7u);
  ASSERT_EQ(set.size(), 4u);
  EXPECT_EQ(set.modes[0].name, "unit slip");
  EXPECT_EQ(set.modes[0].frequency, 2);
  EXPECT_EQ(set.modes[3].name, "off by one");
  EXPECT_EQ(set.modes[3].id, "f4");
  auto back = truex::failure_modes_from_json(truex::to_json(set));
  EXPECT_EQ(back.modes, set.modes);
}

TEST(Discovery, CapKeepsMostFrequent) {
  truex::FunctionProvider p("p", [&](const truex::ProviderRequest& r) {
    if (r.slots.at("problem").find("costs 10") != std::string::npos) return candidates({"m1", "m2", "m3", "m4", "m5", "m6"});
    return candidates({"m6"});
  });
  ExactJudge judge;
  auto set = truex::discover_failure_modes(
      "c", {run_of(arithmetic("a", 10), false), run_of(arithmetic("b", 11), false)}, p, judge, {});
  ASSERT_EQ(set.size(), 5u);
  EXPECT_EQ(set.modes[0].name, "m6");
  EXPECT_EQ(set.modes[4].name, "m4");
}

TEST(Detector, ProviderThenKeywordFallback) {
  const auto modes = two_modes();
  truex::FailureDetector offline;
  auto p = arithmetic("x");
  p.statement = "Meanwhile, a shirt costs 12 dollars.";
  EXPECT_EQ(offline.configuration(modes, p, ""), 2u);
  truex::FunctionProvider yes("p", [](const truex::ProviderRequest& r) {
    return std::string(r.slots.at("mode") == "percent context" ? "YES" : "maybe");
  });
  truex::FailureDetector online(&yes);
  EXPECT_EQ(online.configuration(modes, p, ""), 3u);
}

TEST(Intervene, EmptyPlanKeepsCluster) {
  truex::FunctionProvider p("p", [](const truex::ProviderRequest&) -> std::string { throw truex::DataError("no"); });
  auto out = truex::intervene({arithmetic("a"), arithmetic("b")}, {0, 1}, two_modes(), {}, p, {});
  ASSERT_EQ(out.variants.size(), 2u);
  EXPECT_TRUE(out.variants[0].original);
  EXPECT_EQ(out.variants[1].mask, 1u);
}

TEST(Intervene, InjectRelabelsThroughReferenceProcedure) {
  truex::FunctionProvider p("p", [](const truex::ProviderRequest& r) {
    EXPECT_EQ(r.slots.at("action"), "inject");
    return std::string(R"({"statement": "A shirt costs 12 dollars plus a 12.5% fee... priced 12.5.", "bindings": {"a": "12.5"}})");
  });
  auto out = truex::intervene({arithmetic("a")}, {0}, two_modes(), {{"a", 1}}, p, {});
  ASSERT_EQ(out.variants.size(), 2u) << (out.warnings.empty() ? "" : out.warnings[0]);
  const auto& v = out.variants[1];
  EXPECT_EQ(v.mask, 1u);
  EXPECT_EQ(v.problem.id, "a~m10");
  EXPECT_EQ(v.problem.answer, truex::Answer::numeric(Rational(25)));
  EXPECT_NE(v.problem.reference_steps[0].find("\"12.5\""), std::string::npos);
}

TEST(Intervene, RemoveTagsConfigurationAndComposes) {
  std::vector<std::string> actions;
  std::mutex mu;
  truex::FunctionProvider p("p", [&](const truex::ProviderRequest& r) {
    std::lock_guard<std::mutex> lock(mu);
    actions.push_back(r.slots.at("action") + " " + r.slots.at("mode"));
    return std::string(R"({"statement": "rewritten )" + std::to_string(actions.size()) + R"(", "bindings": {}})");
  });
  auto out = truex::intervene({arithmetic("a")}, {3}, two_modes(), {{"a", 1}}, p, {});
  ASSERT_EQ(out.variants.size(), 2u);
  EXPECT_EQ(out.variants[1].mask, 1u);
  EXPECT_EQ(out.variants[1].problem.metadata.at("interventions"), "remove:f2");
  EXPECT_EQ(actions, (std::vector<std::string>{"remove extra distractor"}));

  actions.clear();
  auto both = truex::intervene({arithmetic("a")}, {0}, two_modes(), {{"a", 3}}, p, {});
  ASSERT_EQ(both.variants.size(), 2u);
  EXPECT_EQ(actions, (std::vector<std::string>{"inject percent context", "inject extra distractor"}));
  EXPECT_EQ(both.variants[1].problem.statement, "rewritten 2");
}

TEST(Intervene, InfeasibleAndUnverifiableVariantsDropped) {
  truex::FunctionProvider p("p", [](const truex::ProviderRequest& r) {
    if (r.slots.at("mode") == "percent context") return std::string(R"({"infeasible": true})");
    return std::string(R"({"statement": "x", "bindings": {"nope": 3}})");
  });
  auto out = truex::intervene({arithmetic("a")}, {0}, two_modes(), {{"a", 1}, {"a", 2}}, p, {});
  EXPECT_EQ(out.variants.size(), 1u);
  EXPECT_EQ(out.warnings.size(), 4u);  // infeasible, 2 failed attempts, dropped
}

TEST(EstimateV, CountsPerConfiguration) {
  std::vector<truex::VariantEvaluation> evals;
  // K=2 fixture: 12 variants, 3 per coalition.
  const std::vector<std::vector<bool>> correct{{true, true, true}, {true, false, false}, {true, true, false},
                                               {false, false, false}};
  for (Mask m = 0; m < 4; ++m) {
    for (size_t i = 0; i < 3; ++i) evals.push_back({"v" + std::to_string(m) + std::to_string(i), m, correct[m][i]});
  }
  auto t = truex::estimate_v(evals, 2, truex::MissingPolicy::strict);
  EXPECT_EQ(*t.v[0], Rational(1));
  EXPECT_EQ(*t.v[1], Rational(1, 3));
  EXPECT_EQ(*t.v[2], Rational(2, 3));
  EXPECT_EQ(*t.v[3], Rational(0));

  std::vector<truex::VariantEvaluation> four{{"a", 0, true}, {"b", 0, true}, {"c", 0, true}, {"d", 0, false}};
  EXPECT_EQ(*truex::estimate_v(four, 0, truex::MissingPolicy::strict).v[0], Rational(3, 4));
}

TEST(EstimateV, MissingCoalitions) {
  std::vector<truex::VariantEvaluation> evals{{"a", 0, true}, {"b", 3, false}, {"c", 1, true}};
  try {
    truex::estimate_v(evals, 2, truex::MissingPolicy::strict);
    FAIL() << "expected CoverageError";
  } catch (const truex::CoverageError& e) {
    EXPECT_EQ(e.missing(), (std::vector<Mask>{2}));
  }
  auto t = truex::estimate_v(evals, 2, truex::MissingPolicy::nearest_superset);
  EXPECT_TRUE(t.imputed[2]);
  EXPECT_EQ(*t.v[2], Rational(0));
}

TEST(Shapley, SingleModeCollapses) {
  auto t = CharacteristicTable::from_values(1, {Rational(9, 10), Rational(3, 5)});
  auto r = truex::shapley(t);
  EXPECT_EQ(r.phi[0], Rational(3, 10));
  EXPECT_EQ(r.phi_raw[0], Rational(-3, 10));
}

TEST(Shapley, TwoModeWorkedExample) {
  auto t = CharacteristicTable::from_values(2, {Rational(9, 10), Rational(6, 10), Rational(8, 10), Rational(4, 10)});
  auto r = truex::shapley(t);
  EXPECT_EQ(r.phi[0], Rational(35, 100));
  EXPECT_EQ(r.phi[1], Rational(15, 100));
  EXPECT_EQ(r.phi[0] + r.phi[1], Rational(1, 2));
}

TEST(Shapley, AxiomsOnRandomTables) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const size_t K = 1 + trial % 8;
    auto t = random_table(rng, K);
    const Mask full = static_cast<Mask>((1u << K) - 1);

    auto r = truex::shapley(t);
    Rational sum = 0;
    for (const auto& phi : r.phi) sum += phi;
    EXPECT_EQ(sum, u_of(t, full) - u_of(t, 0)) << "efficiency, K=" << K;

    // Dummy: make the last mode irrelevant.
    auto dummy = t;
    const Mask d = 1u << (K - 1);
    for (Mask m = 0; m <= full; ++m) dummy.v[m] = t.v[m & ~d];
    EXPECT_EQ(truex::shapley(dummy).phi[K - 1], Rational(0)) << "dummy, K=" << K;

    if (K >= 2) {
      // Symmetry: v depends on modes 0 and 1 only through how many are present.
      auto sym = t;
      for (Mask m = 0; m <= full; ++m) {
        Mask c = m;
        if ((m & 3u) == 2u) c = (m & ~3u) | 1u;
        sym.v[m] = t.v[c];
      }
      auto rs = truex::shapley(sym);
      EXPECT_EQ(rs.phi[0], rs.phi[1]) << "symmetry, K=" << K;
    }
  }
}

TEST(Shapley, SampledConvergesToExact) {
  std::mt19937 rng(5);
  auto t = random_table(rng, 8);
  auto exact = truex::shapley(t);
  truex::ShapleyOptions opts;
  opts.permutations = 20000;
  opts.seed = 2024;
  auto sampled = truex::shapley(t, opts);
  EXPECT_EQ(sampled.mode, truex::ShapleyMode::sampled);
  for (size_t i = 0; i < 8; ++i) {
    EXPECT_LE(truex::to_double(truex::abs_of(sampled.phi[i] - exact.phi[i])), 0.02) << i;
  }
  EXPECT_EQ(truex::shapley(t, opts).phi, sampled.phi);
}

TEST(Shapley, ThresholdAndCoverageErrors) {
  std::mt19937 rng(1);
  truex::ShapleyOptions opts;
  opts.exact_threshold = 3;
  EXPECT_THROW(truex::shapley(random_table(rng, 4), opts), truex::DataError);
  opts.permutations = 10;
  EXPECT_NO_THROW(truex::shapley(random_table(rng, 4), opts));
  auto t = random_table(rng, 2);
  t.v[3].reset();
  EXPECT_THROW(truex::shapley(t), truex::CoverageError);
}

TEST(Shapley, ImpactLabelsAndTable) {
  EXPECT_EQ(truex::impact_label(Rational(35, 100)), "High");
  EXPECT_EQ(truex::impact_label(Rational(29, 100)), "Med.");
  EXPECT_EQ(truex::impact_label(Rational(21, 100)), "Med.");
  EXPECT_EQ(truex::impact_label(Rational(17, 100)), "Low");
  EXPECT_EQ(truex::impact_label(Rational(2, 100)), "Low");

  auto t = CharacteristicTable::from_values(2, {Rational(9, 10), Rational(6, 10), Rational(8, 10), Rational(4, 10)});
  auto r = truex::shapley(t);
  const auto modes = two_modes();
  const std::string table = truex::render_attribution_table(modes, r);
  EXPECT_NE(table.find("Failure Mode"), std::string::npos);
  EXPECT_NE(table.find("| 0.35        | High"), std::string::npos) << table;
  EXPECT_EQ(truex::rank_modes(modes, r), (std::vector<std::string>{"percent context", "extra distractor"}));
  EXPECT_EQ(truex::to_json(r, modes)["modes"][1]["phi_exact"], "0.15");
}

TEST(Stability, JaccardExamples) {
  EXPECT_EQ(truex::jaccard({"a", "b", "c"}, {"b", "c", "d"}), Rational(1, 2));
  EXPECT_EQ(truex::jaccard({"a", "b", "c"}, {"c", "a", "b"}), Rational(1));
  EXPECT_EQ(truex::jaccard({"a"}, {"b"}), truex::jaccard({"b"}, {"a"}));
}

TEST(Stability, KendallTauExamples) {
  EXPECT_EQ(truex::kendall_tau({"1", "2", "3"}, {"1", "3", "2"}), Rational(1, 3));
  for (int k : {3, 5, 10}) {
    std::vector<std::string> r;
    for (int i = 0; i < k; ++i) r.push_back("m" + std::to_string(i));
    std::vector<std::string> rev(r.rbegin(), r.rend());
    EXPECT_EQ(truex::kendall_tau(r, r), Rational(1)) << k;
    EXPECT_EQ(truex::kendall_tau(r, rev), Rational(-1)) << k;
  }
  EXPECT_FALSE(truex::kendall_tau({"a", "b"}, {"a", "c"}));
}

TEST(Stability, SeededSubsamplingIsReproducible) {
  const std::vector<std::string> full{"x", "y", "z", "w"};
  auto rank = [&](const std::vector<size_t>& members, uint64_t) {
    // Small subsamples swap the top two modes.
    if (members.size() <= 5) return std::vector<std::string>{"y", "x", "z"};
    return full;
  };
  truex::StabilityOptions opts;
  opts.sizes = {5, 10, 20, 40};
  opts.repeats = 2;
  opts.seed = 17;
  auto a = truex::stability(12, full, rank, opts);
  EXPECT_EQ(a.rows.size(), 4u);
  EXPECT_EQ(a.rows[0].samples, 2u);
  EXPECT_EQ(*a.rows[0].mean_tau, Rational(1, 3));
  EXPECT_EQ(*a.rows[1].mean_jaccard, Rational(1));
  EXPECT_EQ(a.rows[2].samples, 0u);  // 20 > 12 without replacement
  EXPECT_EQ(truex::to_json(a).dump(), truex::to_json(truex::stability(12, full, rank, opts)).dump());
  opts.with_replacement = true;
  auto b = truex::stability(12, full, rank, opts);
  EXPECT_EQ(b.rows[3].samples, 2u);
  EXPECT_EQ(b.samples.back().members.size(), 40u);
  const std::string csv = truex::stability_csv(b);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "size,jaccard,kendall_tau");
  EXPECT_NE(csv.find("5,1.0000,0.3333"), std::string::npos);
}
