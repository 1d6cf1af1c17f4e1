#include <gtest/gtest.h>
#include <unistd.h>

#include <fstream>

#include "truex/config.hpp"
#include "truex/errors.hpp"
#include "truex/json_io.hpp"
#include "truex/pipeline.hpp"

namespace fs = std::filesystem;
using truex::json;

namespace {

const fs::path kData = fs::path(TRUEX_SOURCE_DIR) / "data/synthetic";

class TempDir {
 public:
  TempDir() {
    std::string templ = (fs::temp_directory_path() / "truex-test-XXXXXX").string();
    if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
    path_ = templ;
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

json corpus_config() { return json::parse(truex::read_text_file(kData / "config.json")); }

truex::RunConfig config_into(const fs::path& out) {
  auto c = truex::load_config(kData / "config.json");
  c.output_dir = out;
  return c;
}

std::vector<truex::StageResult> run(const truex::RunConfig& c, std::vector<std::string> stages, bool force = false) {
  truex::PipelineOptions o;
  o.stages = std::move(stages);
  o.force = force;
  return truex::run_pipeline(c, truex::make_providers(c), o);
}

}  // namespace

TEST(Config, LoadsBundledCorpus) {
  auto c = truex::load_config(kData / "config.json");
  EXPECT_EQ(c.dataset_name, "synthetic-12");
  EXPECT_EQ(c.seed, 20240611u);
  EXPECT_EQ(c.anchors, (std::vector<std::string>{"shop-01", "travel-06"}));
  EXPECT_EQ(c.clusters.size(), 2u);
  EXPECT_TRUE(c.problems.is_absolute());
}

TEST(Config, RejectsUnknownKeys) {
  auto j = corpus_config();
  j["neighbourhood"] = json::object();
  EXPECT_THROW(truex::parse_config(j, kData), truex::DataError);
  j = corpus_config();
  j["neighborhood"]["radius"] = 2;
  try {
    truex::parse_config(j, kData);
    FAIL() << "accepted an unknown nested key";
  } catch (const truex::DataError& e) {
    EXPECT_NE(std::string(e.what()).find("neighborhood.radius"), std::string::npos) << e.what();
  }
}

TEST(Config, RequiresSeed) {
  auto j = corpus_config();
  j.erase("seed");
  EXPECT_THROW(truex::parse_config(j, kData), truex::DataError);
  j["seed"] = -4;
  EXPECT_THROW(truex::parse_config(j, kData), truex::DataError);
}

TEST(Config, RejectsBadValuesAndMissingFiles) {
  auto j = corpus_config();
  j["neighborhood"]["regime"] = "wild";
  EXPECT_THROW(truex::parse_config(j, kData), truex::DataError);
  j = corpus_config();
  j["dataset"]["problems"] = "nowhere.jsonl";
  EXPECT_THROW(truex::parse_config(j, kData), truex::DataError);
  j = corpus_config();
  j["impact"] = {{"low", "0.5"}, {"high", "0.3"}};
  EXPECT_THROW(truex::parse_config(j, kData), truex::DataError);
}

TEST(Pipeline, StageOrderAndDependencies) {
  const auto& order = truex::stage_order();
  ASSERT_FALSE(order.empty());
  EXPECT_EQ(order.front(), "verify");
  EXPECT_EQ(order.back(), "report");
  for (size_t i = 0; i < order.size(); ++i) {
    for (const auto& dep : truex::stage_dependencies(order[i])) {
      const auto at = std::find(order.begin(), order.end(), dep) - order.begin();
      EXPECT_LT(static_cast<size_t>(at), i) << order[i] << " depends on " << dep;
    }
  }
  EXPECT_THROW(truex::stage_dependencies("bake"), truex::DataError);
}

TEST(Pipeline, DownstreamStageWithoutArtifactNamesIt) {
  TempDir tmp;
  try {
    run(config_into(tmp.path()), {"e3"});
    FAIL() << "e3 ran without verify output";
  } catch (const truex::DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("verify"), std::string::npos) << msg;
  }
}

TEST(Pipeline, RerunWithUnchangedInputsSkips) {
  TempDir tmp;
  const auto c = config_into(tmp.path());
  auto first = run(c, {"verify", "e3"});
  ASSERT_EQ(first.size(), 2u);
  EXPECT_FALSE(first[0].skipped);
  EXPECT_FALSE(first[1].skipped);
  const std::string manifest = truex::read_text_file(truex::manifest_path(tmp.path(), "e3"));

  auto second = run(c, {"verify", "e3"});
  EXPECT_TRUE(second[0].skipped);
  EXPECT_TRUE(second[1].skipped);
  EXPECT_EQ(truex::read_text_file(truex::manifest_path(tmp.path(), "e3")), manifest);

  auto forced = run(c, {"e3"}, /*force=*/true);
  EXPECT_FALSE(forced[0].skipped);
}

TEST(Pipeline, TamperingIsDetected) {
  TempDir tmp;
  const auto c = config_into(tmp.path());
  run(c, {"verify", "e3"});
  EXPECT_TRUE(truex::verify_chain(tmp.path()).empty());

  std::ofstream(tmp.path() / "e3/e3.json", std::ios::app) << " ";
  const auto issues = truex::verify_chain(tmp.path());
  ASSERT_FALSE(issues.empty());
  EXPECT_NE(issues.front().find("e3"), std::string::npos) << issues.front();

  // A tampered artifact is not silently reused.
  auto again = run(c, {"e3"});
  EXPECT_FALSE(again[0].skipped);
  EXPECT_TRUE(truex::verify_chain(tmp.path()).empty());
}

TEST(Pipeline, ReportWithOnlyE3) {
  TempDir tmp;
  run(config_into(tmp.path()), {"verify", "e3"});
  const auto report = truex::render_report(tmp.path());
  const json& sections = report.data.at("sections");
  EXPECT_FALSE(sections.at("e3").is_null());
  for (const char* absent : {"dag", "coverage", "predict", "shapley", "stability"}) {
    EXPECT_TRUE(sections.at(absent).is_null()) << absent;
  }
  EXPECT_NE(report.text.find("counts: N=12"), std::string::npos) << report.text;
  EXPECT_NE(report.text.find("absent (no dag artifact)"), std::string::npos);
  EXPECT_EQ(report.stability_csv, "size,jaccard,kendall_tau\n");
}

TEST(Pipeline, ManifestHashCoversContent) {
  TempDir tmp;
  run(config_into(tmp.path()), {"verify"});
  auto m = truex::manifest_from_json(json::parse(truex::read_text_file(truex::manifest_path(tmp.path(), "verify"))));
  EXPECT_EQ(truex::compute_manifest_hash(m), m.manifest_hash);
  m.created = "1970-01-01T00:00:00Z";
  EXPECT_EQ(truex::compute_manifest_hash(m), m.manifest_hash);
  m.outputs.begin()->second = std::string(64, '0');
  EXPECT_NE(truex::compute_manifest_hash(m), m.manifest_hash);
}
