// Authors the bundled synthetic corpus: problems, explanation specs,
// original predictions, a run configuration, and the mock script that
// replays every provider reply the pipeline asks for.
//
//   true_make_corpus [--dir data/synthetic]
//
// Pass 1 bootstraps specs and originals from the simulated model, pass 2
// records a full pipeline run into the mock script, pass 3 replays the
// script through the mock provider and checks the report matches.

#include <unistd.h>

#include <iostream>

#include <CLI11.hpp>

#include "corpus/simulated_model.hpp"
#include "truex/config.hpp"
#include "truex/json_io.hpp"
#include "truex/pipeline.hpp"

namespace fs = std::filesystem;
using namespace truex;

namespace {

struct Member {
  std::string id;
  std::string family;
  std::vector<long> values;
  unsigned features;
};

const std::vector<Member> kMembers{
    {"shop-01", "notebooks", {4, 6, 50}, 0b001},  {"shop-02", "baskets", {38, 26, 8}, 0b010},
    {"shop-03", "savings", {15, 8, 45}, 0b011},    {"shop-04", "discount", {80, 25}, 0b000},
    {"shop-05", "tiles", {6, 4, 12}, 0b101},       {"shop-06", "pencils", {28, 3, 10}, 0b110},
    {"travel-01", "train", {90, 3}, 0b000},        {"travel-02", "commute", {3, 14}, 0b001},
    {"travel-03", "meetings", {120, 45, 15}, 0b011}, {"travel-04", "fuel", {7, 240}, 0b010},
    {"travel-05", "reading", {12, 300, 84}, 0b100}, {"travel-06", "cyclist", {36, 2, 5}, 0b001},
};

json make_config(bool with_specs) {
  json clusters = json::array();
  for (const auto& c : corpus::clusters()) {
    json members = json::array();
    for (const auto& m : kMembers) {
      if (corpus::clusters()[corpus::family(m.family).cluster].id == c.id) members.push_back(m.id);
    }
    clusters.push_back({{"id", c.id}, {"members", members}, {"pattern_summary", c.pattern_summary}});
  }
  json dataset{{"name", "synthetic-12"}, {"problems", "problems.jsonl"}};
  if (with_specs) {
    dataset["specs"] = "specs.jsonl";
    dataset["originals"] = "originals.jsonl";
  }
  return json{
      {"dataset", dataset},
      {"seed", 20240611},
      {"workers", 1},
      {"output_dir", "out"},
      {"providers", {{"default", {{"kind", "mock"}, {"script", "mock_script.json"}}}}},
      {"judge", {{"kind", "overlap"}, {"threshold", 0.5}}},
      {"verify", {{"strategy", "cot"}, {"interpreter", true}, {"temperature", 0.0}}},
      {"neighborhood",
       {{"anchors", {"shop-01", "travel-06"}},
        {"K", 5},
        {"regime", "mild"},
        {"kinds", {"parameter_variation"}},
        {"retry_budget", 3},
        {"temperature", 0.7},
        {"baseline_samples", 6},
        {"sample_temperature", 0.7}}},
      {"failures",
       {{"clusters", clusters},
        {"K_max", 3},
        {"detector", "keywords"},
        {"missing", "nearest_superset"},
        {"exact_threshold", 12},
        {"intervention_retries", 2}}},
      {"stability", {{"sizes", {5, 10, 20, 40}}, {"repeats", 1}, {"k", 3}, {"with_replacement", true}}},
      {"impact", {{"low", "0.2"}, {"high", "0.3"}}},
  };
}

void run_all(RunConfig config, const ProviderSet& providers, const fs::path& out,
             std::vector<std::string> stages = {}) {
  config.output_dir = out;
  PipelineOptions o;
  o.stages = std::move(stages);
  o.force = true;
  run_pipeline(config, providers, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"author the bundled synthetic corpus"};
  std::string dir = "data/synthetic";
  app.add_option("--dir", dir, "corpus directory");
  CLI11_PARSE(app, argc, argv);

  try {
    corpus::check_catalog(0.5);
    const fs::path root = fs::absolute(dir);
    fs::create_directories(root);

    std::vector<json> problems;
    for (const auto& m : kMembers) {
      corpus::Instance inst;
      inst.family = &corpus::family(m.family);
      for (long v : m.values) inst.values.push_back(Rational(v));
      inst.features = m.features;
      problems.push_back(to_json(corpus::make_problem(m.id, inst)));
    }
    write_file_atomic(root / "problems.jsonl", to_jsonl(problems));
    if (!fs::exists(root / "mock_script.json")) write_file_atomic(root / "mock_script.json", "{}\n");

    char work_template[] = "/tmp/truex-corpus-XXXXXX";
    if (!mkdtemp(work_template)) throw std::runtime_error("cannot create a work directory");
    const fs::path work(work_template);

    auto simulated = [] {
      auto model = std::make_shared<FunctionProvider>("simulated", corpus::respond);
      return std::make_shared<RecordingProvider>(model);
    };

    // Pass 1: specs and original predictions.
    write_file_atomic(root / "config.json", make_config(false).dump(2) + "\n");
    {
      ProviderSet set;
      set.roles["default"] = simulated();
      run_all(load_config(root / "config.json"), set, work / "bootstrap", {"verify"});
      fs::copy_file(work / "bootstrap/verify/specs.jsonl", root / "specs.jsonl", fs::copy_options::overwrite_existing);
      fs::copy_file(work / "bootstrap/verify/originals.jsonl", root / "originals.jsonl",
                    fs::copy_options::overwrite_existing);
    }

    // Pass 2: record every reply of a full run.
    write_file_atomic(root / "config.json", make_config(true).dump(2) + "\n");
    std::string recorded_report;
    {
      auto recorder = simulated();
      ProviderSet set;
      set.roles["default"] = recorder;
      run_all(load_config(root / "config.json"), set, work / "record");
      json script = json::object();
      for (const auto& [fp, text] : recorder->script()) script[fp] = text;
      write_file_atomic(root / "mock_script.json", script.dump(1) + "\n");
      recorded_report = read_text_file(work / "record/report/report.txt");
      std::cerr << "recorded " << script.size() << " replies\n";
    }

    // Pass 3: replay through the mock provider.
    const RunConfig config = load_config(root / "config.json");
    run_all(config, make_providers(config), work / "replay");
    const std::string replayed = read_text_file(work / "replay/report/report.txt");
    if (replayed != recorded_report) throw std::runtime_error("replayed report differs from the recorded run");
    write_file_atomic(root / "expected_report.txt", replayed);
    fs::remove_all(work);
    std::cout << replayed;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "make_corpus: " << e.what() << "\n";
    return 2;
  }
}
