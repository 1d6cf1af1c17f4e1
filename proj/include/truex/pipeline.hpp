#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "truex/config.hpp"

namespace truex {

// Dependency order; "report" reads whatever is present.
const std::vector<std::string>& stage_order();
const std::vector<std::string>& stage_dependencies(const std::string& stage);

struct Manifest {
  std::string stage;
  std::string input_hash;
  std::map<std::string, std::string> inputs;   // name -> sha256
  std::map<std::string, std::string> parents;  // upstream stage -> manifest hash
  std::map<std::string, std::string> outputs;  // path relative to the output dir -> sha256
  std::string tool_version;
  std::string created;  // UTC, informational; not hashed
  std::string manifest_hash;
};

json to_json(const Manifest& m);
Manifest manifest_from_json(const json& j);
// sha256 over the canonical manifest without `created` and `manifest_hash`.
std::string compute_manifest_hash(const Manifest& m);

std::filesystem::path manifest_path(const std::filesystem::path& out_dir, const std::string& stage);

// Recomputes every output hash and manifest hash and checks parent links.
// Returns one line per problem; empty means the chain verifies.
std::vector<std::string> verify_chain(const std::filesystem::path& out_dir);

struct StageResult {
  std::string stage;
  bool skipped = false;
  std::vector<std::string> outputs;
};

struct PipelineOptions {
  std::vector<std::string> stages;  // empty => all, in dependency order
  bool force = false;               // rerun even when inputs are unchanged
  std::ostream* log = nullptr;
};

// Runs the requested stages in dependency order. Upstream stages that are
// not requested must already have verified outputs, otherwise a DataError
// names the missing artifact. A failing stage stops the chain; earlier
// artifacts stay on disk.
std::vector<StageResult> run_pipeline(const RunConfig& config, const ProviderSet& providers,
                                      const PipelineOptions& options);

struct RenderedReport {
  std::string text;
  json data;
  std::string stability_csv;
};

// Assembles the report from artifacts under out_dir. Missing artifacts
// become "absent" sections.
RenderedReport render_report(const std::filesystem::path& out_dir);

}  // namespace truex
