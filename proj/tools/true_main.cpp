// true: command-line front end for the truex library.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 provider error.

#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "truex/config.hpp"
#include "truex/errors.hpp"
#include "truex/executor.hpp"
#include "truex/expression.hpp"
#include "truex/failures.hpp"
#include "truex/json_io.hpp"
#include "truex/pipeline.hpp"
#include "truex/step_format.hpp"

namespace fs = std::filesystem;
using namespace truex;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitProvider = 3;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct StageArgs {
  std::string config;
  std::string out;
  bool force = false;
};

int run_stages(const StageArgs& args, std::vector<std::string> stages) {
  RunConfig config = load_config(args.config);
  if (!args.out.empty()) config.output_dir = fs::absolute(args.out);
  ProviderSet providers = make_providers(config);
  PipelineOptions options;
  options.stages = std::move(stages);
  options.force = args.force;
  options.log = &std::cerr;
  for (const auto& r : run_pipeline(config, providers, options)) {
    std::cout << r.stage << (r.skipped ? " skipped (unchanged)" : " done");
    for (const auto& o : r.outputs) std::cout << "\n  " << o;
    std::cout << "\n";
  }
  return kExitOk;
}

void add_stage_options(CLI::App* cmd, StageArgs& args) {
  cmd->add_option("-c,--config", args.config, "run configuration (JSON)")->required();
  cmd->add_option("-o,--out", args.out, "override the configured output directory");
  cmd->add_flag("-f,--force", args.force, "rerun even when inputs are unchanged");
}

int cmd_lint(const std::string& file, const std::string& problems, const std::string& id, bool as_json) {
  const std::string source = file == "-" ? std::string(std::istreambuf_iterator<char>(std::cin), {})
                                         : read_text_file(file);
  std::optional<Problem> problem;
  if (!problems.empty()) {
    if (id.empty()) throw DataError("--problems needs --id");
    for (auto& p : read_problems(problems)) {
      if (p.id == id) problem = std::move(p);
    }
    if (!problem) throw DataError("no problem '" + id + "' in " + problems);
  }
  const LintReport report = lint_source(source, problem ? &*problem : nullptr);
  if (as_json) {
    json list = json::array();
    for (const auto& d : report.diagnostics) {
      list.push_back({{"line", d.line},
                      {"column", d.column},
                      {"code", d.code},
                      {"severity", d.severity == Severity::error ? "error" : "warning"},
                      {"message", d.message}});
    }
    std::cout << list.dump(2) << "\n";
  } else {
    for (const auto& d : report.diagnostics) {
      std::cout << file << ":" << d.line << ":" << d.column << ": "
                << (d.severity == Severity::error ? "error" : "warning") << " [" << d.code << "] " << d.message
                << "\n";
    }
    if (report.diagnostics.empty()) std::cout << file << ": ok\n";
  }
  return report.has_errors() ? kExitData : kExitOk;
}

int cmd_calc(const std::string& expr, const std::vector<std::string>& bindings, int places) {
  Environment env;
  for (const auto& b : bindings) {
    const auto eq = b.find('=');
    if (eq == std::string::npos) throw DataError("binding must look like name=value: " + b);
    const auto value = parse_rational(b.substr(eq + 1));
    if (!value) throw DataError("not a number: " + b.substr(eq + 1));
    if (!env.bind(b.substr(0, eq), *value)) throw DataError("variable bound twice: " + b.substr(0, eq));
  }
  EvalResult r;
  try {
    r = eval_expr(expr, env);
  } catch (const ExprParseError& e) {
    throw DataError(std::string("parse error: ") + e.what());
  } catch (const EvalError& e) {
    throw DataError(std::string("evaluation error: ") + e.what());
  }
  std::cout << to_string(r.value);
  if (places >= 0) std::cout << " (" << to_fixed(r.value, places) << ")";
  if (!r.exact) std::cout << " [inexact]";
  std::cout << "\n";
  return kExitOk;
}

int cmd_e3_counts(const std::vector<long>& counts) {
  if (counts.size() != 5) throw DataError("--counts takes N,N_exec,N_orig,N_joint,N_rec");
  const E3Counts c{counts[0], counts[1], counts[2], counts[3], counts[4]};
  const E3Metrics m = e3_from_counts(c);
  std::cout << "EA " << format_percent(m.EA) << "\nOA " << format_percent(m.OA) << "\nEC " << format_percent(m.EC)
            << "\nERR " << format_percent(m.ERR) << "\n";
  return kExitOk;
}

// {"K": 2, "v": ["0.2", "0.5", ...]} with v indexed by coalition bitmask.
int cmd_shapley_table(const std::string& path, std::optional<long> permutations, uint64_t seed) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  if (!j.contains("K") || !j.contains("v")) throw DataError(path + ": needs K and v");
  const size_t K = j.at("K").get<size_t>();
  std::vector<Rational> values;
  for (const auto& x : j.at("v")) values.push_back(rational_from_json(x));
  const CharacteristicTable table = CharacteristicTable::from_values(K, values);
  ShapleyOptions options;
  options.permutations = permutations;
  options.seed = seed;
  const ShapleyResult r = shapley(table, options);
  for (size_t i = 0; i < K; ++i) {
    std::cout << "phi" << (i + 1) << " " << to_fixed(r.phi[i], 4) << "  (" << to_string(r.phi[i]) << ")\n";
  }
  return kExitOk;
}

int cmd_rank_compare(const std::string& a, const std::string& b) {
  const auto ra = split(a, ',');
  const auto rb = split(b, ',');
  std::cout << "jaccard " << to_fixed(jaccard(ra, rb), 4) << "\n";
  const auto tau = kendall_tau(ra, rb);
  std::cout << "kendall_tau " << (tau ? to_fixed(*tau, 4) : std::string("—")) << "\n";
  return kExitOk;
}

int cmd_report(const std::string& out, bool check, const std::string& format) {
  if (!fs::is_directory(out)) throw DataError("no output directory: " + out);
  if (check) {
    const auto problems = verify_chain(out);
    for (const auto& p : problems) std::cout << p << "\n";
    if (!problems.empty()) return kExitData;
    std::cout << "manifest chain verifies\n";
    return kExitOk;
  }
  const RenderedReport r = render_report(out);
  if (format == "json") {
    std::cout << r.data.dump(2) << "\n";
  } else if (format == "csv") {
    std::cout << r.stability_csv;
  } else {
    std::cout << r.text;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"true: trace verification, neighborhood DAGs and failure attribution"};
  app.require_subcommand(1);
  std::function<int()> action;

  std::string lint_file, lint_problems, lint_id;
  bool lint_json = false;
  auto* lint = app.add_subcommand("lint", "parse, validate and leak-check a step specification");
  lint->add_option("file", lint_file, "spec file, or - for stdin")->required();
  lint->add_option("--problems", lint_problems, "problems JSONL for leak checks");
  lint->add_option("--id", lint_id, "problem id inside --problems");
  lint->add_flag("--json", lint_json, "machine-readable diagnostics");
  lint->callback([&] { action = [&] { return cmd_lint(lint_file, lint_problems, lint_id, lint_json); }; });

  std::string calc_expr;
  std::vector<std::string> calc_let;
  int calc_places = -1;
  auto* calc = app.add_subcommand("calc", "evaluate an expression with exact rationals");
  calc->add_option("expr", calc_expr, "expression")->required();
  calc->add_option("--let", calc_let, "variable binding name=value (repeatable)");
  calc->add_option("--places", calc_places, "also print rounded to this many decimals");
  calc->callback([&] { action = [&] { return cmd_calc(calc_expr, calc_let, calc_places); }; });

  // Stage subcommands share the config-driven path.
  std::map<std::string, StageArgs> stage_args;
  const std::vector<std::pair<std::string, std::string>> stage_cmds{
      {"verify", "verify"},       {"perturb", "neighborhood"}, {"dag", "dag"},
      {"coverage", "coverage"},   {"predict", "predict"},      {"failures", "failures"}};
  for (const auto& [name, stage] : stage_cmds) {
    auto* cmd = app.add_subcommand(name, "run the " + stage + " stage");
    add_stage_options(cmd, stage_args[name]);
    cmd->callback([&, n = name, s = stage] { action = [&, n, s] { return run_stages(stage_args[n], {s}); }; });
  }

  StageArgs e3_args;
  std::vector<long> e3_counts;
  auto* e3 = app.add_subcommand("e3", "score executable explanations (from a run, or from raw counts)");
  e3->add_option("-c,--config", e3_args.config, "run configuration (JSON)");
  e3->add_option("-o,--out", e3_args.out, "override the configured output directory");
  e3->add_flag("-f,--force", e3_args.force, "rerun even when inputs are unchanged");
  e3->add_option("--counts", e3_counts, "N,N_exec,N_orig,N_joint,N_rec")->delimiter(',');
  e3->callback([&] {
    action = [&] {
      if (!e3_counts.empty()) return cmd_e3_counts(e3_counts);
      if (e3_args.config.empty()) throw CLI::RequiredError("--config or --counts");
      return run_stages(e3_args, {"e3"});
    };
  });

  StageArgs sh_args;
  std::string sh_table;
  std::optional<long> sh_permutations;
  uint64_t sh_seed = 0;
  auto* sh = app.add_subcommand("shapley", "attribute error rate to failure modes");
  sh->add_option("-c,--config", sh_args.config, "run configuration (JSON)");
  sh->add_option("-o,--out", sh_args.out, "override the configured output directory");
  sh->add_flag("-f,--force", sh_args.force, "rerun even when inputs are unchanged");
  sh->add_option("--table", sh_table, "characteristic table JSON {K, v}");
  sh->add_option("--permutations", sh_permutations, "sample this many permutations instead of enumerating");
  sh->add_option("--seed", sh_seed, "seed for permutation sampling");
  sh->callback([&] {
    action = [&] {
      if (!sh_table.empty()) return cmd_shapley_table(sh_table, sh_permutations, sh_seed);
      if (sh_args.config.empty()) throw CLI::RequiredError("--config or --table");
      return run_stages(sh_args, {"shapley"});
    };
  });

  StageArgs st_args;
  std::string st_a, st_b;
  auto* st = app.add_subcommand("stability", "subsampling stability of mode rankings");
  st->add_option("-c,--config", st_args.config, "run configuration (JSON)");
  st->add_option("-o,--out", st_args.out, "override the configured output directory");
  st->add_flag("-f,--force", st_args.force, "rerun even when inputs are unchanged");
  st->add_option("--compare", st_a, "first ranking, comma separated");
  st->add_option("--with", st_b, "second ranking, comma separated");
  st->callback([&] {
    action = [&] {
      if (!st_a.empty() || !st_b.empty()) return cmd_rank_compare(st_a, st_b);
      if (st_args.config.empty()) throw CLI::RequiredError("--config or --compare/--with");
      return run_stages(st_args, {"stability"});
    };
  });

  StageArgs run_args;
  std::string run_stage_list;
  auto* run = app.add_subcommand("run", "run the pipeline, skipping stages whose inputs are unchanged");
  add_stage_options(run, run_args);
  run->add_option("--stages", run_stage_list, "comma-separated subset (default: all)");
  run->callback([&] { action = [&] { return run_stages(run_args, split(run_stage_list, ',')); }; });

  std::string rep_out, rep_format = "text";
  bool rep_check = false;
  auto* rep = app.add_subcommand("report", "render the report from an output directory");
  rep->add_option("-o,--out", rep_out, "output directory of a run")->required();
  rep->add_option("--format", rep_format, "text, json or csv")->check(CLI::IsMember({"text", "json", "csv"}));
  rep->add_flag("--check", rep_check, "verify the manifest hash chain instead");
  rep->callback([&] { action = [&] { return cmd_report(rep_out, rep_check, rep_format); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ProviderError& e) {
    std::cerr << "provider error: " << e.what() << "\n";
    return kExitProvider;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
}
