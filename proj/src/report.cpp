#include <cctype>
#include <cstdio>
#include <map>

#include "truex/errors.hpp"
#include "truex/json_io.hpp"
#include "truex/pipeline.hpp"

namespace truex {

namespace fs = std::filesystem;

namespace {

using Row = std::vector<std::string>;

// Display width in code points, so "—" pads like one character.
size_t display_width(const std::string& s) {
  size_t n = 0;
  for (unsigned char ch : s) n += (ch & 0xC0) != 0x80;
  return n;
}

std::string table(const std::vector<Row>& rows) {
  std::vector<size_t> width;
  for (const auto& row : rows) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
  }
  std::string out;
  for (size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (size_t c = 0; c < rows[r].size(); ++c) {
      std::string cell = rows[r][c];
      cell.append(width[c] - display_width(cell), ' ');
      line += (c ? " | " : "") + cell;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (r == 0) {
      std::string rule;
      for (size_t c = 0; c < width.size(); ++c) rule += (c ? "-+-" : "") + std::string(width[c], '-');
      out += rule + "\n";
    }
  }
  return out;
}

std::optional<json> load(const fs::path& p) {
  if (!fs::exists(p)) return std::nullopt;
  try {
    return json::parse(read_text_file(p));
  } catch (const json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

std::string str(const json& j) {
  if (j.is_null()) return "—";
  if (j.is_string()) return j.get<std::string>();
  return j.dump();
}

std::string fixed4(const json& j) {
  if (!j.is_number()) return "—";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", j.get<double>());
  return buf;
}

std::string heading(const std::string& title) { return "\n" + title + "\n" + std::string(title.size(), '=') + "\n"; }

std::vector<std::string> index_of(const fs::path& out, const std::string& stage, const char* key) {
  auto idx = load(out / stage / "index.json");
  if (!idx) return {};
  return idx->at(key).get<std::vector<std::string>>();
}

std::string safe_name(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
  return out.empty() ? "_" : out;
}

}  // namespace

RenderedReport render_report(const fs::path& out) {
  RenderedReport r;
  json sections = json::object();
  std::string text;

  // Executable explanation evaluation.
  auto e3 = load(out / "e3/e3.json");
  const std::string dataset = e3 ? e3->value("dataset", "dataset") : "dataset";
  text += "TRUE report\n";
  text += heading("Executable explanation evaluation (E3)");
  if (e3) {
    const json& m = e3->at("metrics");
    auto pct = [&](const char* k) { return m.at(k).is_null() ? std::string("—") : m.at(k).at("percent").get<std::string>(); };
    text += table({{"Dataset", "Strategy", "EA", "OA", "EC", "ERR"},
                   {dataset, e3->value("strategy", ""), pct("EA"), pct("OA"), pct("EC"), pct("ERR")}});
    const json& c = e3->at("counts");
    text += "counts: N=" + c.at("N").dump() + " N_exec=" + c.at("N_exec").dump() + " N_orig=" + c.at("N_orig").dump() +
            " N_joint=" + c.at("N_joint").dump() + " N_rec=" + c.at("N_rec").dump() + "\n";
    sections["e3"] = *e3;
  } else {
    text += "absent (no e3 artifact)\n";
    sections["e3"] = nullptr;
  }

  // Feasible-region DAGs.
  text += heading("Feasible-region DAGs");
  const auto dag_anchors = index_of(out, "dag", "anchors");
  if (dag_anchors.empty()) {
    text += "absent (no dag artifact)\n";
    sections["dag"] = nullptr;
  } else {
    std::vector<Row> rows{{"Anchor", "Nodes", "Edges", "Acyclic"}};
    json list = json::array();
    std::string detail;
    for (const auto& id : dag_anchors) {
      auto d = load(out / ("dag/" + safe_name(id) + ".json"));
      if (!d) continue;
      const json& dag = d->at("dag");
      rows.push_back({id, std::to_string(dag.at("nodes").size()), std::to_string(dag.at("edges").size()),
                      d->value("acyclic", false) ? "yes" : "no"});
      detail += "\nNode weights, anchor " + id + ":\n";
      std::vector<Row> nodes{{"Node", "Rank", "Members", "W", "Step"}};
      json node_list = json::array();
      for (const auto& n : dag.at("nodes")) {
        nodes.push_back({"S" + n.at("id").dump(), n.at("rank").dump(), std::to_string(n.at("members").size()),
                         n.at("weight_3dp").get<std::string>(), n.at("canonical").get<std::string>()});
        node_list.push_back({{"id", n.at("id")}, {"rank", n.at("rank")}, {"weight", n.at("weight")},
                             {"canonical", n.at("canonical")}});
      }
      detail += table(nodes);
      list.push_back({{"anchor", id},
                      {"nodes", node_list},
                      {"edges", dag.at("edges")},
                      {"acyclic", d->value("acyclic", false)}});
    }
    text += table(rows) + detail;
    sections["dag"] = list;
  }

  // Coverage.
  text += heading("Coverage and perturbation success");
  if (auto cov = load(out / "coverage/coverage.json")) {
    std::vector<Row> rows{{"Anchor", "Instances", "Pret-Match", "GT-Match", "Pert. SR"}};
    for (const auto& a : cov->at("anchors")) {
      const json& c = a.at("coverage");
      rows.push_back({a.at("anchor").get<std::string>(), a.at("instances").dump(), str(c.at("pret_match")),
                      str(c.at("gt_match")), str(a.at("pert_sr"))});
    }
    text += table(rows);
    sections["coverage"] = cov->at("anchors");
  } else {
    text += "absent (no coverage artifact)\n";
    sections["coverage"] = nullptr;
  }

  // Success prediction.
  text += heading("Success prediction (cross-entropy)");
  if (auto pred = load(out / "predict/predict.json")) {
    std::vector<Row> rows{{"Anchor", "CE (DAG)", "CE (baseline)", "Delta CE", "Excluded"}};
    json list = json::array();
    for (const auto& a : pred->at("anchors")) {
      long excluded = 0;
      for (const auto& rec : a.at("dag").at("records")) excluded += rec.value("excluded", false);
      rows.push_back({a.at("anchor").get<std::string>(), fixed4(a.at("dag").at("mean_ce")),
                      fixed4(a.at("baseline").at("mean_ce")), fixed4(a.at("delta_ce")), std::to_string(excluded)});
      list.push_back({{"anchor", a.at("anchor")},
                      {"ce_dag", fixed4(a.at("dag").at("mean_ce"))},
                      {"ce_baseline", fixed4(a.at("baseline").at("mean_ce"))},
                      {"delta_ce", fixed4(a.at("delta_ce"))},
                      {"excluded", excluded}});
    }
    text += table(rows);
    sections["predict"] = list;
  } else {
    text += "absent (no predict artifact)\n";
    sections["predict"] = nullptr;
  }

  // Failure attribution.
  text += heading("Failure-mode attribution (Shapley on error rate)");
  const auto clusters = index_of(out, "shapley", "clusters");
  if (clusters.empty()) {
    text += "absent (no shapley artifact)\n";
    sections["shapley"] = nullptr;
  } else {
    json list = json::array();
    for (const auto& id : clusters) {
      auto s = load(out / ("shapley/" + safe_name(id) + ".json"));
      if (!s) continue;
      text += "\nCluster " + id + "\n";
      if (s->at("attribution").is_null()) {
        text += "(no failure modes discovered)\n";
        list.push_back({{"cluster", id}, {"modes", json::array()}});
        continue;
      }
      std::vector<Row> rows{{"Failure Mode", "Error Type", "Complexity", "Shapley phi", "Impact"}};
      for (const auto& m : s->at("attribution").at("modes")) {
        const auto phi = parse_rational(m.at("phi_exact").get<std::string>());
        rows.push_back({m.at("name").get<std::string>(), m.value("error_type", "-"), m.value("complexity", "-"),
                        phi ? to_fixed(*phi, 2) : "—", m.at("impact").get<std::string>()});
      }
      text += table(rows);
      list.push_back({{"cluster", id}, {"modes", s->at("attribution").at("modes")}, {"ranking", s->at("ranking")}});
    }
    sections["shapley"] = list;
  }

  // Stability.
  text += heading("Subsampling stability");
  const auto stab = index_of(out, "stability", "clusters");
  std::map<size_t, std::pair<std::vector<double>, std::vector<double>>> pooled;
  if (stab.empty()) {
    text += "absent (no stability artifact)\n";
    sections["stability"] = nullptr;
  } else {
    json list = json::array();
    for (const auto& id : stab) {
      auto s = load(out / ("stability/" + safe_name(id) + ".json"));
      if (!s) continue;
      text += "\nCluster " + id + " (top-" + s->at("k").dump() + " reference: ";
      std::string ref;
      for (const auto& n : s->at("reference_top_k")) ref += (ref.empty() ? "" : ", ") + n.get<std::string>();
      text += ref + ")\n";
      std::vector<Row> rows{{"Size", "Samples", "Jaccard", "Kendall tau", "Undefined tau"}};
      for (const auto& row : s->at("rows")) {
        rows.push_back({row.at("size").dump(), row.at("samples").dump(), str(row.at("jaccard")),
                        str(row.at("kendall_tau")), row.at("undefined_tau").dump()});
        auto& p = pooled[row.at("size").get<size_t>()];
        if (row.at("jaccard").is_string()) p.first.push_back(std::stod(row.at("jaccard").get<std::string>()));
        if (row.at("kendall_tau").is_string()) p.second.push_back(std::stod(row.at("kendall_tau").get<std::string>()));
      }
      text += table(rows);
      list.push_back({{"cluster", id}, {"rows", s->at("rows")}, {"notices", s->at("notices")}});
    }
    sections["stability"] = list;
  }
  r.stability_csv = "size,jaccard,kendall_tau\n";
  for (const auto& [size, p] : pooled) {
    auto mean = [](const std::vector<double>& v) -> std::string {
      if (v.empty()) return "";
      double s = 0;
      for (double x : v) s += x;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", s / static_cast<double>(v.size()));
      return buf;
    };
    r.stability_csv += std::to_string(size) + "," + mean(p.first) + "," + mean(p.second) + "\n";
  }

  r.text = text;
  r.data = {{"v", kSchemaVersion}, {"dataset", dataset}, {"sections", sections}};
  return r;
}

}  // namespace truex
