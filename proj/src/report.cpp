#include "biasprobe/report.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>

#include "biasprobe/error.hpp"
#include "biasprobe/text.hpp"

namespace biasprobe::report {

using nlohmann::json;
using nlohmann::ordered_json;

Format parse_format(std::string_view s) {
  if (s == "csv") return Format::Csv;
  if (s == "json") return Format::Json;
  if (s == "md" || s == "markdown") return Format::Markdown;
  throw config_error("unknown report format: " + std::string(s));
}

Format format_for_path(const std::string& path) {
  auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".json") return Format::Json;
  if (ext == ".md") return Format::Markdown;
  return Format::Csv;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_row(const metrics::BiasReport& r) {
  auto num = [](double v) { return text::format_double(v, 10); };
  return csv_escape(r.set_name) + "," + csv_escape(r.backend_id) + "," + csv_escape(r.method_label) + "," +
         std::to_string(r.n_records) + "," + num(r.gas) + "," + num(r.gas_f) + "," + num(r.gas_m) + "," +
         num(r.delta) + "," + num(r.gld) + "," + num(r.add_raw) + "," + num(r.add_log);
}

std::string to_csv(const std::vector<metrics::BiasReport>& reports) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : reports) out += csv_row(r) + "\n";
  return out;
}

ordered_json to_ordered_json(const metrics::BiasReport& r) {
  ordered_json j;
  j["set_name"] = r.set_name;
  j["backend"] = r.backend_id;
  j["method"] = r.method_label;
  j["n"] = r.n_records;
  j["gas"] = r.gas;
  j["gas_f"] = r.gas_f;
  j["gas_m"] = r.gas_m;
  j["delta"] = r.delta;
  j["gld"] = r.gld;
  j["add_raw"] = r.add_raw;
  j["add_log"] = std::isfinite(r.add_log) ? ordered_json(r.add_log) : ordered_json(nullptr);
  return j;
}

std::string to_json(const std::vector<metrics::BiasReport>& reports) {
  ordered_json arr = ordered_json::array();
  for (const auto& r : reports) arr.push_back(to_ordered_json(r));
  return arr.dump(2) + "\n";
}

metrics::BiasReport report_from_json(const json& j) {
  metrics::BiasReport r;
  try {
    r.set_name = j.at("set_name").get<std::string>();
    r.backend_id = j.at("backend").get<std::string>();
    r.method_label = j.at("method").get<std::string>();
    r.n_records = j.at("n").get<std::size_t>();
    r.gas = j.at("gas").get<double>();
    r.gas_f = j.at("gas_f").get<double>();
    r.gas_m = j.at("gas_m").get<double>();
    r.delta = j.at("delta").get<double>();
    r.gld = j.at("gld").get<double>();
    r.add_raw = j.at("add_raw").get<double>();
    r.add_log = j.at("add_log").is_null() ? -std::numeric_limits<double>::infinity() : j.at("add_log").get<double>();
  } catch (const json::exception& e) {
    throw data_error(std::string("report JSON: ") + e.what());
  }
  return r;
}

std::vector<metrics::BiasReport> reports_from_json(std::string_view content) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::exception& e) {
    throw data_error(std::string("report JSON: ") + e.what());
  }
  std::vector<metrics::BiasReport> out;
  if (j.is_array()) {
    for (const auto& x : j) out.push_back(report_from_json(x));
  } else {
    out.push_back(report_from_json(j));
  }
  return out;
}

std::string to_markdown(const std::vector<metrics::BiasReport>& reports) {
  std::vector<std::string> set_order;
  std::map<std::string, std::vector<const metrics::BiasReport*>> groups;
  for (const auto& r : reports) {
    auto& g = groups[r.set_name];
    if (g.empty()) set_order.push_back(r.set_name);
    g.push_back(&r);
  }
  std::string out = "| Set | Method | n | GAS | GAS(F) | GAS(M) | Delta | GLD | ADD |\n";
  out += "|---|---|---:|---:|---:|---:|---:|---:|---:|\n";
  auto fmt = [](double v) { return text::format_fixed(v, 3); };
  for (const auto& set : set_order) {
    const auto& rows = groups[set];
    double min_gas = std::numeric_limits<double>::infinity();
    double min_gld = min_gas, min_add = min_gas;
    for (const auto* r : rows) {
      min_gas = std::min(min_gas, r->gas);
      min_gld = std::min(min_gld, r->gld);
      min_add = std::min(min_add, r->add_log);
    }
    for (const auto* r : rows) {
      auto cell = [&](double v, double best) { return v == best ? "**" + fmt(v) + "**" : fmt(v); };
      out += "| " + r->set_name + " | " + r->method_label + " | " + std::to_string(r->n_records) + " | " +
             cell(r->gas, min_gas) + " | " + fmt(r->gas_f) + " | " + fmt(r->gas_m) + " | " + fmt(r->delta) +
             " | " + cell(r->gld, min_gld) + " | " + cell(r->add_log, min_add) + " |\n";
    }
  }
  return out;
}

std::string render(const std::vector<metrics::BiasReport>& reports, Format f) {
  if (reports.empty()) throw data_error("report: no rows to emit");
  switch (f) {
    case Format::Csv: return to_csv(reports);
    case Format::Json: return to_json(reports);
    case Format::Markdown: return to_markdown(reports);
  }
  return {};
}

void emit_report(const std::vector<metrics::BiasReport>& reports, Format f, const std::string& path) {
  text::write_file(path, render(reports, f));
}

}  // namespace biasprobe::report
