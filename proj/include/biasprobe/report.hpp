#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "biasprobe/metrics.hpp"

namespace biasprobe::report {

inline constexpr std::string_view kCsvHeader = "set_name,backend,method,n,gas,gas_f,gas_m,delta,gld,add_raw,add_log";

enum class Format { Csv, Json, Markdown };
Format parse_format(std::string_view s);
Format format_for_path(const std::string& path);

std::string csv_escape(std::string_view field);
std::string csv_row(const metrics::BiasReport& r);

std::string to_csv(const std::vector<metrics::BiasReport>& reports);
/// add_log of -inf is written as null.
std::string to_json(const std::vector<metrics::BiasReport>& reports);
/// Rows grouped by set; within each set the minimum GAS, GLD and ADD are bolded.
std::string to_markdown(const std::vector<metrics::BiasReport>& reports);

nlohmann::ordered_json to_ordered_json(const metrics::BiasReport& r);
metrics::BiasReport report_from_json(const nlohmann::json& j);
std::vector<metrics::BiasReport> reports_from_json(std::string_view content);

std::string render(const std::vector<metrics::BiasReport>& reports, Format f);
/// Throws a data error on empty input or an unwritable path.
void emit_report(const std::vector<metrics::BiasReport>& reports, Format f, const std::string& path);

}  // namespace biasprobe::report
