#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rolecheck/dataset.hpp"
#include "rolecheck/judge.hpp"

namespace rolecheck {

enum class ReportFormat { markdown, csv, json_lines };
std::string to_string(ReportFormat f);
ReportFormat report_format_from_string(const std::string& s);

struct ReportDoc {
  ReportFormat format = ReportFormat::markdown;
  std::string body;
  std::vector<std::string> source_run_ids;
};

// "44.24±0.23": accuracy and SEM as percentages with 2 decimals.
std::string format_cell(const ScoreCell& cell);

// Column order for every table row.
std::vector<std::string> report_columns();

// One row per (model, strategy): Eve./Rel./Att./Ide./Avg. for KKE and UKE,
// then the overall average. Stats, when given, follow as a second table
// (markdown) or extra lines (json-lines); csv carries scores only.
// Throws EmptyInput when there are no tables.
ReportDoc render(const std::vector<ScoreTable>& tables, const std::optional<DatasetStats>& stats, ReportFormat format);

}  // namespace rolecheck
