#include "rolecheck/report.hpp"

#include <cstdio>
#include <sstream>

#include "rolecheck/errors.hpp"

namespace rolecheck {

std::string to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::markdown: return "markdown";
    case ReportFormat::csv: return "csv";
    default: return "json-lines";
  }
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  if (s == "json-lines" || s == "jsonl") return ReportFormat::json_lines;
  throw UsageError("unknown report format '" + s + "' (markdown|csv|json-lines)");
}

std::string format_cell(const ScoreCell& cell) {
  if (cell.n == 0) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f\u00b1%.2f", cell.accuracy_mean * 100.0, cell.sem * 100.0);
  return buf;
}

namespace {

const char* kShort[] = {"Eve.", "Rel.", "Att.", "Ide."};

std::vector<std::string> row_cells(const ScoreTable& t) {
  std::vector<std::string> out{t.model, t.strategy};
  for (auto type : {ErrorType::kke, ErrorType::uke}) {
    auto row = t.cells.find(type);
    for (auto cat : kAllCategories) {
      if (row == t.cells.end() || !row->second.count(cat)) out.push_back("-");
      else out.push_back(format_cell(row->second.at(cat)));
    }
    auto avg = t.averages.find(type);
    out.push_back(avg == t.averages.end() ? "-" : format_cell(avg->second));
  }
  out.push_back(format_cell(t.overall));
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

std::vector<std::string> report_columns() {
  std::vector<std::string> cols{"Model", "Strategy"};
  for (const char* type : {"KKE", "UKE"}) {
    for (const char* c : kShort) cols.push_back(std::string(type) + " " + c);
    cols.push_back(std::string(type) + " Avg.");
  }
  cols.push_back("Avg.");
  return cols;
}

ReportDoc render(const std::vector<ScoreTable>& tables, const std::optional<DatasetStats>& stats, ReportFormat format) {
  if (tables.empty()) throw EmptyInput("nothing to report");
  ReportDoc doc;
  doc.format = format;
  for (const auto& t : tables) doc.source_run_ids.push_back(t.run_id);
  const auto cols = report_columns();
  std::ostringstream out;

  switch (format) {
    case ReportFormat::markdown: {
      out << "|";
      for (const auto& c : cols) out << ' ' << c << " |";
      out << "\n|";
      for (std::size_t i = 0; i < cols.size(); ++i) out << "---|";
      out << '\n';
      for (const auto& t : tables) {
        out << "|";
        for (const auto& c : row_cells(t)) out << ' ' << c << " |";
        out << '\n';
      }
      if (stats) out << '\n' << render_stats(*stats);
      break;
    }
    case ReportFormat::csv: {
      for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << csv_escape(cols[i]);
      out << '\n';
      for (const auto& t : tables) {
        auto cells = row_cells(t);
        for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_escape(cells[i]);
        out << '\n';
      }
      break;
    }
    case ReportFormat::json_lines: {
      for (const auto& t : tables) {
        nlohmann::json j{{"run_id", t.run_id}};
        auto cells = row_cells(t);
        for (std::size_t i = 0; i < cols.size(); ++i) j[cols[i]] = cells[i];
        j["scores"] = t.to_json();
        out << j.dump() << '\n';
      }
      if (stats) out << nlohmann::json{{"dataset_stats", stats->to_json()}}.dump() << '\n';
      break;
    }
  }
  doc.body = out.str();
  return doc;
}

}  // namespace rolecheck
