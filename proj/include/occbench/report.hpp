#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "occbench/occlusion.hpp"
#include "occbench/sweep.hpp"

namespace occbench {

enum class ReportFormat { csv, json };
ReportFormat parse_report_format(const std::string& name);

// kind,degree,mean_mm,std_mm,n
void write_curves(const std::vector<RobustnessCurve>& curves, const std::filesystem::path& path,
                  ReportFormat format = ReportFormat::csv);
std::vector<RobustnessCurve> read_curves_csv(const std::filesystem::path& path);

// First column "train\test", one column per test kind, one row per predictor.
void write_matrix(const TrainTestMatrix& matrix, const std::filesystem::path& path,
                  ReportFormat format = ReportFormat::csv);

// Named columns of one result row, e.g. per-action means and "Avg".
struct ResultSet {
  std::string label;
  std::vector<std::pair<std::string, double>> values;

  double at(const std::string& column) const;
};

// CSV with header "label,<column>,..." and one result set per row.
std::vector<ResultSet> read_result_sets_csv(const std::filesystem::path& path);
const ResultSet& find_result_set(const std::vector<ResultSet>& sets, const std::string& label);
// Result set from aggregate rows (group -> mean).
ResultSet result_set_from(const std::string& label, const std::vector<AggregateRow>& rows);

struct ComparisonRow {
  std::string column;
  double baseline = 0.0;
  double candidate = 0.0;
  double improvement_mm = 0.0;   // baseline - candidate
  double improvement_pct = 0.0;  // 100 * improvement / baseline
};

struct Comparison {
  std::string baseline;
  std::string candidate;
  std::vector<ComparisonRow> rows;

  const ComparisonRow& at(const std::string& column) const;
};

// Columns of the baseline, in order; each must exist in the candidate.
Comparison compare(const ResultSet& baseline, const ResultSet& candidate);

// column,baseline_mm,candidate_mm,improvement_mm,improvement_pct
void write_comparison(const Comparison& comparison, const std::filesystem::path& path,
                      ReportFormat format = ReportFormat::csv);

// Per-record JSONL, curve table, and failure/seed metadata for one sweep.
void write_sweep_outputs(const SweepResult& result, const std::filesystem::path& dir,
                         const nlohmann::json& run_metadata);

// Calibration table: kind,degree,samples,mean_count,std_count,mean_fraction,max_abs_error,relative_deviation,flagged
void write_calibration(const CalibrationReport& report, const std::filesystem::path& path);

// FNV-1a of the canonical (sorted-key) JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

}  // namespace occbench
