#include "occbench/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "occbench/error.hpp"
#include "occbench/random.hpp"

namespace occbench {

using nlohmann::json;

ReportFormat parse_report_format(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "json") return ReportFormat::json;
  throw ValidationError("unknown report format '" + name + "'");
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(0, 1);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(where + ": '" + s + "' is not a number");
  }
}

}  // namespace

void write_curves(const std::vector<RobustnessCurve>& curves, const std::filesystem::path& path,
                  ReportFormat format) {
  if (curves.empty()) throw ValidationError("no curves to report");
  auto out = open_out(path);
  if (format == ReportFormat::json) {
    json doc = json::array();
    for (const auto& c : curves) {
      json points = json::array();
      for (const auto& p : c.points) {
        points.push_back({{"degree", p.degree}, {"mean_mm", p.mean_mm}, {"std_mm", p.std_mm}, {"n", p.n_frames}});
      }
      doc.push_back({{"kind", std::string(to_string(c.kind))}, {"points", points}});
    }
    out << doc.dump(1) << '\n';
  } else {
    out << "kind,degree,mean_mm,std_mm,n\n";
    for (const auto& c : curves) {
      for (const auto& p : c.points) {
        out << to_string(c.kind) << ',' << format_number(p.degree, 2) << ','
            << format_number(p.mean_mm, 9) << ',' << format_number(p.std_mm, 9) << ',' << p.n_frames
            << '\n';
      }
    }
  }
  finish(out, path);
}

std::vector<RobustnessCurve> read_curves_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);
  if (split_csv_line(line) != std::vector<std::string>{"kind", "degree", "mean_mm", "std_mm", "n"}) {
    throw ValidationError(path.string() + ": unexpected curve header");
  }
  std::vector<RobustnessCurve> curves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 5) throw ValidationError(path.string() + ": malformed row '" + line + "'");
    const auto kind = parse_occlusion_kind(cells[0]);
    if (curves.empty() || curves.back().kind != kind) curves.push_back({kind, {}});
    curves.back().points.push_back({parse_double(cells[1], path.string()), parse_double(cells[2], path.string()),
                                    parse_double(cells[3], path.string()),
                                    static_cast<std::int64_t>(parse_double(cells[4], path.string()))});
  }
  return curves;
}

void write_matrix(const TrainTestMatrix& mx, const std::filesystem::path& path, ReportFormat format) {
  if (mx.rows.empty()) throw ValidationError("empty matrix");
  auto out = open_out(path);
  if (format == ReportFormat::json) {
    json cols = json::array();
    for (auto k : mx.columns) cols.push_back(std::string(to_string(k)));
    out << json{{"rows", mx.rows}, {"columns", cols}, {"degrees", mx.degrees}, {"cells", mx.cells}}.dump(1)
        << '\n';
  } else {
    out << "train\\test";
    for (auto k : mx.columns) out << ',' << to_string(k);
    out << '\n';
    for (std::size_t r = 0; r < mx.rows.size(); ++r) {
      out << mx.rows[r];
      for (double v : mx.cells[r]) out << ',' << format_number(v, 9);
      out << '\n';
    }
  }
  finish(out, path);
}

double ResultSet::at(const std::string& column) const {
  for (const auto& [k, v] : values) {
    if (k == column) return v;
  }
  throw ValidationError("result set '" + label + "' has no column '" + column + "'");
}

std::vector<ResultSet> read_result_sets_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') header = split_csv_line(line);
  }
  if (header.size() < 2 || header[0] != "label") {
    throw ValidationError(path.string() + ": header must start with 'label'");
  }
  std::vector<ResultSet> sets;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ValidationError(path.string() + ": row '" + cells[0] + "' has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
    }
    ResultSet s{cells[0], {}};
    for (std::size_t i = 1; i < cells.size(); ++i) {
      s.values.emplace_back(header[i], parse_double(cells[i], path.string() + " row " + cells[0]));
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

const ResultSet& find_result_set(const std::vector<ResultSet>& sets, const std::string& label) {
  for (const auto& s : sets) {
    if (s.label == label) return s;
  }
  throw ValidationError("no result set labeled '" + label + "'");
}

ResultSet result_set_from(const std::string& label, const std::vector<AggregateRow>& rows) {
  ResultSet s{label, {}};
  for (const auto& r : rows) s.values.emplace_back(r.group, r.mean_mm);
  return s;
}

const ComparisonRow& Comparison::at(const std::string& column) const {
  for (const auto& r : rows) {
    if (r.column == column) return r;
  }
  throw ValidationError("comparison has no column '" + column + "'");
}

Comparison compare(const ResultSet& baseline, const ResultSet& candidate) {
  if (baseline.values.empty()) throw ValidationError("baseline result set is empty");
  Comparison c{baseline.label, candidate.label, {}};
  for (const auto& [column, base] : baseline.values) {
    ComparisonRow r;
    r.column = column;
    r.baseline = base;
    r.candidate = candidate.at(column);
    r.improvement_mm = r.baseline - r.candidate;
    r.improvement_pct = r.baseline != 0.0 ? 100.0 * r.improvement_mm / r.baseline : 0.0;
    c.rows.push_back(r);
  }
  return c;
}

void write_comparison(const Comparison& c, const std::filesystem::path& path, ReportFormat format) {
  auto out = open_out(path);
  if (format == ReportFormat::json) {
    json rows = json::array();
    for (const auto& r : c.rows) {
      rows.push_back({{"column", r.column}, {"baseline_mm", r.baseline}, {"candidate_mm", r.candidate},
                      {"improvement_mm", r.improvement_mm}, {"improvement_pct", r.improvement_pct}});
    }
    out << json{{"baseline", c.baseline}, {"candidate", c.candidate}, {"rows", rows}}.dump(1) << '\n';
  } else {
    out << "column,baseline_mm,candidate_mm,improvement_mm,improvement_pct\n";
    for (const auto& r : c.rows) {
      out << r.column << ',' << format_number(r.baseline, 2) << ',' << format_number(r.candidate, 2)
          << ',' << format_number(r.improvement_mm, 2) << ',' << format_number(r.improvement_pct, 2)
          << '\n';
    }
  }
  finish(out, path);
}

void write_sweep_outputs(const SweepResult& result, const std::filesystem::path& dir,
                         const json& run_metadata) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_records_jsonl(result.records, dir / "records.jsonl");
  write_curves(result.curves, dir / "curves.csv");
  json failures = json::array();
  std::map<std::string, int> excluded;
  for (const auto& f : result.failures) {
    failures.push_back({{"frame_id", f.frame_id}, {"kind", std::string(to_string(f.kind))},
                        {"degree", f.degree}, {"reason", f.reason}});
    ++excluded[std::string(to_string(f.kind))];
  }
  json meta = run_metadata;
  meta["predictor"] = result.predictor;
  meta["excluded_frames"] = excluded;
  meta["failures"] = failures;
  meta["occluder_ids"] = result.occluder_ids;
  meta["std_convention"] = "population";
  auto out = open_out(dir / "metadata.json");
  out << meta.dump(1) << '\n';
  finish(out, dir / "metadata.json");
}

void write_calibration(const CalibrationReport& report, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "kind,degree,samples,mean_count,std_count,mean_fraction,max_abs_error,relative_deviation,flagged\n";
  for (const auto& c : report.cells) {
    out << to_string(c.kind) << ',' << format_number(c.degree, 2) << ',' << c.samples << ','
        << format_number(c.mean_count, 3) << ',' << format_number(c.std_count, 3) << ','
        << format_number(c.mean_fraction, 6) << ',' << format_number(c.max_abs_error, 6) << ','
        << format_number(c.relative_deviation, 6) << ',' << (c.flagged ? 1 : 0) << '\n';
  }
  finish(out, path);
}

std::string config_hash(const json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(hash_string(config.dump())));
  return buf;
}

}  // namespace occbench
