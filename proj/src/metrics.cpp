#include "occbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include "occbench/error.hpp"

namespace occbench {

Pose3D root_align(const Pose3D& pose, int root_index) {
  if (root_index < 0 || root_index >= pose.joint_count()) {
    throw ValidationError("root index out of range");
  }
  Pose3D out = pose;
  const Vec3 root = pose.joints_mm[root_index];
  for (auto& p : out.joints_mm) p -= root;
  out.joints_mm[root_index] = Vec3::Zero();
  return out;
}

std::vector<double> joint_errors(const Pose3D& pred, const Pose3D& gt, int root_index) {
  if (pred.joint_count() != gt.joint_count()) {
    throw ValidationError("mpjpe: prediction has " + std::to_string(pred.joint_count()) +
                          " joints, ground truth " + std::to_string(gt.joint_count()));
  }
  const Pose3D a = root_align(pred, root_index);
  const Pose3D b = root_align(gt, root_index);
  std::vector<double> out(a.joints_mm.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = (a.joints_mm[j] - b.joints_mm[j]).norm();
  return out;
}

double mpjpe(const Pose3D& pred, const Pose3D& gt, int root_index, bool include_root) {
  const auto errs = joint_errors(pred, gt, root_index);
  const std::size_t n = include_root ? errs.size() : errs.size() - 1;
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < errs.size(); ++j) {
    if (include_root || static_cast<int>(j) != root_index) sum += errs[j];
  }
  return sum / static_cast<double>(n);
}

ErrorRecord make_error_record(std::int64_t frame_id, std::string action, std::string kind,
                              double degree, const Pose3D& pred, const Pose3D& gt, int root_index,
                              bool include_root) {
  ErrorRecord r;
  r.frame_id = frame_id;
  r.action = std::move(action);
  r.occlusion_kind = std::move(kind);
  r.degree = degree;
  r.joint_errors_mm = joint_errors(pred, gt, root_index);
  if (!include_root) r.joint_errors_mm.erase(r.joint_errors_mm.begin() + root_index);
  double sum = 0.0;
  for (double e : r.joint_errors_mm) sum += e;
  r.mpjpe_mm = r.joint_errors_mm.empty() ? 0.0 : sum / static_cast<double>(r.joint_errors_mm.size());
  return r;
}

void to_json(nlohmann::json& j, const ErrorRecord& r) {
  j = {{"frame_id", r.frame_id}, {"action", r.action},  {"occlusion_kind", r.occlusion_kind},
       {"degree", r.degree},     {"mpjpe_mm", r.mpjpe_mm}, {"joint_errors_mm", r.joint_errors_mm}};
}

void from_json(const nlohmann::json& j, ErrorRecord& r) {
  r.frame_id = j.at("frame_id").get<std::int64_t>();
  r.action = j.value("action", "");
  r.occlusion_kind = j.value("occlusion_kind", "none");
  r.degree = j.value("degree", 0.0);
  r.mpjpe_mm = j.at("mpjpe_mm").get<double>();
  r.joint_errors_mm = j.value("joint_errors_mm", std::vector<double>{});
}

void CompensatedSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    compensation_ += (sum_ - t) + v;
  } else {
    compensation_ += (v - t) + sum_;
  }
  sum_ = t;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("mean of an empty set");
  CompensatedSum s;
  for (double v : values) s.add(v);
  const double mean = s.value() / static_cast<double>(values.size());
  CompensatedSum sq;
  for (double v : values) sq.add((v - mean) * (v - mean));
  return {mean, std::sqrt(sq.value() / static_cast<double>(values.size()))};
}

std::string format_number(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  std::string s = buf;
  if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) {
    if (s[0] == '-') s.erase(0, 1);
  }
  return s;
}

std::vector<AggregateRow> aggregate(const std::vector<ErrorRecord>& records,
                                    const std::vector<GroupKey>& group_by) {
  if (records.empty()) throw ValidationError("aggregate: no records");
  // Sort key: strings for action/kind, degree in integer thousandths.
  using Key = std::vector<std::tuple<std::int64_t, std::string>>;
  std::map<Key, std::vector<double>> groups;
  std::map<Key, std::string> labels;
  for (const auto& r : records) {
    Key key;
    std::string label;
    for (GroupKey g : group_by) {
      std::string part;
      switch (g) {
        case GroupKey::action:
          key.emplace_back(0, r.action);
          part = r.action;
          break;
        case GroupKey::occlusion_kind:
          key.emplace_back(0, r.occlusion_kind);
          part = r.occlusion_kind;
          break;
        case GroupKey::degree:
          key.emplace_back(std::llround(r.degree * 1000.0), "");
          part = format_number(r.degree, 2);
          break;
      }
      label += (label.empty() ? "" : "/") + part;
    }
    if (group_by.empty()) label = "all";
    groups[key].push_back(r.mpjpe_mm);
    labels[key] = label;
  }
  std::vector<AggregateRow> rows;
  for (const auto& [key, values] : groups) {
    const auto ms = mean_std(values);
    rows.push_back({labels[key], ms.mean, ms.std, static_cast<std::int64_t>(values.size())});
  }
  return rows;
}

void write_records_jsonl(const std::vector<ErrorRecord>& records, std::ostream& out) {
  for (const auto& r : records) out << nlohmann::json(r).dump() << '\n';
}

void write_records_jsonl(const std::vector<ErrorRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_records_jsonl(records, out);
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<ErrorRecord> read_records_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<ErrorRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<ErrorRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "group,mean_mm,std_mm,count\n";
  for (const auto& r : rows) {
    out << r.group << ',' << format_number(r.mean_mm) << ',' << format_number(r.std_mm) << ','
        << r.count << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace occbench
