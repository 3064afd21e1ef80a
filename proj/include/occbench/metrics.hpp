#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "occbench/datamodel.hpp"

namespace occbench {

// Subtracts the root joint from every joint.
Pose3D root_align(const Pose3D& pose, int root_index);

// Per-joint Euclidean distances after root alignment of both poses.
std::vector<double> joint_errors(const Pose3D& pred, const Pose3D& gt, int root_index);

// Mean per-joint position error in mm. No Procrustes alignment.
double mpjpe(const Pose3D& pred, const Pose3D& gt, int root_index, bool include_root = true);

struct ErrorRecord {
  std::int64_t frame_id = 0;
  std::string action;
  std::string occlusion_kind = "none";
  double degree = 0.0;
  double mpjpe_mm = 0.0;
  std::vector<double> joint_errors_mm;
};

// Builds a record whose mpjpe is the mean of the per-joint errors.
ErrorRecord make_error_record(std::int64_t frame_id, std::string action, std::string kind,
                              double degree, const Pose3D& pred, const Pose3D& gt, int root_index,
                              bool include_root = true);

void to_json(nlohmann::json& j, const ErrorRecord& r);
void from_json(const nlohmann::json& j, ErrorRecord& r);

enum class GroupKey { action, occlusion_kind, degree };

struct AggregateRow {
  std::string group;
  double mean_mm = 0.0;
  double std_mm = 0.0;  // population standard deviation
  std::int64_t count = 0;
};

// Rows ordered by group key (degrees numerically).
std::vector<AggregateRow> aggregate(const std::vector<ErrorRecord>& records,
                                    const std::vector<GroupKey>& group_by);

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

// Mean and population standard deviation.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};
MeanStd mean_std(const std::vector<double>& values);

void write_records_jsonl(const std::vector<ErrorRecord>& records, std::ostream& out);
void write_records_jsonl(const std::vector<ErrorRecord>& records, const std::filesystem::path& path);
std::vector<ErrorRecord> read_records_jsonl(const std::filesystem::path& path);
// Header: group,mean_mm,std_mm,count
void write_aggregate_csv(const std::vector<AggregateRow>& rows, const std::filesystem::path& path);

// Fixed-notation number formatting shared by the CSV writers.
std::string format_number(double v, int precision = 6);

}  // namespace occbench
