#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "edge_grpo/entropy.hpp"

namespace edge_grpo {

inline constexpr std::array<std::string_view, 15> kReflectionKeywords = {
    "check again", "recheck",   "double-check", "rethink",     "think again",
    "reevaluate",  "re-evaluate", "re-examine", "verify again", "reevaluation",
    "reexamine",   "reanalyze", "reassess",     "reconsider",  "go over"};

// Case-insensitive plain substring match against any reflection keyword.
bool detect_reflection(std::string_view text);

// One flag per entry of kReflectionKeywords.
std::array<bool, kReflectionKeywords.size()> reflection_keyword_hits(std::string_view text);

struct ResponseLogRecord {
  std::string id;
  std::string question_text;
  std::string response_text;
  bool correct = false;
  std::optional<double> entropy;
  double temperature = 1.0;
  std::string model_tag;
};

// Parses one JSONL line; throws std::invalid_argument on malformed input.
ResponseLogRecord parse_response_log_line(std::string_view line);

struct AccuracySplit {
  int total = 0;
  int correct = 0;
  int reflective = 0;
  int reflective_correct = 0;
  int non_reflective = 0;
  int non_reflective_correct = 0;

  double overall_acc() const;
  double reflection_acc() const;
  double no_reflection_acc() const;
};

struct BucketReport {
  std::string model_tag;
  double temperature = 0.0;
  AccuracySplit accuracy;
  int with_entropy = 0;
  int missing_entropy = 0;
  std::optional<double> rcm;
  std::string rcm_note;  // why rcm is absent
  std::optional<CalibrationStats> calibration;
};

struct AnalysisReport {
  AccuracySplit accuracy;
  int malformed_lines = 0;
  int missing_entropy = 0;
  std::array<int, kReflectionKeywords.size()> keyword_hits{};
  // Sorted by (model_tag, temperature).
  std::vector<BucketReport> buckets;
  // Calibration pooled over all temperatures of a model tag.
  std::map<std::string, CalibrationStats> calibration_by_model;
};

// Reads a JSONL response log. Malformed lines are counted, not fatal.
// Throws std::runtime_error if the file cannot be read or has no valid record.
AnalysisReport analyze_log(const std::filesystem::path& path);
AnalysisReport analyze_records(std::vector<ResponseLogRecord> records, int malformed_lines = 0);

nlohmann::json report_to_json(const AnalysisReport& report);

// Columns accepted by export_csv.
std::vector<std::string> metrics_columns();

// Writes the chosen metrics columns as RFC 4180 CSV with a header row;
// numbers use 17 significant digits. Throws std::invalid_argument listing
// unknown columns.
void export_csv(const std::filesystem::path& metrics_path, const std::vector<std::string>& columns,
                const std::filesystem::path& out_path);

}  // namespace edge_grpo
