#include "edge_grpo/analytics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <tuple>

#include <nlohmann/json.hpp>

namespace edge_grpo {

using nlohmann::json;

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

double ratio(int num, int den) { return den > 0 ? static_cast<double>(num) / den : 0.0; }

void tally(AccuracySplit& acc, const ResponseLogRecord& r, bool reflective) {
  ++acc.total;
  if (r.correct) ++acc.correct;
  if (reflective) {
    ++acc.reflective;
    if (r.correct) ++acc.reflective_correct;
  } else {
    ++acc.non_reflective;
    if (r.correct) ++acc.non_reflective_correct;
  }
}

json accuracy_json(const AccuracySplit& a) {
  return json{{"total", a.total},
              {"correct", a.correct},
              {"reflective", a.reflective},
              {"reflective_correct", a.reflective_correct},
              {"non_reflective", a.non_reflective},
              {"non_reflective_correct", a.non_reflective_correct},
              {"overall_acc", a.overall_acc()},
              {"reflection_acc", a.reflection_acc()},
              {"no_reflection_acc", a.no_reflection_acc()}};
}

json calibration_json(const CalibrationStats& c) {
  return json{{"frac_correct_above_mean", c.frac_correct_above_mean},
              {"frac_incorrect_below_mean", c.frac_incorrect_below_mean},
              {"mean_entropy", c.mean_entropy},
              {"n_correct", c.n_correct},
              {"n_incorrect", c.n_incorrect},
              {"n_correct_above_mean", c.n_correct_above_mean},
              {"n_incorrect_below_mean", c.n_incorrect_below_mean}};
}

std::vector<EntropyRecord> entropy_records(const std::vector<const ResponseLogRecord*>& rs) {
  std::vector<EntropyRecord> out;
  for (const auto* r : rs) {
    if (r->entropy) out.push_back({r->id, *r->entropy, r->correct, r->temperature});
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string csv_value(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return v.dump();
  if (v.is_number_float()) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
    return buf;
  }
  if (v.is_string()) return csv_field(v.get<std::string>());
  return csv_field(v.dump());
}

const json& column_value(const json& rec, const std::string& col) {
  static const json kNull = nullptr;
  static constexpr std::string_view kGecPrefix = "gec_";
  if (col.starts_with(kGecPrefix) && rec.contains("gec_counts")) {
    const json& g = rec["gec_counts"];
    const std::string key = col.substr(kGecPrefix.size());
    return g.contains(key) ? g[key] : kNull;
  }
  return rec.contains(col) ? rec[col] : kNull;
}

}  // namespace

std::array<bool, kReflectionKeywords.size()> reflection_keyword_hits(std::string_view text) {
  const std::string lower = lowercase(text);
  std::array<bool, kReflectionKeywords.size()> hits{};
  for (std::size_t k = 0; k < kReflectionKeywords.size(); ++k) {
    hits[k] = lower.find(kReflectionKeywords[k]) != std::string::npos;
  }
  return hits;
}

bool detect_reflection(std::string_view text) {
  const auto hits = reflection_keyword_hits(text);
  return std::any_of(hits.begin(), hits.end(), [](bool h) { return h; });
}

double AccuracySplit::overall_acc() const { return ratio(correct, total); }
double AccuracySplit::reflection_acc() const { return ratio(reflective_correct, reflective); }
double AccuracySplit::no_reflection_acc() const {
  return ratio(non_reflective_correct, non_reflective);
}

ResponseLogRecord parse_response_log_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  ResponseLogRecord r;
  try {
    const json& id = j.at("id");
    r.id = id.is_string() ? id.get<std::string>() : id.dump();
    r.question_text = j.value("question_text", std::string{});
    r.response_text = j.at("response_text").get<std::string>();
    r.correct = j.at("correct").get<bool>();
    if (j.contains("entropy") && !j["entropy"].is_null()) {
      const double e = j["entropy"].get<double>();
      if (!std::isfinite(e) || e < 0.0) throw std::invalid_argument("entropy must be finite and >= 0");
      r.entropy = e;
    }
    r.temperature = j.at("temperature").get<double>();
    if (!(r.temperature > 0.0) || !std::isfinite(r.temperature)) {
      throw std::invalid_argument("temperature must be > 0");
    }
    r.model_tag = j.value("model_tag", std::string{});
  } catch (const json::exception& e) {
    throw std::invalid_argument(e.what());
  }
  return r;
}

AnalysisReport analyze_records(std::vector<ResponseLogRecord> records, int malformed_lines) {
  if (records.empty()) throw std::runtime_error("analyze: no valid records");
  // Canonical order makes every floating-point sum independent of input order.
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model_tag, a.temperature, a.entropy, a.correct, a.id, a.question_text,
                    a.response_text) < std::tie(b.model_tag, b.temperature, b.entropy,
                                                b.correct, b.id, b.question_text, b.response_text);
  });

  AnalysisReport report;
  report.malformed_lines = malformed_lines;
  std::map<std::pair<std::string, double>, std::vector<const ResponseLogRecord*>> buckets;
  std::map<std::string, std::vector<const ResponseLogRecord*>> by_model;
  std::map<std::pair<std::string, double>, AccuracySplit> bucket_acc;

  for (const auto& r : records) {
    const auto hits = reflection_keyword_hits(r.response_text);
    const bool reflective = std::any_of(hits.begin(), hits.end(), [](bool h) { return h; });
    for (std::size_t k = 0; k < hits.size(); ++k) report.keyword_hits[k] += hits[k] ? 1 : 0;
    tally(report.accuracy, r, reflective);
    const auto key = std::make_pair(r.model_tag, r.temperature);
    tally(bucket_acc[key], r, reflective);
    buckets[key].push_back(&r);
    by_model[r.model_tag].push_back(&r);
    if (!r.entropy) ++report.missing_entropy;
  }

  for (const auto& [key, members] : buckets) {
    BucketReport b;
    b.model_tag = key.first;
    b.temperature = key.second;
    b.accuracy = bucket_acc[key];
    const auto er = entropy_records(members);
    b.with_entropy = static_cast<int>(er.size());
    b.missing_entropy = static_cast<int>(members.size()) - b.with_entropy;
    if (er.empty()) {
      b.rcm_note = "no records with entropy";
    } else {
      b.calibration = calibration_fractions(er);
      try {
        b.rcm = rcm(er);
      } catch (const std::domain_error& e) {
        b.rcm_note = e.what();
      }
    }
    report.buckets.push_back(std::move(b));
  }
  for (const auto& [tag, members] : by_model) {
    const auto er = entropy_records(members);
    if (!er.empty()) report.calibration_by_model[tag] = calibration_fractions(er);
  }
  return report;
}

AnalysisReport analyze_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read response log '" + path.string() + "'");
  std::vector<ResponseLogRecord> records;
  int malformed = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(parse_response_log_line(line));
    } catch (const std::invalid_argument&) {
      ++malformed;
    }
  }
  if (in.bad()) throw std::runtime_error("error while reading response log '" + path.string() + "'");
  if (records.empty()) {
    throw std::runtime_error("response log '" + path.string() + "' has no valid records (" +
                             std::to_string(malformed) + " malformed lines)");
  }
  return analyze_records(std::move(records), malformed);
}

json report_to_json(const AnalysisReport& report) {
  json keywords = json::object();
  for (std::size_t k = 0; k < kReflectionKeywords.size(); ++k) {
    keywords[std::string(kReflectionKeywords[k])] = report.keyword_hits[k];
  }
  json buckets = json::array();
  for (const auto& b : report.buckets) {
    json jb{{"model_tag", b.model_tag},
            {"temperature", b.temperature},
            {"accuracy", accuracy_json(b.accuracy)},
            {"with_entropy", b.with_entropy},
            {"missing_entropy", b.missing_entropy},
            {"rcm", b.rcm ? json(*b.rcm) : json(nullptr)},
            {"calibration", b.calibration ? calibration_json(*b.calibration) : json(nullptr)}};
    if (!b.rcm) jb["rcm_note"] = b.rcm_note;
    buckets.push_back(std::move(jb));
  }
  json by_model = json::object();
  for (const auto& [tag, c] : report.calibration_by_model) by_model[tag] = calibration_json(c);
  return json{{"accuracy", accuracy_json(report.accuracy)},
              {"malformed_lines", report.malformed_lines},
              {"missing_entropy", report.missing_entropy},
              {"keyword_hits", keywords},
              {"buckets", buckets},
              {"calibration_by_model", by_model}};
}

std::vector<std::string> metrics_columns() {
  return {"step",           "mean_reward",     "advantage_variance", "mean_entropy",
          "objective",      "collapsed_group", "collapsed_groups",   "all_incorrect_before_correction",
          "gec_regenerated", "gec_injected",   "gec_replaced",       "gec_untouched",
          "eval_accuracy",  "wall_ms"};
}

void export_csv(const std::filesystem::path& metrics_path, const std::vector<std::string>& columns,
                const std::filesystem::path& out_path) {
  if (columns.empty()) throw std::invalid_argument("export: no columns selected");
  const auto known = metrics_columns();
  std::vector<std::string> unknown;
  for (const auto& c : columns) {
    if (std::find(known.begin(), known.end(), c) == known.end()) unknown.push_back(c);
  }
  if (!unknown.empty()) {
    std::string msg = "export: unknown column(s):";
    for (const auto& u : unknown) msg += " " + u;
    throw std::invalid_argument(msg);
  }

  std::ifstream in(metrics_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read metrics file '" + metrics_path.string() + "'");
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write CSV file '" + out_path.string() + "'");

  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << csv_field(columns[i]);
  out << "\r\n";

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("metrics file '" + metrics_path.string() + "' line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    if (rec.contains("schema")) continue;
    for (std::size_t i = 0; i < columns.size(); ++i) {
      out << (i ? "," : "") << csv_value(column_value(rec, columns[i]));
    }
    out << "\r\n";
  }
  if (!out) throw std::runtime_error("write failed for CSV file '" + out_path.string() + "'");
}

}  // namespace edge_grpo
