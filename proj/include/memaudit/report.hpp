// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "memaudit/attack.hpp"
#include "memaudit/codec.hpp"
#include "memaudit/error.hpp"
#include "memaudit/metrics.hpp"

namespace memaudit {

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::string optional_csv(const std::optional<double>& v) { return v ? format_double(*v) : "undefined"; }

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

// First line of every CSV: "# " followed by the schema version and config.
inline std::string csv_preamble(const nlohmann::json& config) {
  return "# " + nlohmann::json({{"schema_version", kReportSchemaVersion}, {"config", config}}).dump() + "\n";
}

}  // namespace detail

inline nlohmann::json report_json(const AttackReport& r) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : r.curve.points) {
    points.push_back({{"d", p.d}, {"expected", p.expected}, {"unique", p.unique}, {"hits", p.hits}});
  }
  nlohmann::json slope = nullptr;
  if (r.slope) {
    slope = {{"slope", r.slope->slope},
             {"intercept", r.slope->intercept},
             {"used_points", r.slope->used_points},
             {"excluded_points", r.slope->excluded_points}};
  }
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : r.methods) {
    methods.push_back({{"method", method_name(m.method)},
                       {"auroc", detail::optional_json(m.auroc)},
                       {"tpr_at_fpr", detail::optional_json(m.tpr)},
                       {"bucket_overflow", m.buckets.overflow}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"config", r.config},
          {"n", r.n},
          {"training_data_generated",
           {{"count", r.count}, {"percent", r.percent}, {"train_unique_windows", r.train_unique_windows}}},
          {"sizes",
           {{"train_window_positions", r.train_window_positions},
            {"generated_window_positions", r.generated_window_positions},
            {"generated_bytes", r.generated_bytes},
            {"pool_size", r.pool_size}}},
          {"samples", {{"members", r.members}, {"non_members", r.non_members}, {"unscored", r.unscored}}},
          {"curve",
           {{"normalization", "per unique training window, scaled by train/generated window positions"},
            {"scaling", r.curve.scaling},
            {"slope", slope},
            {"points", points}}},
          {"fpr", r.fpr},
          {"methods", methods},
          {"warnings", r.warnings}};
}

inline std::string curve_csv(const AttackReport& r) {
  std::ostringstream out;
  out << detail::csv_preamble(r.config) << "d,expected,unique,hits,perfect_memorization\n";
  for (const auto& p : r.curve.points) {
    out << p.d << ',' << format_double(p.expected) << ',' << p.unique << ',' << p.hits << ',' << p.d << '\n';
  }
  return out.str();
}

inline std::string buckets_csv(const AttackReport& r) {
  std::ostringstream out;
  out << detail::csv_preamble(r.config) << "method,d_lo,d_hi,positives,negatives,auroc,tpr_at_fpr\n";
  for (const auto& m : r.methods) {
    for (const auto& row : m.buckets.rows) {
      out << method_name(m.method) << ',' << row.lo << ',' << row.hi << ',' << row.positives << ',' << row.negatives
          << ',' << detail::optional_csv(row.auroc) << ',' << detail::optional_csv(row.tpr) << '\n';
    }
  }
  return out.str();
}

inline std::string samples_csv(const AttackReport& r) {
  std::ostringstream out;
  out << detail::csv_preamble(r.config)
      << "seq_index,label,d,len,ppl_model,easiness_compression,easiness_reference,easiness_lowercase,"
         "score_compression,score_reference,score_lowercase\n";
  for (const auto& s : r.samples) {
    out << s.seq_index << ',' << (s.member ? "member" : "non-member") << ',' << s.d << ',' << s.length << ','
        << format_double(s.ppl_model) << ',' << format_double(s.easiness_compression) << ','
        << format_double(s.easiness_reference) << ',' << format_double(s.easiness_lowercase) << ','
        << format_double(s.score_compression) << ',' << format_double(s.score_reference) << ','
        << format_double(s.score_lowercase) << '\n';
  }
  return out.str();
}

/// Writes report.json, curve.csv, buckets.csv and samples.csv into `dir`.
inline std::vector<std::filesystem::path> emit_report(const AttackReport& r, const std::filesystem::path& dir) {
  detail::ensure_directory(dir);
  std::vector<std::filesystem::path> paths = {dir / "report.json", dir / "curve.csv", dir / "buckets.csv",
                                              dir / "samples.csv"};
  detail::write_text(paths[0], report_json(r).dump(2) + "\n");
  detail::write_text(paths[1], curve_csv(r));
  detail::write_text(paths[2], buckets_csv(r));
  detail::write_text(paths[3], samples_csv(r));
  return paths;
}

}  // namespace memaudit
