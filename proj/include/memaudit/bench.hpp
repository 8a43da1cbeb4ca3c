// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "memaudit/attack.hpp"
#include "memaudit/benchmark.hpp"
#include "memaudit/dedup.hpp"
#include "memaudit/metrics.hpp"
#include "memaudit/ngram.hpp"
#include "memaudit/provider.hpp"
#include "memaudit/report.hpp"
#include "memaudit/suffix_index.hpp"

namespace memaudit {

/// Raw-versus-deduplicated comparison on a planted-canary benchmark.
struct BenchConfig {
  CanarySpec spec;
  std::uint32_t order = 8;
  double smoothing = 0.01;
  std::uint64_t min_len = 50;
  AttackConfig attack;  // pool_size 0 means one max-length sequence per max_length training bytes
  double fpr = 0.001;
  std::vector<std::uint64_t> edges = default_bucket_edges();
  std::uint64_t reference_size = 0;  // 0 means spec.background_size

  nlohmann::json to_json() const {
    return {{"benchmark", spec.to_json()},
            {"order", order},
            {"smoothing", smoothing},
            {"min_len", min_len},
            {"attack", attack.to_json()},
            {"fpr", fpr},
            {"bucket_edges", edges},
            {"reference_size", reference_size},
            {"reference", "ngram trained on an independent background of the same source"}};
  }
};

struct BenchRun {
  std::string name;  // "raw" or "dedup"
  std::string fingerprint;
  std::uint64_t training_bytes = 0;
  AttackReport report;
};

struct BenchResult {
  Benchmark benchmark;
  DedupReport dedup;
  std::string reference_fingerprint;
  std::vector<BenchRun> runs;
  nlohmann::json config;
};

namespace detail {

inline std::uint64_t total_bytes(const std::vector<Document>& docs) {
  std::uint64_t n = 0;
  for (const auto& d : docs) n += d.body.size();
  return n;
}

// The model vocabulary always covers the benchmark alphabet so lowercased
// sequences stay in vocabulary after deduplication removes text.
inline BenchRun attack_corpus(const std::string& name, const std::vector<Document>& docs, const BenchConfig& cfg,
                              const AttackConfig& attack, PerplexityProvider& ref) {
  auto text = std::make_shared<const IndexedText>(concatenate(docs));
  const auto model = train_ngram(*text, cfg.order, cfg.smoothing, cfg.spec.alphabet);
  const auto sa = build_suffix_array(text);
  const auto lcp = build_lcp_array(sa);
  const auto profile = window_duplication_profile(sa, lcp, attack.n);
  const auto result = run_attack(model, sa, ref, attack);
  BenchRun run;
  run.name = name;
  run.fingerprint = model.fingerprint();
  run.training_bytes = text->total_size();
  nlohmann::json echo = cfg.to_json();
  echo["model"] = name;
  echo["attack"]["pool_size"] = attack.pool_size;
  run.report = build_report(result, profile, *text, cfg.fpr, cfg.edges, std::move(echo));
  return run;
}

}  // namespace detail

inline BenchResult run_bench(const BenchConfig& cfg) {
  BenchResult out;
  out.benchmark = build_synthetic_benchmark(cfg.spec);
  const auto& raw_docs = out.benchmark.documents;

  auto dedup = exact_substring_dedup(raw_docs, cfg.min_len);
  out.dedup = std::move(dedup.report);

  const std::uint64_t ref_size = cfg.reference_size ? cfg.reference_size : cfg.spec.background_size;
  const auto ref_docs = build_reference_corpus(cfg.spec, ref_size);
  auto ref_model = std::make_shared<const NgramModel>(
      train_ngram(concatenate(ref_docs), cfg.order, cfg.smoothing, cfg.spec.alphabet));
  out.reference_fingerprint = ref_model->fingerprint();
  NgramPerplexity ref(ref_model);

  AttackConfig attack = cfg.attack;
  if (attack.pool_size == 0) {
    const std::uint64_t per = std::max<std::uint64_t>(attack.sampling.max_length, 1);
    attack.pool_size = std::max<std::uint64_t>(1, (detail::total_bytes(raw_docs) + per - 1) / per);
  }
  out.config = cfg.to_json();
  out.config["attack"]["pool_size"] = attack.pool_size;

  out.runs.push_back(detail::attack_corpus("raw", raw_docs, cfg, attack, ref));
  if (dedup.documents.empty()) throw Error("deduplication removed every document");
  out.runs.push_back(detail::attack_corpus("dedup", dedup.documents, cfg, attack, ref));
  return out;
}

/// Summary with one Count/Percent row per model.
inline nlohmann::json bench_json(const BenchResult& r) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& run : r.runs) {
    table.push_back({{"model", run.name},
                     {"fingerprint", run.fingerprint},
                     {"training_bytes", run.training_bytes},
                     {"count", run.report.count},
                     {"percent", run.report.percent},
                     {"train_unique_windows", run.report.train_unique_windows},
                     {"members", run.report.members}});
  }
  nlohmann::json ratio = nullptr;
  if (r.runs.size() == 2 && r.runs[1].report.count > 0) {
    ratio = static_cast<double>(r.runs[0].report.count) / static_cast<double>(r.runs[1].report.count);
  }
  auto dedup = r.dedup.to_json();
  dedup.erase("spans");
  dedup["span_count"] = r.dedup.spans.size();
  return {{"schema_version", kReportSchemaVersion},
          {"config", r.config},
          {"benchmark",
           {{"documents", r.benchmark.documents.size()},
            {"canaries", r.benchmark.ledger.entries.size()},
            {"attempts", r.benchmark.attempts},
            {"lexicon", r.benchmark.lexicon}}},
          {"dedup", dedup},
          {"reference_fingerprint", r.reference_fingerprint},
          {"table", table},
          {"count_ratio_raw_over_dedup", ratio}};
}

/// report.json with both models, ledger.json, and one attack report
/// directory per model.
inline std::vector<std::filesystem::path> emit_bench(const BenchResult& r, const std::filesystem::path& dir) {
  detail::ensure_directory(dir);
  std::vector<std::filesystem::path> paths = {dir / "report.json", dir / "ledger.json"};
  detail::write_text(paths[0], bench_json(r).dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n");
  detail::write_text(paths[1], r.benchmark.ledger.to_json().dump(2, ' ', false,
                                                                   nlohmann::json::error_handler_t::replace) + "\n");
  for (const auto& run : r.runs) {
    auto sub = emit_report(run.report, dir / run.name);
    paths.insert(paths.end(), sub.begin(), sub.end());
  }
  return paths;
}

}  // namespace memaudit
