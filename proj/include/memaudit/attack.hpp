// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "memaudit/corpus.hpp"
#include "memaudit/error.hpp"
#include "memaudit/ngram.hpp"
#include "memaudit/parallel.hpp"
#include "memaudit/provider.hpp"
#include "memaudit/suffix_index.hpp"

namespace memaudit {

struct GenerationPool {
  std::vector<std::string> sequences;
  SamplingConfig config;
  std::string model_fingerprint;
  std::uint64_t total_generated_bytes = 0;
};

/// Sequence i is sampled from stream sequence_seed(cfg.seed, i), so the pool
/// does not depend on the thread count.
inline GenerationPool generate_pool(const NgramModel& model, std::uint64_t count, const SamplingConfig& cfg,
                                    unsigned threads = 0) {
  if (count < 1) throw InvalidArgument("pool size must be >= 1");
  cfg.validate();
  GenerationPool pool;
  pool.config = cfg;
  pool.model_fingerprint = model.fingerprint();
  pool.sequences.resize(count);
  parallel_for(count, threads, [&](std::size_t i) { pool.sequences[i] = sample_sequence(model, cfg, i); });
  for (const auto& s : pool.sequences) pool.total_generated_bytes += s.size();
  return pool;
}

struct LabeledSample {
  std::uint64_t seq_index = 0;
  bool member = false;
  std::uint64_t d = 0;  // max training count over matched windows; 0 for non-members
  std::uint64_t length = 0;
  // Scores are NaN for empty sequences, which cannot be scored.
  double ppl_model = std::numeric_limits<double>::quiet_NaN();
  double easiness_compression = std::numeric_limits<double>::quiet_NaN();
  double easiness_reference = std::numeric_limits<double>::quiet_NaN();
  double easiness_lowercase = std::numeric_limits<double>::quiet_NaN();
  double score_compression = std::numeric_limits<double>::quiet_NaN();
  double score_reference = std::numeric_limits<double>::quiet_NaN();
  double score_lowercase = std::numeric_limits<double>::quiet_NaN();

  bool scored() const { return length > 0; }
};

struct Annotation {
  std::vector<LabeledSample> samples;
  std::vector<OverlapRecord> overlaps;
  std::uint64_t member_count = 0;
};

inline IndexedText pool_text(const GenerationPool& pool) {
  if (pool.sequences.empty()) throw InvalidArgument("empty generation pool");
  return IndexedText::from_bodies(pool.sequences);
}

inline Annotation annotate_overlaps(const GenerationPool& pool, const SuffixArray& train, std::uint64_t n,
                                    const OverlapOptions& options = {}) {
  Annotation out;
  out.overlaps = cross_corpus_overlaps(train, pool_text(pool), n, options);
  out.samples.resize(pool.sequences.size());
  for (std::size_t i = 0; i < pool.sequences.size(); ++i) {
    out.samples[i].seq_index = i;
    out.samples[i].length = pool.sequences[i].size();
  }
  for (const auto& r : out.overlaps) {
    auto& s = out.samples[r.sequence_index];
    s.member = true;
    s.d = std::max(s.d, r.training_count);
  }
  for (const auto& s : out.samples) out.member_count += s.member;
  return out;
}

enum class ScoreSpace {
  kRatio,  // easiness / PPL
  kLog,    // log-space: ln(easiness) / ln(PPL), with compression bits used as is
};

inline std::string_view score_space_name(ScoreSpace s) { return s == ScoreSpace::kRatio ? "ratio" : "log"; }

inline ScoreSpace parse_score_space(std::string_view name) {
  if (name == "ratio") return ScoreSpace::kRatio;
  if (name == "log") return ScoreSpace::kLog;
  throw InvalidArgument("unknown score space '" + std::string(name) + "' (expected ratio or log)");
}

inline constexpr int kCompressionLevel = 6;

/// Length in bits of a raw DEFLATE stream (no zlib/gzip wrapper) at the given
/// level, window bits 15, memory level 8, default strategy.
inline double easiness_compression(std::string_view seq, int level = kCompressionLevel) {
  if (seq.empty()) throw InvalidArgument("cannot compress an empty sequence");
  z_stream zs{};
  if (deflateInit2(&zs, level, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY) != Z_OK) throw Error("deflateInit2 failed");
  std::vector<unsigned char> out(deflateBound(&zs, seq.size()) + 16);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(seq.data()));
  zs.avail_in = static_cast<uInt>(seq.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const auto produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error("deflate did not finish");
  return 8.0 * static_cast<double>(produced);
}

inline double easiness_reference(PerplexityProvider& ref, std::string_view seq) { return ref.perplexity(seq); }

inline std::string ascii_lowercase(std::string_view seq) {
  std::string out(seq);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline double easiness_lowercase(PerplexityProvider& model, std::string_view seq) {
  return model.perplexity(ascii_lowercase(seq));
}

/// Membership score; higher means more member-like.
inline double membership_score(double easiness, double ppl_model, ScoreSpace space, bool easiness_is_bits) {
  if (space == ScoreSpace::kRatio) return easiness / ppl_model;
  const double num = easiness_is_bits ? easiness : std::log(easiness);
  const double den = std::log(ppl_model);
  if (!(num > 0.0) || !(den > 0.0)) {
    throw InvalidArgument("log-space scores need perplexities above 1");
  }
  return num / den;
}

struct AttackConfig {
  SamplingConfig sampling;
  std::uint64_t pool_size = 1000;
  std::uint64_t n = 100;
  ScoreSpace space = ScoreSpace::kRatio;
  int compression_level = kCompressionLevel;
  unsigned threads = 0;
  OverlapOptions overlap;

  nlohmann::json to_json() const {
    return {{"scheme", scheme_name(sampling.scheme)},
            {"top_k", sampling.top_k},
            {"temperature", sampling.temperature},
            {"max_length", sampling.max_length},
            {"seed", sampling.seed},
            {"pool_size", pool_size},
            {"n", n},
            {"score_space", score_space_name(space)},
            {"compression_level", compression_level}};
  }
};

struct AttackResult {
  GenerationPool pool;
  Annotation annotation;
  std::uint64_t unscored = 0;  // empty sequences
  std::vector<std::string> warnings;
};

namespace detail {

// Errors from a stage are rethrown with the stage name in front.
template <class F>
decltype(auto) attack_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const ProtocolError& e) {
    throw ProtocolError(std::string(stage) + ": " + e.what(), e.payload());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string(stage) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(std::string(stage) + ": " + e.what());
  }
}

}  // namespace detail

/// Fills the easiness and score columns. The model side is evaluated in
/// parallel; a reference that is not an in-process n-gram is queried
/// sequentially in sequence order.
inline void score_samples(const NgramModel& model, PerplexityProvider& ref, const GenerationPool& pool,
                          std::vector<LabeledSample>& samples, const AttackConfig& cfg) {
  parallel_for(samples.size(), cfg.threads, [&](std::size_t i) {
    auto& s = samples[i];
    const std::string& seq = pool.sequences[s.seq_index];
    if (seq.empty()) return;
    s.ppl_model = model.perplexity(seq);
    s.easiness_compression = easiness_compression(seq, cfg.compression_level);
    s.easiness_lowercase = model.perplexity(ascii_lowercase(seq));
  });
  auto* local_ref = dynamic_cast<NgramPerplexity*>(&ref);
  if (local_ref) {
    parallel_for(samples.size(), cfg.threads, [&](std::size_t i) {
      auto& s = samples[i];
      if (s.scored()) s.easiness_reference = local_ref->model().perplexity(pool.sequences[s.seq_index]);
    });
  } else {
    for (auto& s : samples) {
      if (s.scored()) s.easiness_reference = easiness_reference(ref, pool.sequences[s.seq_index]);
    }
  }
  for (auto& s : samples) {
    if (!s.scored()) continue;
    s.score_compression = membership_score(s.easiness_compression, s.ppl_model, cfg.space, true);
    s.score_reference = membership_score(s.easiness_reference, s.ppl_model, cfg.space, false);
    s.score_lowercase = membership_score(s.easiness_lowercase, s.ppl_model, cfg.space, false);
  }
}

/// generate_pool -> annotate_overlaps -> scores.
inline AttackResult run_attack(const NgramModel& model, const SuffixArray& train, PerplexityProvider& ref,
                               const AttackConfig& cfg) {
  if (cfg.n < 1) throw InvalidArgument("window length must be >= 1");
  AttackResult result;
  if (auto* local = dynamic_cast<NgramPerplexity*>(&ref); local && local->model().fingerprint() == model.fingerprint()) {
    result.warnings.push_back("reference model is the attacked model; reference scores are identically 1");
  }
  result.pool = detail::attack_stage("generate", [&] {
    return generate_pool(model, cfg.pool_size, cfg.sampling, cfg.threads);
  });
  result.annotation = detail::attack_stage("annotate", [&] {
    return annotate_overlaps(result.pool, train, cfg.n, cfg.overlap);
  });
  detail::attack_stage("score", [&] {
    score_samples(model, ref, result.pool, result.annotation.samples, cfg);
    return 0;
  });
  for (const auto& s : result.annotation.samples) result.unscored += !s.scored();
  if (result.unscored > 0) {
    result.warnings.push_back(std::to_string(result.unscored) + " empty sequences left unscored");
  }
  if (result.annotation.member_count == 0) {
    result.warnings.push_back("pool contains no members; AUROC is undefined");
  }
  return result;
}

}  // namespace memaudit
