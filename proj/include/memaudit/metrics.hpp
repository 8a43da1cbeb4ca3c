// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "memaudit/attack.hpp"
#include "memaudit/error.hpp"
#include "memaudit/rng.hpp"
#include "memaudit/suffix_index.hpp"

namespace memaudit {

struct CurvePoint {
  std::uint64_t d = 0;
  double expected = 0.0;
  std::uint64_t unique = 0;  // unique training windows with count d
  std::uint64_t hits = 0;    // generated windows matching one of them
};

struct GenerationCurve {
  std::vector<CurvePoint> points;
  double scaling = 1.0;  // train size / generated size

  std::optional<double> expected_at(std::uint64_t d) const {
    for (const auto& p : points) {
      if (p.d == d) return p.expected;
    }
    return std::nullopt;
  }
};

/// expected(d) = hits(d) / unique(d) * train_size / generated_size.
///
/// Sizes are whatever unit the caller measures both texts in; the attack
/// pipeline passes valid N-window positions, which makes a sampler that
/// draws training windows uniformly land exactly on expected(d) = d.
inline GenerationCurve expected_generation_curve(const std::vector<OverlapRecord>& overlaps,
                                                 const DuplicationProfile& profile, double generated_size,
                                                 double train_size) {
  if (!(generated_size > 0.0)) throw InvalidArgument("generated size must be > 0");
  GenerationCurve curve;
  curve.scaling = train_size / generated_size;
  std::map<std::uint64_t, std::uint64_t> hits;
  for (const auto& r : overlaps) ++hits[r.training_count];
  for (const auto& [d, unique] : profile.histogram()) {
    CurvePoint p;
    p.d = d;
    p.unique = unique;
    p.hits = hits.count(d) ? hits.at(d) : 0;
    p.expected = static_cast<double>(p.hits) / static_cast<double>(unique) * curve.scaling;
    curve.points.push_back(p);
  }
  return curve;
}

/// `count` windows of length n drawn uniformly, with replacement, from the
/// valid window positions of `text`. Fed through the overlap and curve
/// pipeline, this sampler regenerates every training window exactly at its
/// training frequency.
inline std::vector<std::string> sample_training_windows(const IndexedText& text, std::uint64_t n,
                                                        std::uint64_t count, std::uint64_t seed) {
  std::vector<std::uint64_t> cumulative;  // windows in documents [0, i]
  std::uint64_t total = 0;
  for (std::size_t d = 0; d < text.document_count(); ++d) {
    const auto len = text.document_end(d) - text.document_begin(d);
    total += len >= n ? len - n + 1 : 0;
    cumulative.push_back(total);
  }
  if (total == 0) throw InvalidArgument("text holds no window of length " + std::to_string(n));
  Rng rng(derive_seed(seed, streams::kWindowSampling));
  std::vector<std::string> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t k = rng.uniform_index(total);
    const auto doc = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), k) -
                                              cumulative.begin());
    const std::uint64_t before = doc == 0 ? 0 : cumulative[doc - 1];
    out.emplace_back(text.bytes().substr(text.document_begin(doc) + (k - before), n));
  }
  return out;
}

inline GenerationCurve perfect_memorization_curve(const std::vector<std::uint64_t>& d_values) {
  std::set<std::uint64_t> sorted(d_values.begin(), d_values.end());
  GenerationCurve curve;
  for (auto d : sorted) {
    if (d < 1) throw InvalidArgument("duplication levels must be >= 1");
    curve.points.push_back({d, static_cast<double>(d), 1, 0});
  }
  return curve;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::uint64_t used_points = 0;
  std::uint64_t excluded_points = 0;  // expected == 0
};

/// Least squares of ln(expected) on ln(d), each point weighted by its unique
/// window count.
inline SlopeFit loglog_slope(const GenerationCurve& curve) {
  SlopeFit fit;
  double sw = 0, sx = 0, sy = 0;
  for (const auto& p : curve.points) {
    if (!(p.expected > 0.0)) {
      ++fit.excluded_points;
      continue;
    }
    const double w = static_cast<double>(std::max<std::uint64_t>(p.unique, 1));
    sw += w;
    sx += w * std::log(static_cast<double>(p.d));
    sy += w * std::log(p.expected);
    ++fit.used_points;
  }
  if (fit.used_points < 2) throw InvalidArgument("slope needs at least 2 points with expected > 0");
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (const auto& p : curve.points) {
    if (!(p.expected > 0.0)) continue;
    const double w = static_cast<double>(std::max<std::uint64_t>(p.unique, 1));
    const double dx = std::log(static_cast<double>(p.d)) - mx;
    sxx += w * dx * dx;
    sxy += w * dx * (std::log(p.expected) - my);
  }
  if (!(sxx > 0.0)) throw InvalidArgument("slope needs at least 2 distinct d values");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

/// Mann-Whitney AUROC with ties counted as one half; nullopt when either side
/// is empty.
inline std::optional<double> auroc(std::vector<double> pos, std::vector<double> neg) {
  if (pos.empty() || neg.empty()) return std::nullopt;
  std::sort(neg.begin(), neg.end());
  // 2 * (wins + ties / 2) stays an exact integer.
  std::uint64_t twice = 0;
  for (double p : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(lo, neg.end(), p);
    twice += 2 * static_cast<std::uint64_t>(lo - neg.begin()) + static_cast<std::uint64_t>(hi - lo);
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Step-function TPR: the threshold t is the smallest score with at most
/// fpr * |neg| negatives strictly above it; returns the fraction of pos > t.
inline std::optional<double> tpr_at_fpr(const std::vector<double>& pos, std::vector<double> neg, double fpr) {
  if (!(fpr > 0.0 && fpr < 1.0)) throw InvalidArgument("fpr must lie in (0, 1)");
  if (pos.empty() || neg.empty()) return std::nullopt;
  const double budget = fpr * static_cast<double>(neg.size());
  std::size_t allowed = static_cast<std::size_t>(std::floor(budget));
  while (allowed > 0 && static_cast<double>(allowed) > budget) --allowed;
  while (allowed + 1 <= neg.size() && static_cast<double>(allowed + 1) <= budget) ++allowed;
  std::sort(neg.begin(), neg.end(), std::greater<>());
  const double threshold = allowed < neg.size() ? neg[allowed] : -std::numeric_limits<double>::infinity();
  std::size_t tp = 0;
  for (double p : pos) tp += p > threshold;
  return static_cast<double>(tp) / static_cast<double>(pos.size());
}

/// Powers of two from 1 to 2048: buckets [1,2), [2,4), ..., [1024,2048).
inline std::vector<std::uint64_t> default_bucket_edges() {
  std::vector<std::uint64_t> edges;
  for (std::uint64_t e = 1; e <= 2048; e *= 2) edges.push_back(e);
  return edges;
}

enum class Method { kCompression, kReference, kLowercase };
inline constexpr Method kMethods[] = {Method::kCompression, Method::kReference, Method::kLowercase};

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::kCompression: return "compression";
    case Method::kReference: return "reference";
    case Method::kLowercase: return "lowercase";
  }
  return "?";
}

inline double score_of(const LabeledSample& s, Method m) {
  switch (m) {
    case Method::kCompression: return s.score_compression;
    case Method::kReference: return s.score_reference;
    case Method::kLowercase: return s.score_lowercase;
  }
  return 0.0;
}

struct BucketRow {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;  // exclusive
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  std::optional<double> auroc;
  std::optional<double> tpr;
};

struct BucketedMetric {
  Method method = Method::kCompression;
  std::vector<BucketRow> rows;
  std::uint64_t overflow = 0;  // members with d >= last edge, kept in the last bucket
};

/// Members bucketed by d against the shared non-member set. Unscored samples
/// are skipped.
inline BucketedMetric bucket_by_duplication(const std::vector<LabeledSample>& samples,
                                            const std::vector<std::uint64_t>& edges, Method method, double fpr) {
  if (edges.size() < 2 || edges.front() != 1) throw InvalidArgument("bucket edges must start at 1 with >= 2 entries");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] <= edges[i - 1]) throw InvalidArgument("bucket edges must be strictly increasing");
  }
  BucketedMetric out;
  out.method = method;
  std::vector<std::vector<double>> pos(edges.size() - 1);
  std::vector<double> neg;
  for (const auto& s : samples) {
    if (!s.scored()) continue;
    const double v = score_of(s, method);
    if (!s.member) {
      neg.push_back(v);
      continue;
    }
    auto it = std::upper_bound(edges.begin(), edges.end(), s.d);
    std::size_t b = static_cast<std::size_t>(it - edges.begin()) - 1;
    if (b >= pos.size()) {
      b = pos.size() - 1;
      ++out.overflow;
    }
    pos[b].push_back(v);
  }
  for (std::size_t b = 0; b < pos.size(); ++b) {
    BucketRow row;
    row.lo = edges[b];
    row.hi = edges[b + 1];
    row.positives = pos[b].size();
    row.negatives = neg.size();
    row.auroc = auroc(pos[b], neg);
    row.tpr = tpr_at_fpr(pos[b], neg, fpr);
    out.rows.push_back(row);
  }
  return out;
}

/// Scores of scored members with d in [lo, hi) and of scored non-members.
inline std::pair<std::vector<double>, std::vector<double>> split_scores(const std::vector<LabeledSample>& samples,
                                                                        Method method, std::uint64_t lo = 1,
                                                                        std::uint64_t hi = UINT64_MAX) {
  std::vector<double> pos, neg;
  for (const auto& s : samples) {
    if (!s.scored()) continue;
    if (!s.member) {
      neg.push_back(score_of(s, method));
    } else if (s.d >= lo && s.d < hi) {
      pos.push_back(score_of(s, method));
    }
  }
  return {std::move(pos), std::move(neg)};
}

struct MethodSummary {
  Method method = Method::kCompression;
  std::optional<double> auroc;
  std::optional<double> tpr;
  BucketedMetric buckets;
};

struct AttackReport {
  nlohmann::json config;  // full run configuration echo
  std::uint64_t n = 0;
  // Unique training N-windows generated at least once, and their share of all
  // unique training N-windows.
  std::uint64_t count = 0;
  double percent = 0.0;
  std::uint64_t train_unique_windows = 0;
  std::uint64_t train_window_positions = 0;
  std::uint64_t generated_window_positions = 0;
  std::uint64_t generated_bytes = 0;
  std::uint64_t pool_size = 0;
  std::uint64_t members = 0;
  std::uint64_t non_members = 0;
  std::uint64_t unscored = 0;
  double fpr = 0.001;
  GenerationCurve curve;
  std::optional<SlopeFit> slope;
  std::vector<MethodSummary> methods;
  std::vector<LabeledSample> samples;
  std::vector<std::string> warnings;
};

/// Distinct training windows among the overlap records.
inline std::uint64_t generated_training_windows(const std::vector<OverlapRecord>& overlaps) {
  std::vector<std::uint64_t> offsets;
  offsets.reserve(overlaps.size());
  for (const auto& r : overlaps) offsets.push_back(r.training_offset);
  std::sort(offsets.begin(), offsets.end());
  return static_cast<std::uint64_t>(std::unique(offsets.begin(), offsets.end()) - offsets.begin());
}

inline AttackReport build_report(const AttackResult& result, const DuplicationProfile& profile,
                                 const IndexedText& train_text, double fpr,
                                 const std::vector<std::uint64_t>& edges, nlohmann::json config) {
  AttackReport r;
  r.config = std::move(config);
  r.n = profile.window_length();
  r.fpr = fpr;
  r.samples = result.annotation.samples;
  r.warnings = result.warnings;
  r.pool_size = result.pool.sequences.size();
  r.generated_bytes = result.pool.total_generated_bytes;
  r.unscored = result.unscored;
  for (const auto& s : r.samples) {
    if (s.member) {
      ++r.members;
    } else {
      ++r.non_members;
    }
  }
  r.train_unique_windows = profile.unique_windows();
  r.train_window_positions = train_text.window_count(r.n);
  r.count = generated_training_windows(result.annotation.overlaps);
  r.percent = r.train_unique_windows ? 100.0 * static_cast<double>(r.count) / static_cast<double>(r.train_unique_windows)
                                     : 0.0;

  r.generated_window_positions = pool_text(result.pool).window_count(r.n);
  if (r.generated_window_positions > 0) {
    r.curve = expected_generation_curve(result.annotation.overlaps, profile,
                                        static_cast<double>(r.generated_window_positions),
                                        static_cast<double>(r.train_window_positions));
    try {
      r.slope = loglog_slope(r.curve);
    } catch (const InvalidArgument&) {
      r.warnings.push_back("log-log slope undefined: fewer than 2 curve points with hits");
    }
  } else {
    r.warnings.push_back("no generated sequence is long enough to hold an N-window");
  }

  std::uint64_t scored_negatives = 0;
  for (const auto& s : r.samples) scored_negatives += s.scored() && !s.member;
  if (scored_negatives > 0 && static_cast<double>(scored_negatives) < 1.0 / fpr) {
    r.warnings.push_back("fewer than 1/fpr non-members; TPR at the requested FPR is coarse");
  }
  for (Method m : kMethods) {
    MethodSummary ms;
    ms.method = m;
    auto [pos, neg] = split_scores(r.samples, m);
    ms.auroc = auroc(pos, neg);
    ms.tpr = tpr_at_fpr(pos, neg, fpr);
    ms.buckets = bucket_by_duplication(r.samples, edges, m, fpr);
    r.methods.push_back(std::move(ms));
  }
  return r;
}

}  // namespace memaudit
