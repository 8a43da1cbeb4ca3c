// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

// Slow reference implementations used as test oracles. Nothing here shares
// code with the library.

#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace oracle {

inline std::vector<std::uint64_t> suffix_array(std::string_view s) {
  std::vector<std::uint64_t> sa(s.size());
  std::iota(sa.begin(), sa.end(), 0);
  std::sort(sa.begin(), sa.end(), [&](std::uint64_t a, std::uint64_t b) { return s.substr(a) < s.substr(b); });
  return sa;
}

inline std::uint64_t common_prefix(std::string_view a, std::string_view b) {
  std::uint64_t i = 0;
  while (i < a.size() && i < b.size() && a[i] == b[i]) ++i;
  return i;
}

inline std::vector<std::uint64_t> lcp(std::string_view s, const std::vector<std::uint64_t>& sa) {
  std::vector<std::uint64_t> out(sa.size(), 0);
  for (std::size_t i = 1; i < sa.size(); ++i) out[i] = common_prefix(s.substr(sa[i - 1]), s.substr(sa[i]));
  return out;
}

inline std::uint64_t count_naive(std::string_view text, std::string_view pattern) {
  if (pattern.find('\0') != std::string_view::npos) return 0;
  std::uint64_t n = 0;
  for (std::size_t i = 0; i + pattern.size() <= text.size(); ++i) {
    if (text.substr(i, pattern.size()) == pattern) ++n;
  }
  return n;
}

// Window -> count over stride-1 windows that contain no 0x00 byte.
inline std::map<std::string, std::uint64_t> window_counts(std::string_view text, std::size_t n) {
  std::map<std::string, std::uint64_t> counts;
  for (std::size_t i = 0; i + n <= text.size(); ++i) {
    auto w = text.substr(i, n);
    if (w.find('\0') != std::string_view::npos) continue;
    ++counts[std::string(w)];
  }
  return counts;
}

inline std::map<std::uint64_t, std::uint64_t> histogram(const std::map<std::string, std::uint64_t>& counts) {
  std::map<std::uint64_t, std::uint64_t> h;
  for (const auto& [w, c] : counts) ++h[c];
  return h;
}

inline double auroc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double num = 0;
  for (double p : pos) {
    for (double q : neg) {
      if (p > q) {
        num += 1.0;
      } else if (p == q) {
        num += 0.5;
      }
    }
  }
  return num / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

// Tries every candidate threshold (each negative score and -inf) and keeps
// the smallest one whose false-positive fraction is within fpr.
inline double tpr_at_fpr(const std::vector<double>& pos, const std::vector<double>& neg, double fpr) {
  std::vector<double> candidates = neg;
  candidates.push_back(-std::numeric_limits<double>::infinity());
  double best = std::numeric_limits<double>::infinity();
  for (double t : candidates) {
    std::size_t fp = 0;
    for (double q : neg) fp += q > t;
    if (static_cast<double>(fp) <= fpr * static_cast<double>(neg.size())) best = std::min(best, t);
  }
  std::size_t tp = 0;
  for (double p : pos) tp += p > best;
  return static_cast<double>(tp) / static_cast<double>(pos.size());
}

inline std::string random_bytes(std::mt19937_64& rng, std::size_t len, unsigned alphabet, unsigned first = 0) {
  std::string s(len, '\0');
  for (auto& c : s) c = static_cast<char>(first + rng() % alphabet);
  return s;
}

}  // namespace oracle
