// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace memaudit::detail {

// Induced-sorting suffix array construction (SA-IS). Symbols are integers in
// [0, upper]; the text is implicitly terminated by a sentinel smaller than
// every symbol, so a suffix that is a prefix of another sorts first.

template <class Index, class Symbol>
std::vector<Index> sa_naive(std::span<const Symbol> s) {
  std::vector<Index> sa(s.size());
  std::iota(sa.begin(), sa.end(), Index{0});
  std::sort(sa.begin(), sa.end(), [&](Index l, Index r) {
    if (l == r) return false;
    while (l < s.size() && r < s.size()) {
      if (s[l] != s[r]) return s[l] < s[r];
      ++l;
      ++r;
    }
    return l == s.size();
  });
  return sa;
}

template <class Index, class Symbol>
std::vector<Index> sa_is(std::span<const Symbol> s, std::size_t upper) {
  constexpr Index kEmpty = std::numeric_limits<Index>::max();
  const std::size_t n = s.size();
  if (n == 0) return {};
  if (n == 1) return {Index{0}};
  if (n == 2) {
    if (s[0] < s[1]) return {Index{0}, Index{1}};
    return {Index{1}, Index{0}};
  }
  if (n < 10) return sa_naive<Index>(s);

  std::vector<Index> sa(n);
  // ls[i]: suffix i is S-type (smaller than suffix i + 1).
  std::vector<bool> ls(n, false);
  for (std::size_t i = n - 1; i-- > 0;) {
    ls[i] = (s[i] == s[i + 1]) ? ls[i + 1] : (s[i] < s[i + 1]);
  }

  // Bucket starts: sum_l[c] is the first L slot of bucket c, sum_s[c] the
  // first S slot.
  std::vector<Index> sum_l(upper + 1, 0), sum_s(upper + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!ls[i]) {
      ++sum_s[s[i]];
    } else {
      // An S-type symbol is never the maximum, so s[i] + 1 <= upper.
      ++sum_l[s[i] + 1];
    }
  }
  for (std::size_t c = 0; c <= upper; ++c) {
    sum_s[c] += sum_l[c];
    if (c < upper) sum_l[c + 1] += sum_s[c];
  }

  auto induce = [&](const std::vector<Index>& lms) {
    std::fill(sa.begin(), sa.end(), kEmpty);
    std::vector<Index> buf(sum_s);
    for (Index d : lms) {
      if (d == n) continue;
      sa[buf[s[d]]++] = d;
    }
    buf = sum_l;
    sa[buf[s[n - 1]]++] = static_cast<Index>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      const Index v = sa[i];
      if (v != kEmpty && v >= 1 && !ls[v - 1]) sa[buf[s[v - 1]]++] = v - 1;
    }
    buf = sum_l;
    for (std::size_t i = n; i-- > 0;) {
      const Index v = sa[i];
      if (v != kEmpty && v >= 1 && ls[v - 1]) {
        // Bucket end of symbol c is the L start of bucket c + 1.
        sa[--buf[s[v - 1] + 1]] = v - 1;
      }
    }
  };

  std::vector<Index> lms_map(n + 1, kEmpty);
  std::vector<Index> lms;
  for (std::size_t i = 1; i < n; ++i) {
    if (!ls[i - 1] && ls[i]) {
      lms_map[i] = static_cast<Index>(lms.size());
      lms.push_back(static_cast<Index>(i));
    }
  }
  const std::size_t m = lms.size();

  induce(lms);

  if (m > 0) {
    std::vector<Index> sorted_lms;
    sorted_lms.reserve(m);
    for (Index v : sa) {
      if (lms_map[v] != kEmpty) sorted_lms.push_back(v);
    }
    std::vector<Index> rec_s(m);
    std::size_t rec_upper = 0;
    rec_s[lms_map[sorted_lms[0]]] = 0;
    for (std::size_t i = 1; i < m; ++i) {
      std::size_t l = sorted_lms[i - 1], r = sorted_lms[i];
      const std::size_t end_l = (lms_map[l] + 1 < m) ? lms[lms_map[l] + 1] : n;
      const std::size_t end_r = (lms_map[r] + 1 < m) ? lms[lms_map[r] + 1] : n;
      bool same = true;
      if (end_l - l != end_r - r) {
        same = false;
      } else {
        while (l < end_l) {
          if (s[l] != s[r]) break;
          ++l;
          ++r;
        }
        if (l == n || r == n || s[l] != s[r]) same = false;
      }
      if (!same) ++rec_upper;
      rec_s[lms_map[sorted_lms[i]]] = static_cast<Index>(rec_upper);
    }

    auto rec_sa = sa_is<Index, Index>(std::span<const Index>(rec_s), rec_upper);
    for (std::size_t i = 0; i < m; ++i) sorted_lms[i] = lms[rec_sa[i]];
    induce(sorted_lms);
  }
  return sa;
}

}  // namespace memaudit::detail
