// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "memaudit/corpus.hpp"
#include "memaudit/error.hpp"
#include "memaudit/suffix_index.hpp"

namespace memaudit {

struct ByteSpan {
  std::uint64_t begin;
  std::uint64_t end;

  friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

struct DedupReport {
  std::uint64_t min_len = 0;
  std::uint64_t bytes_in = 0;
  std::uint64_t bytes_removed = 0;
  std::uint64_t documents_in = 0;
  std::uint64_t documents_out = 0;
  std::uint64_t documents_dropped = 0;
  std::uint64_t passes = 0;
  // Removed ranges as offsets into the concatenation of the input documents
  // (separator bytes included in the offset arithmetic).
  std::vector<ByteSpan> spans;

  nlohmann::json to_json() const {
    nlohmann::json spans_json = nlohmann::json::array();
    for (const auto& s : spans) spans_json.push_back({s.begin, s.end});
    return {{"schema_version", 1},
            {"min_len", min_len},
            {"bytes_in", bytes_in},
            {"bytes_removed", bytes_removed},
            {"documents_in", documents_in},
            {"documents_out", documents_out},
            {"documents_dropped", documents_dropped},
            {"passes", passes},
            {"spans", std::move(spans_json)}};
  }
};

struct DedupResult {
  std::vector<Document> documents;
  DedupReport report;
};

namespace detail {

struct DedupDoc {
  std::size_t source;  // index in the input list
  std::string body;
  std::vector<ByteSpan> kept;  // surviving ranges, local to the input body
};

// Removes, for every repeated window of length min_len, all occurrences after
// the first in corpus order. Returns false when nothing repeats.
inline bool dedup_pass(std::vector<DedupDoc>& docs, std::uint64_t min_len) {
  std::vector<std::string> bodies;
  bodies.reserve(docs.size());
  for (const auto& d : docs) bodies.push_back(d.body);
  auto text = std::make_shared<const IndexedText>(IndexedText::from_bodies(bodies));
  bodies.clear();
  bodies.shrink_to_fit();

  const auto sa = build_suffix_array(text);
  const auto lcp = build_lcp_array(sa);
  std::vector<std::int32_t> cover(text->size() + 1, 0);
  bool any = false;
  detail::visit_pair(sa, lcp, [&](auto sa_span, auto lcp_span) {
    detail::for_each_window_group(*text, sa_span, lcp_span, min_len, [&](std::size_t first, std::size_t last) {
      if (last - first < 2) return;
      any = true;
      std::uint64_t keep = sa_span[first];
      for (std::size_t i = first + 1; i < last; ++i) keep = std::min<std::uint64_t>(keep, sa_span[i]);
      for (std::size_t i = first; i < last; ++i) {
        const std::uint64_t p = sa_span[i];
        if (p == keep) continue;
        ++cover[p];
        --cover[p + min_len];
      }
    });
  });
  if (!any) return false;

  std::int32_t depth = 0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    auto& doc = docs[d];
    const std::uint64_t base = text->document_begin(d);
    // Separators are never covered, so depth is 0 at each document start.
    std::string body;
    std::vector<ByteSpan> kept;
    std::size_t span_idx = 0;
    std::uint64_t span_pos = doc.kept.empty() ? 0 : doc.kept[0].begin;
    for (std::uint64_t j = 0; j < doc.body.size(); ++j) {
      depth += cover[base + j];
      // Original offset of body byte j.
      while (span_pos >= doc.kept[span_idx].end) {
        ++span_idx;
        span_pos = doc.kept[span_idx].begin;
      }
      const std::uint64_t orig = span_pos++;
      if (depth > 0) continue;
      body.push_back(doc.body[j]);
      if (!kept.empty() && kept.back().end == orig) {
        ++kept.back().end;
      } else {
        kept.push_back({orig, orig + 1});
      }
    }
    depth += cover[base + doc.body.size()];
    doc.body = std::move(body);
    doc.kept = std::move(kept);
  }
  return true;
}

}  // namespace detail

/// Exact-substring deduplication with a byte-length threshold.
///
/// Every window of min_len bytes that occurs more than once keeps only its
/// first occurrence in corpus order; the union of the later occurrences is
/// cut out of their documents. Cutting can splice new repeats together, so
/// passes repeat until no window of min_len bytes repeats, which also makes
/// the operation idempotent. Documents left empty are dropped.
inline DedupResult exact_substring_dedup(std::span<const Document> input, std::uint64_t min_len) {
  if (min_len < 2) throw InvalidArgument("min_len must be >= 2");
  DedupResult result;
  auto& report = result.report;
  report.min_len = min_len;
  report.documents_in = input.size();

  std::vector<detail::DedupDoc> docs;
  std::vector<std::uint64_t> input_offset(input.size());
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < input.size(); ++i) {
    check_document(input[i]);
    input_offset[i] = offset;
    offset += input[i].body.size() + 1;
    report.bytes_in += input[i].body.size();
    if (input[i].body.empty()) continue;
    docs.push_back({i, input[i].body, {{0, input[i].body.size()}}});
  }

  while (!docs.empty() && detail::dedup_pass(docs, min_len)) {
    ++report.passes;
    std::erase_if(docs, [](const detail::DedupDoc& d) { return d.body.empty(); });
  }

  // Removed spans are the gaps between kept ranges of each source document.
  std::vector<const detail::DedupDoc*> by_source(input.size(), nullptr);
  for (const auto& d : docs) by_source[d.source] = &d;
  for (std::size_t i = 0; i < input.size(); ++i) {
    const std::uint64_t len = input[i].body.size();
    std::uint64_t cursor = 0;
    if (by_source[i]) {
      for (const auto& k : by_source[i]->kept) {
        if (k.begin > cursor) report.spans.push_back({input_offset[i] + cursor, input_offset[i] + k.begin});
        cursor = k.end;
      }
    }
    if (len > cursor) report.spans.push_back({input_offset[i] + cursor, input_offset[i] + len});
  }

  for (auto& d : docs) {
    result.documents.push_back({input[d.source].id, std::move(d.body)});
  }
  std::uint64_t bytes_out = 0;
  for (const auto& d : result.documents) bytes_out += d.body.size();
  report.bytes_removed = report.bytes_in - bytes_out;
  report.documents_out = result.documents.size();
  report.documents_dropped = report.documents_in - report.documents_out;
  return result;
}

}  // namespace memaudit
