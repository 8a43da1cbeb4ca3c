// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "memaudit/error.hpp"

namespace memaudit {

/// Reserved byte joining documents in an IndexedText. Never valid inside a
/// document body.
inline constexpr char kSeparator = '\0';

struct Document {
  std::string id;
  std::string body;

  friend bool operator==(const Document&, const Document&) = default;
};

enum class CorpusFormat { kPlain, kJsonl };

inline CorpusFormat parse_corpus_format(std::string_view name) {
  if (name == "plain") return CorpusFormat::kPlain;
  if (name == "jsonl") return CorpusFormat::kJsonl;
  throw InvalidArgument("unknown corpus format '" + std::string(name) + "' (expected plain or jsonl)");
}

inline void check_document(const Document& doc) {
  if (doc.body.find(kSeparator) != std::string::npos) {
    throw InvalidArgument("document '" + doc.id + "' contains the reserved separator byte 0x00");
  }
}

/// Documents joined by single separator bytes, plus the offsets where each
/// document starts.
///
/// Invariants: boundaries are strictly increasing, boundaries[0] == 0 and
/// every separator in bytes() sits at boundaries[i + 1] - 1.
class IndexedText {
 public:
  IndexedText() = default;

  static IndexedText from_documents(std::span<const Document> docs) {
    if (docs.empty()) throw InvalidArgument("cannot concatenate an empty document list");
    IndexedText text;
    std::size_t reserve = docs.size() - 1;
    for (const auto& d : docs) reserve += d.body.size();
    text.bytes_.reserve(reserve);
    text.boundaries_.reserve(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
      check_document(docs[i]);
      if (i > 0) text.bytes_.push_back(kSeparator);
      text.boundaries_.push_back(text.bytes_.size());
      text.bytes_.append(docs[i].body);
      text.total_size_ += docs[i].body.size();
    }
    return text;
  }

  static IndexedText from_bodies(std::span<const std::string> bodies) {
    std::vector<Document> docs;
    docs.reserve(bodies.size());
    for (const auto& b : bodies) docs.push_back({"", b});
    return from_documents(docs);
  }

  std::string_view bytes() const noexcept { return bytes_; }
  std::span<const std::uint64_t> boundaries() const noexcept { return boundaries_; }
  /// Byte count excluding separators.
  std::uint64_t total_size() const noexcept { return total_size_; }
  std::size_t size() const noexcept { return bytes_.size(); }
  std::size_t document_count() const noexcept { return boundaries_.size(); }

  std::uint64_t document_begin(std::size_t doc) const { return boundaries_[doc]; }
  std::uint64_t document_end(std::size_t doc) const {
    return doc + 1 < boundaries_.size() ? boundaries_[doc + 1] - 1 : bytes_.size();
  }
  std::string_view document(std::size_t doc) const {
    const auto b = document_begin(doc);
    return std::string_view(bytes_).substr(b, document_end(doc) - b);
  }

  /// Index of the document containing `offset`. A separator position maps to
  /// the document it terminates.
  std::size_t document_of(std::uint64_t offset) const {
    auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), offset);
    return static_cast<std::size_t>(it - boundaries_.begin()) - 1;
  }

  /// True if [offset, offset + n) lies inside a single document.
  bool window_valid(std::uint64_t offset, std::uint64_t n) const {
    if (n == 0 || offset >= bytes_.size()) return false;
    return offset + n <= document_end(document_of(offset));
  }

  /// Number of valid windows of length n (stride 1, separator-free).
  std::uint64_t window_count(std::uint64_t n) const {
    std::uint64_t total = 0;
    for (std::size_t d = 0; d < boundaries_.size(); ++d) {
      const auto len = document_end(d) - document_begin(d);
      if (len >= n) total += len - n + 1;
    }
    return total;
  }

  /// Splits at separators; the inverse of from_documents up to ids.
  std::vector<std::string> split() const {
    std::vector<std::string> out;
    out.reserve(boundaries_.size());
    for (std::size_t d = 0; d < boundaries_.size(); ++d) out.emplace_back(document(d));
    return out;
  }

 private:
  std::string bytes_;
  std::vector<std::uint64_t> boundaries_;
  std::uint64_t total_size_ = 0;
};

inline IndexedText concatenate(std::span<const Document> docs) { return IndexedText::from_documents(docs); }

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error while reading '" + path + "'");
  return data;
}

inline bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

}  // namespace detail

/// Parses JSON-Lines content. `source` names the input in diagnostics.
/// Blank lines are skipped.
inline std::vector<Document> parse_jsonl(std::string_view content, const std::string& source) {
  std::vector<Document> docs;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    const auto line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (detail::blank(line)) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": malformed JSON line: " + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": missing string field \"text\"");
    }
    Document doc;
    if (j.contains("id") && j["id"].is_string()) {
      doc.id = j["id"].get<std::string>();
    } else {
      doc.id = source + ":" + std::to_string(line_no);
    }
    doc.body = j["text"].get<std::string>();
    check_document(doc);
    docs.push_back(std::move(doc));
  }
  return docs;
}

/// Reads documents from files in the given order. A plain file is one
/// document; a jsonl file yields one document per line.
inline std::vector<Document> load_corpus(std::span<const std::string> paths, CorpusFormat format) {
  std::vector<Document> docs;
  for (const auto& path : paths) {
    std::string content = detail::read_file(path);
    if (format == CorpusFormat::kPlain) {
      Document doc{path, std::move(content)};
      check_document(doc);
      docs.push_back(std::move(doc));
    } else {
      auto part = parse_jsonl(content, path);
      docs.insert(docs.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
  }
  return docs;
}

/// Writes documents as JSON-Lines ({"id":..., "text":...}). Bytes that are not
/// valid UTF-8 are replaced, so only UTF-8 corpora round-trip exactly.
inline void write_jsonl(const std::string& path, std::span<const Document> docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& d : docs) {
    nlohmann::json j = {{"id", d.id}, {"text", d.body}};
    out << j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

}  // namespace memaudit
