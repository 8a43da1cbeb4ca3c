// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "memaudit/corpus.hpp"
#include "memaudit/error.hpp"
#include "memaudit/sais.hpp"

namespace memaudit {

/// Width of stored suffix offsets. kAuto picks 32 bits for texts up to
/// 2^31 - 1 bytes and 64 bits above.
enum class IndexWidth { kAuto, k32, k64 };

using IndexVector = std::variant<std::vector<std::uint32_t>, std::vector<std::uint64_t>>;

namespace detail {

inline constexpr std::uint64_t kMax32BitText = (1ULL << 31) - 1;

template <class F>
decltype(auto) visit_indices(const IndexVector& v, F&& f) {
  return std::visit([&](const auto& vec) -> decltype(auto) { return f(std::span(vec)); }, v);
}

inline std::size_t index_size(const IndexVector& v) {
  return std::visit([](const auto& vec) { return vec.size(); }, v);
}

inline std::uint64_t index_at(const IndexVector& v, std::size_t i) {
  return std::visit([i](const auto& vec) { return static_cast<std::uint64_t>(vec[i]); }, v);
}

}  // namespace detail

/// Lexicographically sorted suffix offsets of an IndexedText. Bytes compare
/// unsigned; a suffix that is a prefix of another sorts first. The text is
/// shared so the index can outlive the caller's handle.
class SuffixArray {
 public:
  SuffixArray(std::shared_ptr<const IndexedText> text, IndexVector sa) : text_(std::move(text)), sa_(std::move(sa)) {}

  const IndexedText& text() const noexcept { return *text_; }
  const std::shared_ptr<const IndexedText>& text_ptr() const noexcept { return text_; }
  std::size_t size() const noexcept { return detail::index_size(sa_); }
  unsigned index_width() const noexcept { return std::holds_alternative<std::vector<std::uint32_t>>(sa_) ? 4 : 8; }
  std::uint64_t operator[](std::size_t i) const { return detail::index_at(sa_, i); }
  const IndexVector& indices() const noexcept { return sa_; }

  /// Calls f(std::span<const Index>) with the underlying array.
  template <class F>
  decltype(auto) visit(F&& f) const {
    return detail::visit_indices(sa_, std::forward<F>(f));
  }

 private:
  std::shared_ptr<const IndexedText> text_;
  IndexVector sa_;
};

/// lcp[i] = longest common prefix of suffixes sa[i - 1] and sa[i]; lcp[0] = 0.
class LcpArray {
 public:
  explicit LcpArray(IndexVector lcp) : lcp_(std::move(lcp)) {}

  std::size_t size() const noexcept { return detail::index_size(lcp_); }
  std::uint64_t operator[](std::size_t i) const { return detail::index_at(lcp_, i); }
  const IndexVector& values() const noexcept { return lcp_; }

  template <class F>
  decltype(auto) visit(F&& f) const {
    return detail::visit_indices(lcp_, std::forward<F>(f));
  }

 private:
  IndexVector lcp_;
};

namespace detail {

template <class Index>
std::vector<Index> build_sa_as(std::string_view bytes) {
  auto symbols = std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
  return sa_is<Index, std::uint8_t>(symbols, 255);
}

// Kasai et al. linear-time LCP.
template <class Index>
std::vector<Index> kasai(std::string_view text, std::span<const Index> sa) {
  const std::size_t n = sa.size();
  std::vector<Index> rank(n);
  for (std::size_t i = 0; i < n; ++i) rank[sa[i]] = static_cast<Index>(i);
  std::vector<Index> lcp(n, 0);
  std::size_t h = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = rank[i];
    if (r == 0) {
      h = 0;
      continue;
    }
    const std::size_t j = sa[r - 1];
    while (i + h < n && j + h < n && text[i + h] == text[j + h]) ++h;
    lcp[r] = static_cast<Index>(h);
    if (h > 0) --h;
  }
  return lcp;
}

}  // namespace detail

inline SuffixArray build_suffix_array(std::shared_ptr<const IndexedText> text, IndexWidth width = IndexWidth::kAuto) {
  if (!text || text->size() == 0) throw InvalidArgument("cannot build a suffix array over an empty text");
  if (width == IndexWidth::kAuto) width = text->size() <= detail::kMax32BitText ? IndexWidth::k32 : IndexWidth::k64;
  if (width == IndexWidth::k32 && text->size() > detail::kMax32BitText) {
    throw InvalidArgument("text of " + std::to_string(text->size()) + " bytes requires 64-bit suffix indices");
  }
  IndexVector sa;
  if (width == IndexWidth::k32) {
    sa = detail::build_sa_as<std::uint32_t>(text->bytes());
  } else {
    sa = detail::build_sa_as<std::uint64_t>(text->bytes());
  }
  return SuffixArray(std::move(text), std::move(sa));
}

inline SuffixArray build_suffix_array(IndexedText text, IndexWidth width = IndexWidth::kAuto) {
  return build_suffix_array(std::make_shared<const IndexedText>(std::move(text)), width);
}

inline LcpArray build_lcp_array(const SuffixArray& sa) {
  return sa.visit([&](auto span) {
    using Index = std::remove_const_t<typename decltype(span)::element_type>;
    return LcpArray(IndexVector(detail::kasai<Index>(sa.text().bytes(), span)));
  });
}

/// SA rows [first, last) whose suffixes start with `pattern`.
inline std::pair<std::size_t, std::size_t> find_range(const SuffixArray& sa, std::string_view pattern) {
  const auto bytes = sa.text().bytes();
  auto prefix = [&](std::uint64_t pos) { return bytes.substr(pos, pattern.size()); };
  return sa.visit([&](auto span) {
    // std::string_view compares as unsigned char via char_traits<char>.
    auto lo = std::partition_point(span.begin(), span.end(), [&](auto pos) { return prefix(pos) < pattern; });
    auto hi = std::partition_point(lo, span.end(), [&](auto pos) { return prefix(pos) == pattern; });
    return std::pair<std::size_t, std::size_t>(lo - span.begin(), hi - span.begin());
  });
}

/// Number of possibly overlapping occurrences of `pattern`. Occurrences that
/// would contain the separator do not count, so a pattern containing 0x00
/// never matches.
inline std::uint64_t count_occurrences(const SuffixArray& sa, std::string_view pattern) {
  if (pattern.empty()) throw InvalidArgument("count_occurrences: empty pattern");
  if (pattern.find(kSeparator) != std::string_view::npos) return 0;
  auto [lo, hi] = find_range(sa, pattern);
  return hi - lo;
}

namespace detail {

// Calls group(first, last) for every maximal SA run [first, last) whose
// suffixes share a valid (separator-free, in-document) window of length n.
template <class Index, class LcpIndex, class Group>
void for_each_window_group(const IndexedText& text, std::span<const Index> sa, std::span<const LcpIndex> lcp,
                           std::uint64_t n, Group&& group) {
  const std::size_t size = sa.size();
  std::size_t first = 0;
  while (first < size) {
    std::size_t last = first + 1;
    while (last < size && lcp[last] >= n) ++last;
    // Suffixes in one run share their first n bytes, so validity of the first
    // window decides the whole run.
    if (text.window_valid(sa[first], n)) group(first, last);
    first = last;
  }
}

template <class F>
decltype(auto) visit_pair(const SuffixArray& sa, const LcpArray& lcp, F&& f) {
  return sa.visit([&](auto sa_span) -> decltype(auto) {
    return lcp.visit([&](auto lcp_span) -> decltype(auto) { return f(sa_span, lcp_span); });
  });
}

}  // namespace detail

/// Occurrence counts of every distinct valid window of a fixed length.
///
/// Entries follow suffix-array order, so they are sorted lexicographically by
/// window content; each entry stores the first (smallest) text offset of the
/// window and its count.
class DuplicationProfile {
 public:
  struct Entry {
    std::uint64_t first_offset;
    std::uint64_t count;
  };

  DuplicationProfile(std::shared_ptr<const IndexedText> text, std::uint64_t window_length, std::vector<Entry> entries)
      : text_(std::move(text)), window_length_(window_length), entries_(std::move(entries)) {
    for (const auto& e : entries_) {
      ++histogram_[e.count];
      total_windows_ += e.count;
    }
  }

  std::uint64_t window_length() const noexcept { return window_length_; }
  std::span<const Entry> entries() const noexcept { return entries_; }
  /// d -> number of unique windows occurring exactly d times.
  const std::map<std::uint64_t, std::uint64_t>& histogram() const noexcept { return histogram_; }
  std::uint64_t unique_windows() const noexcept { return entries_.size(); }
  std::uint64_t total_windows() const noexcept { return total_windows_; }
  std::uint64_t max_count() const noexcept { return histogram_.empty() ? 0 : histogram_.rbegin()->first; }

  std::string_view window(const Entry& e) const { return text_->bytes().substr(e.first_offset, window_length_); }

  /// Count of a window by content; 0 when absent.
  std::uint64_t count_of(std::string_view window_bytes) const {
    if (window_bytes.size() != window_length_) return 0;
    auto it = std::partition_point(entries_.begin(), entries_.end(),
                                   [&](const Entry& e) { return window(e) < window_bytes; });
    if (it != entries_.end() && window(*it) == window_bytes) return it->count;
    return 0;
  }

 private:
  std::shared_ptr<const IndexedText> text_;
  std::uint64_t window_length_;
  std::vector<Entry> entries_;
  std::map<std::uint64_t, std::uint64_t> histogram_;
  std::uint64_t total_windows_ = 0;
};

/// One linear pass over runs of lcp >= n.
inline DuplicationProfile window_duplication_profile(const SuffixArray& sa, const LcpArray& lcp, std::uint64_t n) {
  if (n < 1 || n > sa.text().size()) {
    throw InvalidArgument("window length " + std::to_string(n) + " out of range [1, " +
                          std::to_string(sa.text().size()) + "]");
  }
  std::vector<DuplicationProfile::Entry> entries;
  detail::visit_pair(sa, lcp, [&](auto sa_span, auto lcp_span) {
    detail::for_each_window_group(sa.text(), sa_span, lcp_span, n, [&](std::size_t first, std::size_t last) {
      std::uint64_t min_pos = sa_span[first];
      for (std::size_t i = first + 1; i < last; ++i) min_pos = std::min<std::uint64_t>(min_pos, sa_span[i]);
      entries.push_back({min_pos, static_cast<std::uint64_t>(last - first)});
    });
  });
  return DuplicationProfile(sa.text_ptr(), n, std::move(entries));
}

/// A generated window found verbatim in the training text.
struct OverlapRecord {
  std::uint64_t sequence_index;    // generated document index
  std::uint64_t offset;            // window start inside that document
  std::uint64_t training_count;    // d: occurrences in the training text
  std::uint64_t training_offset;   // first occurrence in the training text

  std::string_view window_bytes(const IndexedText& train, std::uint64_t n) const {
    return train.bytes().substr(training_offset, n);
  }

  friend bool operator==(const OverlapRecord&, const OverlapRecord&) = default;
};

struct OverlapOptions {
  // Upper bound on generated bytes indexed together with the training text in
  // one pass; larger inputs are processed in document-aligned chunks.
  std::uint64_t chunk_bytes = 32ULL << 20;
};

/// Every stride-1, separator-free window of `generated` that occurs in the
/// training text, ordered by (sequence_index, offset).
///
/// Each chunk of generated documents is appended to the training documents and
/// the joint suffix/LCP arrays are scanned once: every run of lcp >= n holds
/// all occurrences of one window in both texts, which gives d directly.
inline std::vector<OverlapRecord> cross_corpus_overlaps(const SuffixArray& train, const IndexedText& generated,
                                                        std::uint64_t n, const OverlapOptions& options = {}) {
  if (n < 1) throw InvalidArgument("window length must be >= 1");
  const IndexedText& train_text = train.text();
  const std::vector<std::string> train_docs = train_text.split();
  const std::uint64_t train_bytes = train_text.size();
  const std::size_t train_doc_count = train_text.document_count();

  std::vector<OverlapRecord> records;
  std::size_t next_doc = 0;
  while (next_doc < generated.document_count()) {
    std::vector<std::string> bodies = train_docs;
    const std::size_t chunk_first = next_doc;
    std::uint64_t chunk_size = 0;
    do {
      auto doc = generated.document(next_doc++);
      chunk_size += doc.size() + 1;
      bodies.emplace_back(doc);
    } while (next_doc < generated.document_count() && chunk_size < options.chunk_bytes);

    auto joint_text = std::make_shared<const IndexedText>(IndexedText::from_bodies(bodies));
    const auto joint = build_suffix_array(joint_text);
    const auto lcp = build_lcp_array(joint);
    detail::visit_pair(joint, lcp, [&](auto sa_span, auto lcp_span) {
      detail::for_each_window_group(*joint_text, sa_span, lcp_span, n, [&](std::size_t first, std::size_t last) {
        std::uint64_t d = 0;
        std::uint64_t first_train = UINT64_MAX;
        for (std::size_t i = first; i < last; ++i) {
          const std::uint64_t pos = sa_span[i];
          if (pos < train_bytes) {
            ++d;
            first_train = std::min(first_train, pos);
          }
        }
        if (d == 0 || d == last - first) return;
        for (std::size_t i = first; i < last; ++i) {
          const std::uint64_t pos = sa_span[i];
          if (pos < train_bytes) continue;
          const std::size_t doc = joint_text->document_of(pos);
          records.push_back({chunk_first + (doc - train_doc_count), pos - joint_text->document_begin(doc), d,
                             first_train});
        }
      });
    });
  }
  std::sort(records.begin(), records.end(), [](const OverlapRecord& a, const OverlapRecord& b) {
    return std::pair(a.sequence_index, a.offset) < std::pair(b.sequence_index, b.offset);
  });
  return records;
}

// Index serialization: "MTSA", u16 version, u8 index width, then the suffix
// array and optionally the LCP array as raw little-endian integers. The entry
// count equals the text length, which the reader supplies.

inline constexpr char kSuffixMagic[4] = {'M', 'T', 'S', 'A'};
inline constexpr std::uint16_t kSuffixFormatVersion = 1;

namespace detail {

template <class T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(static_cast<std::uint64_t>(value) >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T read_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw ParseError("unexpected end of file");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return static_cast<T>(v);
}

template <class Index>
void write_indices(std::ostream& out, std::span<const Index> values) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  } else {
    for (Index v : values) write_le(out, v);
  }
}

template <class Index>
std::vector<Index> read_indices(std::istream& in, std::size_t count) {
  std::vector<Index> values(count);
  if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(Index)))) {
    throw ParseError("suffix index file truncated");
  }
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& v : values) {
      auto* b = reinterpret_cast<unsigned char*>(&v);
      std::reverse(b, b + sizeof(Index));
    }
  }
  return values;
}

}  // namespace detail

inline void save_suffix_index(const std::string& path, const SuffixArray& sa, const LcpArray* lcp = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(kSuffixMagic, 4);
  detail::write_le<std::uint16_t>(out, kSuffixFormatVersion);
  detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(sa.index_width()));
  sa.visit([&](auto span) { detail::write_indices(out, span); });
  if (lcp) {
    if (lcp->values().index() != sa.indices().index()) throw InvalidArgument("LCP width differs from suffix array width");
    lcp->visit([&](auto span) { detail::write_indices(out, span); });
  }
  if (!out) throw IoError("error while writing '" + path + "'");
}

struct LoadedSuffixIndex {
  SuffixArray sa;
  std::optional<LcpArray> lcp;
};

inline LoadedSuffixIndex load_suffix_index(const std::string& path, std::shared_ptr<const IndexedText> text) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot read '" + path + "'");
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kSuffixMagic, 4) != 0) throw ParseError(path + ": not a suffix index");
  const auto version = detail::read_le<std::uint16_t>(in);
  if (version != kSuffixFormatVersion) throw ParseError(path + ": unsupported version " + std::to_string(version));
  const auto width = detail::read_le<std::uint8_t>(in);
  if (width != 4 && width != 8) throw ParseError(path + ": bad index width " + std::to_string(width));
  const std::uint64_t n = text->size();
  const std::uint64_t payload = file_size - 7;
  bool has_lcp;
  if (payload == n * width) {
    has_lcp = false;
  } else if (payload == 2 * n * width) {
    has_lcp = true;
  } else {
    throw ParseError(path + ": size does not match a text of " + std::to_string(n) + " bytes");
  }
  auto read_vec = [&]() -> IndexVector {
    if (width == 4) return detail::read_indices<std::uint32_t>(in, n);
    return detail::read_indices<std::uint64_t>(in, n);
  };
  IndexVector sa_values = read_vec();
  std::optional<LcpArray> lcp;
  if (has_lcp) lcp.emplace(read_vec());
  return {SuffixArray(std::move(text), std::move(sa_values)), std::move(lcp)};
}

}  // namespace memaudit
