// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "memaudit/corpus.hpp"
#include "memaudit/error.hpp"
#include "memaudit/rng.hpp"
#include "memaudit/suffix_index.hpp"

namespace memaudit {

/// The 64 printable symbols used for canaries and uniform backgrounds.
inline const std::string kDefaultAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789 .";

enum class BackgroundMode {
  kUniform,  // i.i.d. bytes from the alphabet
  kLexicon,  // i.i.d. words from a small random lexicon
};

/// Planted-canary benchmark description.
///
/// Canaries are random alphabet strings planted d times each. The background
/// is either uniform bytes or a word-level source: `lexicon_words` random
/// words of `word_length` bytes with pairwise distinct first bytes, emitted
/// uniformly at random. The second form is low-entropy text that a byte
/// n-gram model can learn exactly, so generated text matches background
/// windows only by chance. Words are drawn from `word_alphabet`, by default
/// the alphabet without ASCII uppercase, so lowercasing leaves the
/// background unchanged and only touches canaries.
struct CanarySpec {
  std::uint64_t canary_length = 100;
  std::vector<std::uint64_t> duplication_levels = {1, 3, 10, 30, 100};
  // One count for every level, or one count per level.
  std::vector<std::uint64_t> canaries_per_level = {10};
  std::uint64_t background_size = 1 << 20;
  std::string alphabet = kDefaultAlphabet;
  std::uint64_t seed = 0;

  BackgroundMode background = BackgroundMode::kUniform;
  std::uint64_t document_size = 4096;
  std::uint64_t lexicon_words = 8;
  std::uint64_t word_length = 10;
  std::string word_alphabet;  // empty: alphabet minus 'A'..'Z'
  // When > 0, the background is resampled until no window of this length
  // repeats, so every duplicate at that length comes from a canary.
  std::uint64_t unique_window = 0;
  std::uint64_t max_retries = 8;

  std::string effective_word_alphabet() const {
    if (!word_alphabet.empty()) return word_alphabet;
    std::string out;
    for (char c : alphabet) {
      if (c < 'A' || c > 'Z') out.push_back(c);
    }
    return out;
  }

  std::uint64_t canaries_at(std::size_t level_index) const {
    return canaries_per_level.size() == 1 ? canaries_per_level[0] : canaries_per_level.at(level_index);
  }

  std::uint64_t planted_bytes() const {
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < duplication_levels.size(); ++i) {
      total += duplication_levels[i] * canaries_at(i) * canary_length;
    }
    return total;
  }

  void validate() const {
    if (canary_length < 1) throw InvalidArgument("canary_length must be >= 1");
    if (duplication_levels.empty()) throw InvalidArgument("duplication_levels must not be empty");
    for (auto d : duplication_levels) {
      if (d < 1) throw InvalidArgument("duplication levels must be >= 1");
    }
    if (canaries_per_level.size() != 1 && canaries_per_level.size() != duplication_levels.size()) {
      throw InvalidArgument("canaries_per_level must have one entry or one per duplication level");
    }
    if (alphabet.empty()) throw InvalidArgument("alphabet must not be empty");
    if (alphabet.find(kSeparator) != std::string::npos) throw InvalidArgument("alphabet must not contain 0x00");
    if (std::set<char>(alphabet.begin(), alphabet.end()).size() != alphabet.size()) {
      throw InvalidArgument("alphabet contains repeated bytes");
    }
    if (document_size < 1) throw InvalidArgument("document_size must be >= 1");
    if (background == BackgroundMode::kLexicon) {
      if (word_length < 1) throw InvalidArgument("word_length must be >= 1");
      const auto words = effective_word_alphabet();
      if (words.find(kSeparator) != std::string::npos) throw InvalidArgument("word_alphabet must not contain 0x00");
      if (std::set<char>(words.begin(), words.end()).size() != words.size()) {
        throw InvalidArgument("word_alphabet contains repeated bytes");
      }
      if (lexicon_words < 2 || lexicon_words > words.size()) {
        throw InvalidArgument("lexicon_words must be in [2, word alphabet size]");
      }
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json alpha = nlohmann::json::array();
    for (unsigned char c : alphabet) alpha.push_back(c);
    nlohmann::json j = {{"canary_length", canary_length},
                        {"duplication_levels", duplication_levels},
                        {"canaries_per_level", canaries_per_level},
                        {"background_size", background_size},
                        {"alphabet", alpha},
                        {"seed", seed},
                        {"background", background == BackgroundMode::kUniform ? "uniform" : "lexicon"},
                        {"document_size", document_size},
                        {"unique_window", unique_window},
                        {"max_retries", max_retries}};
    if (background == BackgroundMode::kLexicon) {
      j["lexicon_words"] = lexicon_words;
      j["word_length"] = word_length;
      nlohmann::json wa = nlohmann::json::array();
      for (unsigned char c : effective_word_alphabet()) wa.push_back(c);
      j["word_alphabet"] = wa;
    }
    return j;
  }

  static CanarySpec from_json(const nlohmann::json& j) {
    CanarySpec s;
    try {
      if (!j.is_object()) throw InvalidArgument("benchmark spec must be a JSON object");
      static const std::set<std::string> known = {
          "canary_length", "duplication_levels", "canaries_per_level", "background_size", "alphabet", "seed",
          "background",    "document_size",      "lexicon_words",      "word_length",     "unique_window",
          "max_retries",   "word_alphabet"};
      for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw InvalidArgument("unknown benchmark spec field '" + key + "'");
      }
      auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
      };
      get("canary_length", s.canary_length);
      get("duplication_levels", s.duplication_levels);
      if (j.contains("canaries_per_level")) {
        const auto& c = j.at("canaries_per_level");
        s.canaries_per_level = c.is_array() ? c.get<std::vector<std::uint64_t>>()
                                            : std::vector<std::uint64_t>{c.get<std::uint64_t>()};
      }
      get("background_size", s.background_size);
      auto get_bytes = [&](const char* key, std::string& field) {
        if (!j.contains(key)) return;
        const auto& a = j.at(key);
        if (a.is_string()) {
          field = a.get<std::string>();
          return;
        }
        field.clear();
        for (const auto& v : a) {
          const auto b = v.get<int>();
          if (b < 0 || b > 255) throw InvalidArgument(std::string(key) + " byte out of range");
          field.push_back(static_cast<char>(b));
        }
      };
      get_bytes("alphabet", s.alphabet);
      get_bytes("word_alphabet", s.word_alphabet);
      get("seed", s.seed);
      if (j.contains("background")) {
        const auto mode = j.at("background").get<std::string>();
        if (mode == "uniform") {
          s.background = BackgroundMode::kUniform;
        } else if (mode == "lexicon") {
          s.background = BackgroundMode::kLexicon;
        } else {
          throw InvalidArgument("background must be \"uniform\" or \"lexicon\"");
        }
      }
      get("document_size", s.document_size);
      get("lexicon_words", s.lexicon_words);
      get("word_length", s.word_length);
      get("unique_window", s.unique_window);
      get("max_retries", s.max_retries);
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("malformed benchmark spec: ") + e.what());
    }
    s.validate();
    return s;
  }
};

struct CanaryEntry {
  std::string canary;
  std::uint64_t duplicates = 0;
  // Offsets into the concatenation of the benchmark documents.
  std::vector<std::uint64_t> offsets;
};

struct CanaryLedger {
  std::vector<CanaryEntry> entries;

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : entries) {
      arr.push_back({{"canary", e.canary}, {"d", e.duplicates}, {"offsets", e.offsets}});
    }
    return {{"schema_version", 1}, {"entries", std::move(arr)}};
  }
};

struct Benchmark {
  std::vector<Document> documents;
  CanaryLedger ledger;
  std::vector<std::string> lexicon;  // empty for uniform backgrounds
  std::uint64_t attempts = 0;
};

namespace detail {

inline std::string random_string(Rng& rng, const std::string& alphabet, std::uint64_t len) {
  std::string s(len, '\0');
  for (auto& c : s) c = alphabet[rng.uniform_index(alphabet.size())];
  return s;
}

inline std::vector<std::string> make_lexicon(const CanarySpec& spec, std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  const std::string letters = spec.effective_word_alphabet();
  // Distinct first bytes: a random subset of the word alphabet.
  std::string firsts = letters;
  for (std::size_t i = firsts.size(); i > 1; --i) std::swap(firsts[i - 1], firsts[rng.uniform_index(i)]);
  std::vector<std::string> words;
  for (std::uint64_t w = 0; w < spec.lexicon_words; ++w) {
    words.push_back(firsts[w] + random_string(rng, letters, spec.word_length - 1));
  }
  return words;
}

// Background split into documents. For lexicon mode `units` is the word
// index of each word slot; for uniform mode it is empty.
struct Background {
  std::vector<std::string> docs;
  std::uint64_t unit = 1;  // bytes per resampling unit (word length or 1)
};

inline Background make_background(const CanarySpec& spec, const std::vector<std::string>& lexicon,
                                  std::uint64_t size, std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  Background bg;
  const bool words = spec.background == BackgroundMode::kLexicon;
  bg.unit = words ? spec.word_length : 1;
  // Documents hold whole units, so the total rounds up to a unit multiple.
  const std::uint64_t doc_units = std::max<std::uint64_t>(1, spec.document_size / bg.unit);
  std::uint64_t units_left = (size + bg.unit - 1) / bg.unit;
  while (units_left > 0) {
    const std::uint64_t n = std::min(doc_units, units_left);
    std::string doc;
    doc.reserve(n * bg.unit);
    for (std::uint64_t u = 0; u < n; ++u) {
      if (words) {
        doc += lexicon[rng.uniform_index(lexicon.size())];
      } else {
        doc.push_back(spec.alphabet[rng.uniform_index(spec.alphabet.size())]);
      }
    }
    bg.docs.push_back(std::move(doc));
    units_left -= n;
  }
  return bg;
}

// Resamples units inside later copies of repeated windows until no window of
// length `window` occurs twice in the background.
inline void make_windows_unique(Background& bg, const CanarySpec& spec, const std::vector<std::string>& lexicon,
                                std::uint64_t window, std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  const bool words = spec.background == BackgroundMode::kLexicon;
  for (int round = 0;; ++round) {
    if (round >= 64) throw Error("could not remove repeated background windows");
    auto text = std::make_shared<const IndexedText>(IndexedText::from_bodies(bg.docs));
    if (window > text->size()) return;
    const auto sa = build_suffix_array(text);
    const auto lcp = build_lcp_array(sa);
    std::vector<std::uint64_t> targets;
    visit_pair(sa, lcp, [&](auto sa_span, auto lcp_span) {
      for_each_window_group(*text, sa_span, lcp_span, window, [&](std::size_t first, std::size_t last) {
        if (last - first < 2) return;
        std::uint64_t keep = sa_span[first];
        for (std::size_t i = first + 1; i < last; ++i) keep = std::min<std::uint64_t>(keep, sa_span[i]);
        for (std::size_t i = first; i < last; ++i) {
          if (sa_span[i] != keep) targets.push_back(sa_span[i] + window / 2);
        }
      });
    });
    if (targets.empty()) return;
    std::sort(targets.begin(), targets.end());
    for (std::uint64_t pos : targets) {
      const std::size_t doc = text->document_of(pos);
      auto& body = bg.docs[doc];
      const std::uint64_t local = pos - text->document_begin(doc);
      const std::uint64_t start = local / bg.unit * bg.unit;
      std::string replacement;
      do {
        replacement = words ? lexicon[rng.uniform_index(lexicon.size())]
                            : std::string(1, spec.alphabet[rng.uniform_index(spec.alphabet.size())]);
      } while (body.compare(start, bg.unit, replacement) == 0);
      body.replace(start, bg.unit, replacement);
    }
  }
}

}  // namespace detail

/// Independent background text from the same source as the benchmark's
/// (same lexicon, different random stream), without canaries. Suited for
/// training a reference model.
inline std::vector<Document> build_reference_corpus(const CanarySpec& spec, std::uint64_t size) {
  spec.validate();
  std::vector<std::string> lexicon;
  if (spec.background == BackgroundMode::kLexicon) {
    lexicon = detail::make_lexicon(spec, derive_seed(spec.seed, streams::kLexicon));
  }
  auto bg = detail::make_background(spec, lexicon, size, derive_seed(spec.seed, streams::kReferenceBackground));
  std::vector<Document> docs;
  for (std::size_t i = 0; i < bg.docs.size(); ++i) docs.push_back({"ref-" + std::to_string(i), std::move(bg.docs[i])});
  return docs;
}

/// Background text with every canary planted exactly d times at distinct
/// insertion points (word boundaries for lexicon backgrounds). Occurrence
/// counts are verified with a suffix array; a collision triggers a rebuild
/// with fresh canaries, up to max_retries.
inline Benchmark build_synthetic_benchmark(const CanarySpec& spec) {
  spec.validate();
  if (spec.background_size < spec.planted_bytes()) {
    throw InvalidArgument("benchmark capacity exceeded: background_size " + std::to_string(spec.background_size) +
                          " < planted canary bytes " + std::to_string(spec.planted_bytes()));
  }

  Benchmark out;
  if (spec.background == BackgroundMode::kLexicon) {
    out.lexicon = detail::make_lexicon(spec, derive_seed(spec.seed, streams::kLexicon));
  }
  auto bg = detail::make_background(spec, out.lexicon, spec.background_size,
                                    derive_seed(spec.seed, streams::kBackground));
  if (spec.unique_window > 0) {
    detail::make_windows_unique(bg, spec, out.lexicon, spec.unique_window,
                                derive_seed(spec.seed, streams::kBackground + 0x100));
  }

  // Insertion gaps: unit boundaries of every document, both ends included.
  std::vector<std::uint64_t> gaps_before(bg.docs.size() + 1, 0);
  for (std::size_t d = 0; d < bg.docs.size(); ++d) {
    gaps_before[d + 1] = gaps_before[d] + bg.docs[d].size() / bg.unit + 1;
  }
  const std::uint64_t total_gaps = gaps_before.back();

  std::uint64_t insertions = 0;
  for (std::size_t i = 0; i < spec.duplication_levels.size(); ++i) {
    insertions += spec.duplication_levels[i] * spec.canaries_at(i);
  }
  if (insertions > total_gaps) throw InvalidArgument("benchmark capacity exceeded: not enough insertion points");

  for (std::uint64_t attempt = 0; attempt <= spec.max_retries; ++attempt) {
    const std::uint64_t salt = attempt << 40;
    Rng canary_rng(derive_seed(spec.seed, streams::kCanaries + salt));
    Rng place_rng(derive_seed(spec.seed, streams::kPlacement + salt));

    std::vector<CanaryEntry> entries;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < spec.duplication_levels.size(); ++i) {
      for (std::uint64_t c = 0; c < spec.canaries_at(i); ++c) {
        std::string canary;
        do {
          canary = detail::random_string(canary_rng, spec.alphabet, spec.canary_length);
        } while (!seen.insert(canary).second);
        entries.push_back({std::move(canary), spec.duplication_levels[i], {}});
      }
    }

    // Distinct gaps, then a random canary copy for each.
    std::set<std::uint64_t> chosen;
    while (chosen.size() < insertions) chosen.insert(place_rng.uniform_index(total_gaps));
    std::vector<std::uint64_t> gaps(chosen.begin(), chosen.end());
    std::vector<std::uint32_t> copies;
    for (std::uint32_t e = 0; e < entries.size(); ++e) copies.insert(copies.end(), entries[e].duplicates, e);
    for (std::size_t i = copies.size(); i > 1; --i) std::swap(copies[i - 1], copies[place_rng.uniform_index(i)]);

    std::vector<Document> docs;
    std::uint64_t offset = 0;
    std::size_t next = 0;
    for (std::size_t d = 0; d < bg.docs.size(); ++d) {
      const auto& src = bg.docs[d];
      std::string body;
      body.reserve(src.size());
      const std::uint64_t doc_gaps = gaps_before[d + 1] - gaps_before[d];
      for (std::uint64_t g = 0; g < doc_gaps; ++g) {
        while (next < gaps.size() && gaps[next] == gaps_before[d] + g) {
          auto& e = entries[copies[next]];
          e.offsets.push_back(offset + body.size());
          body += e.canary;
          ++next;
        }
        if (g + 1 < doc_gaps) body.append(src, g * bg.unit, bg.unit);
      }
      offset += body.size() + 1;
      docs.push_back({"bench-" + std::to_string(d), std::move(body)});
    }

    auto text = std::make_shared<const IndexedText>(concatenate(docs));
    const auto sa = build_suffix_array(text);
    bool ok = true;
    for (const auto& e : entries) {
      if (count_occurrences(sa, e.canary) != e.duplicates) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    out.documents = std::move(docs);
    out.ledger.entries = std::move(entries);
    out.attempts = attempt + 1;
    return out;
  }
  throw Error("benchmark construction failed: canary collisions persisted after " +
              std::to_string(spec.max_retries) + " retries");
}

}  // namespace memaudit
