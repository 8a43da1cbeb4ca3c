// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "memaudit/corpus.hpp"
#include "memaudit/error.hpp"
#include "memaudit/rng.hpp"

namespace memaudit {

using Symbol = std::uint16_t;
inline constexpr Symbol kEos = 256;  // end of sequence; part of every vocabulary
inline constexpr Symbol kBos = 257;  // left padding of contexts; never emitted

struct SamplingConfig {
  enum class Scheme { kStandard, kTopK, kTemperature };

  Scheme scheme = Scheme::kStandard;
  std::uint32_t top_k = 1;
  double temperature = 1.0;
  std::uint64_t max_length = 256;
  std::uint64_t seed = 0;

  void validate() const {
    if (scheme == Scheme::kTopK && top_k < 1) throw InvalidArgument("top-k sampling needs k >= 1");
    if (scheme == Scheme::kTemperature && !(temperature > 0.0)) {
      throw InvalidArgument("temperature must be > 0");
    }
  }
};

inline std::string_view scheme_name(SamplingConfig::Scheme s) {
  switch (s) {
    case SamplingConfig::Scheme::kStandard: return "standard";
    case SamplingConfig::Scheme::kTopK: return "topk";
    case SamplingConfig::Scheme::kTemperature: return "temp";
  }
  return "?";
}

inline SamplingConfig::Scheme parse_scheme(std::string_view name) {
  if (name == "standard") return SamplingConfig::Scheme::kStandard;
  if (name == "topk" || name == "top_k") return SamplingConfig::Scheme::kTopK;
  if (name == "temp" || name == "temperature") return SamplingConfig::Scheme::kTemperature;
  throw InvalidArgument("unknown sampling scheme '" + std::string(name) + "'");
}

/// Byte-level n-gram model with add-k smoothing:
///
///   P(x | c) = (count(c, x) + k) / (count(c) + k * |V|)
///
/// over a vocabulary V of the training bytes plus end-of-sequence. Contexts
/// are the previous order - 1 symbols of the same document, left-padded with
/// a begin marker, so no context spans a document boundary. An unseen context
/// yields the uniform distribution. Document ends are not counted as events;
/// sequences end by sampling the (smoothed) end symbol or at max_length.
class NgramModel {
 public:
  static constexpr char kMagic[4] = {'M', 'T', 'N', 'G'};
  static constexpr std::uint16_t kFormatVersion = 1;

  /// `extra_vocabulary` bytes join the vocabulary even if unseen, e.g. to let
  /// a reference model score text from another corpus.
  static NgramModel train(const IndexedText& corpus, std::uint32_t order, double k,
                          std::string_view extra_vocabulary = {}) {
    if (order < 1) throw InvalidArgument("n-gram order must be >= 1");
    if (!(k > 0.0) || !std::isfinite(k)) throw InvalidArgument("smoothing constant must be finite and > 0");
    if (corpus.total_size() == 0) throw InvalidArgument("cannot train on an empty corpus");

    NgramModel m(order, k);
    std::array<bool, 256> seen{};
    for (std::size_t d = 0; d < corpus.document_count(); ++d) {
      for (unsigned char c : corpus.document(d)) seen[c] = true;
    }
    for (unsigned char c : extra_vocabulary) seen[c] = true;
    for (unsigned v = 0; v < 256; ++v) {
      if (seen[v]) m.vocab_.push_back(static_cast<Symbol>(v));
    }
    m.vocab_.push_back(kEos);
    m.index_vocabulary();

    const std::size_t ctx_len = order - 1;
    std::vector<std::uint64_t> events;
    events.reserve(corpus.total_size());
    std::vector<Symbol> ctx(ctx_len);
    for (std::size_t d = 0; d < corpus.document_count(); ++d) {
      const auto doc = corpus.document(d);
      std::fill(ctx.begin(), ctx.end(), kBos);
      for (unsigned char c : doc) {
        const std::uint32_t id = m.intern(ctx);
        events.push_back((static_cast<std::uint64_t>(id) << 16) | c);
        if (ctx_len > 0) {
          std::shift_left(ctx.begin(), ctx.end(), 1);
          ctx.back() = c;
        }
      }
    }
    std::sort(events.begin(), events.end());
    m.build_rows(events);
    return m;
  }

  std::uint32_t order() const noexcept { return order_; }
  double smoothing() const noexcept { return k_; }
  std::span<const Symbol> vocabulary() const noexcept { return vocab_; }
  std::size_t vocabulary_size() const noexcept { return vocab_.size(); }
  std::size_t context_count() const noexcept { return ctx_total_.size(); }
  bool in_vocabulary(Symbol s) const noexcept { return s <= kEos && vocab_index_[s] >= 0; }

  /// Unnormalized next-symbol weights count(c, x) + k, in vocabulary order.
  void weights(std::span<const Symbol> context, std::vector<double>& out) const {
    out.assign(vocab_.size(), k_);
    if (auto id = find(context)) {
      for (std::uint32_t e = next_begin_[*id]; e < next_begin_[*id + 1]; ++e) {
        out[vocab_index_[next_sym_[e]]] += static_cast<double>(next_count_[e]);
      }
    }
  }

  double probability(std::span<const Symbol> context, Symbol next) const {
    if (!in_vocabulary(next)) return 0.0;
    const double denom_k = k_ * static_cast<double>(vocab_.size());
    auto id = find(context);
    if (!id) return k_ / denom_k;
    std::uint64_t c = 0;
    for (std::uint32_t e = next_begin_[*id]; e < next_begin_[*id + 1]; ++e) {
      if (next_sym_[e] == next) c = next_count_[e];
    }
    return (static_cast<double>(c) + k_) / (static_cast<double>(ctx_total_[*id]) + denom_k);
  }

  /// Sum of ln P over the sequence, each symbol conditioned on its own
  /// begin-padded prefix. Throws on bytes outside the vocabulary.
  double log_likelihood(std::string_view seq) const {
    const std::size_t ctx_len = order_ - 1;
    std::vector<Symbol> ctx(ctx_len, kBos);
    double total = 0.0;
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const auto c = static_cast<unsigned char>(seq[i]);
      if (!in_vocabulary(c)) {
        std::ostringstream msg;
        msg << "byte 0x" << std::hex << static_cast<unsigned>(c) << std::dec << " at offset " << i
            << " is not in the model vocabulary";
        throw InvalidArgument(msg.str());
      }
      total += std::log(probability(ctx, c));
      if (ctx_len > 0) {
        std::shift_left(ctx.begin(), ctx.end(), 1);
        ctx.back() = c;
      }
    }
    return total;
  }

  /// exp(-(1/L) * sum ln P(s_i | context)).
  double perplexity(std::string_view seq) const {
    if (seq.empty()) throw InvalidArgument("perplexity of an empty sequence is undefined");
    return std::exp(-log_likelihood(seq) / static_cast<double>(seq.size()));
  }

  /// Samples one sequence from the stream seeded by `stream_seed`. Every step
  /// consumes exactly one uniform draw whatever the scheme.
  std::string sample(const SamplingConfig& cfg, std::uint64_t stream_seed) const {
    cfg.validate();
    Rng rng(stream_seed);
    const std::size_t ctx_len = order_ - 1;
    std::vector<Symbol> ctx(ctx_len, kBos);
    std::vector<double> w;
    std::vector<std::uint32_t> order_buf;
    std::string out;
    while (out.size() < cfg.max_length) {
      weights(ctx, w);
      shape(cfg, w, order_buf);
      const Symbol s = vocab_[draw(w, rng.uniform01())];
      if (s == kEos) break;
      out.push_back(static_cast<char>(s));
      if (ctx_len > 0) {
        std::shift_left(ctx.begin(), ctx.end(), 1);
        ctx.back() = s;
      }
    }
    return out;
  }

  /// Applies top-k truncation or temperature to base weights in place.
  static void shape(const SamplingConfig& cfg, std::vector<double>& w, std::vector<std::uint32_t>& scratch) {
    using Scheme = SamplingConfig::Scheme;
    if (cfg.scheme == Scheme::kTopK && cfg.top_k < w.size()) {
      scratch.resize(w.size());
      std::iota(scratch.begin(), scratch.end(), 0u);
      // Highest weight first; ties go to the smaller symbol.
      std::nth_element(scratch.begin(), scratch.begin() + cfg.top_k, scratch.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return w[a] > w[b] || (w[a] == w[b] && a < b); });
      for (auto it = scratch.begin() + cfg.top_k; it != scratch.end(); ++it) w[*it] = 0.0;
    } else if (cfg.scheme == Scheme::kTemperature && cfg.temperature != 1.0) {
      const double top = *std::max_element(w.begin(), w.end());
      const double log_top = std::log(top);
      for (auto& x : w) x = std::exp((std::log(x) - log_top) / cfg.temperature);
    }
  }

  /// Index i with cumulative weight crossing u * total, scanning in order.
  static std::size_t draw(std::span<const double> w, double u) {
    double total = 0.0;
    for (double x : w) total += x;
    const double target = u * total;
    double cum = 0.0;
    std::size_t last_nonzero = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      cum += w[i];
      last_nonzero = i;
      if (cum > target) return i;
    }
    return last_nonzero;
  }

  // Visits (context symbols, next symbol, count) in storage order.
  template <class F>
  void for_each_count(F&& f) const {
    const std::size_t ctx_len = order_ - 1;
    for (std::uint32_t id = 0; id < ctx_total_.size(); ++id) {
      std::span<const Symbol> ctx(ctx_arena_.data() + static_cast<std::size_t>(id) * ctx_len, ctx_len);
      for (std::uint32_t e = next_begin_[id]; e < next_begin_[id + 1]; ++e) f(ctx, next_sym_[e], next_count_[e]);
    }
  }

  std::uint64_t context_total(std::span<const Symbol> context) const {
    auto id = find(context);
    return id ? ctx_total_[*id] : 0;
  }

  // "MTNG", u16 version, u32 order, f64 k, u32 |V|, |V| x u16, u64 contexts,
  // then per context: (order - 1) x u16, u32 entries, entries x (u16, u64).
  // All little-endian.
  void save(std::ostream& out) const {
    out.write(kMagic, 4);
    put<std::uint16_t>(out, kFormatVersion);
    put<std::uint32_t>(out, order_);
    put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(k_));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(vocab_.size()));
    for (Symbol s : vocab_) put<std::uint16_t>(out, s);
    put<std::uint64_t>(out, ctx_total_.size());
    const std::size_t ctx_len = order_ - 1;
    for (std::uint32_t id = 0; id < ctx_total_.size(); ++id) {
      for (std::size_t i = 0; i < ctx_len; ++i) put<std::uint16_t>(out, ctx_arena_[id * ctx_len + i]);
      put<std::uint32_t>(out, next_begin_[id + 1] - next_begin_[id]);
      for (std::uint32_t e = next_begin_[id]; e < next_begin_[id + 1]; ++e) {
        put<std::uint16_t>(out, next_sym_[e]);
        put<std::uint64_t>(out, next_count_[e]);
      }
    }
  }

  static NgramModel load(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw ParseError("not an n-gram model file");
    if (get<std::uint16_t>(in) != kFormatVersion) throw ParseError("unsupported n-gram model version");
    const auto order = get<std::uint32_t>(in);
    const double k = std::bit_cast<double>(get<std::uint64_t>(in));
    if (order < 1 || !(k > 0.0)) throw ParseError("corrupt n-gram model header");
    NgramModel m(order, k);
    const auto vsize = get<std::uint32_t>(in);
    if (vsize < 1 || vsize > 257) throw ParseError("corrupt n-gram vocabulary");
    for (std::uint32_t i = 0; i < vsize; ++i) m.vocab_.push_back(get<std::uint16_t>(in));
    if (!std::is_sorted(m.vocab_.begin(), m.vocab_.end()) || m.vocab_.back() != kEos) {
      throw ParseError("corrupt n-gram vocabulary");
    }
    m.index_vocabulary();
    const auto contexts = get<std::uint64_t>(in);
    const std::size_t ctx_len = order - 1;
    std::vector<Symbol> ctx(ctx_len);
    std::vector<std::uint64_t> events;
    std::vector<std::uint64_t> counts;
    for (std::uint64_t c = 0; c < contexts; ++c) {
      for (auto& s : ctx) s = get<std::uint16_t>(in);
      const std::uint32_t id = m.intern(ctx);
      if (id != c) throw ParseError("duplicate context in n-gram model");
      const auto entries = get<std::uint32_t>(in);
      for (std::uint32_t e = 0; e < entries; ++e) {
        const auto sym = get<std::uint16_t>(in);
        const auto count = get<std::uint64_t>(in);
        if (!m.in_vocabulary(sym)) throw ParseError("n-gram entry outside vocabulary");
        events.push_back((static_cast<std::uint64_t>(id) << 16) | sym);
        counts.push_back(count);
      }
    }
    m.build_rows_with_counts(events, counts);
    return m;
  }

  std::string serialize() const {
    std::ostringstream out;
    save(out);
    return std::move(out).str();
  }

  /// FNV-1a of the serialized form, as 16 hex digits.
  std::string fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize()) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    save(out);
    if (!out) throw IoError("error while writing '" + path + "'");
  }

  static NgramModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path + "'");
    return load(in);
  }

 private:
  NgramModel(std::uint32_t order, double k) : order_(order), k_(k) { vocab_index_.fill(-1); }

  template <class T>
  static void put(std::ostream& out, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(static_cast<std::uint64_t>(v) >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
  }

  template <class T>
  static T get(std::istream& in) {
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw ParseError("n-gram model file truncated");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return static_cast<T>(v);
  }

  void index_vocabulary() {
    vocab_index_.fill(-1);
    for (std::size_t i = 0; i < vocab_.size(); ++i) vocab_index_[vocab_[i]] = static_cast<std::int16_t>(i);
  }

  static std::uint64_t hash(std::span<const Symbol> ctx) {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (Symbol s : ctx) h = (h ^ s) * 0x100000001b3ULL;
    return splitmix64(h);
  }

  bool equals(std::uint32_t id, std::span<const Symbol> ctx) const {
    return std::equal(ctx.begin(), ctx.end(), ctx_arena_.begin() + static_cast<std::ptrdiff_t>(id * ctx.size()));
  }

  std::optional<std::uint32_t> find(std::span<const Symbol> ctx) const {
    if (slots_.empty()) return std::nullopt;
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t i = hash(ctx) & mask;; i = (i + 1) & mask) {
      const std::uint32_t slot = slots_[i];
      if (slot == 0) return std::nullopt;
      if (equals(slot - 1, ctx)) return slot - 1;
    }
  }

  std::uint32_t intern(std::span<const Symbol> ctx) {
    if ((ctx_total_.size() + 1) * 2 > slots_.size()) grow();
    const std::size_t mask = slots_.size() - 1;
    for (std::size_t i = hash(ctx) & mask;; i = (i + 1) & mask) {
      const std::uint32_t slot = slots_[i];
      if (slot == 0) {
        const auto id = static_cast<std::uint32_t>(ctx_total_.size());
        ctx_arena_.insert(ctx_arena_.end(), ctx.begin(), ctx.end());
        ctx_total_.push_back(0);
        slots_[i] = id + 1;
        return id;
      }
      if (equals(slot - 1, ctx)) return slot - 1;
    }
  }

  void grow() {
    std::vector<std::uint32_t> old = std::move(slots_);
    slots_.assign(std::max<std::size_t>(16, old.size() * 2), 0);
    const std::size_t mask = slots_.size() - 1;
    const std::size_t ctx_len = order_ - 1;
    for (std::uint32_t slot : old) {
      if (slot == 0) continue;
      std::span<const Symbol> ctx(ctx_arena_.data() + static_cast<std::size_t>(slot - 1) * ctx_len, ctx_len);
      std::size_t i = hash(ctx) & mask;
      while (slots_[i] != 0) i = (i + 1) & mask;
      slots_[i] = slot;
    }
  }

  // events: sorted (context id << 16 | symbol), one per occurrence.
  void build_rows(const std::vector<std::uint64_t>& events) {
    std::vector<std::uint64_t> keys;
    std::vector<std::uint64_t> counts;
    for (std::size_t i = 0; i < events.size();) {
      std::size_t j = i;
      while (j < events.size() && events[j] == events[i]) ++j;
      keys.push_back(events[i]);
      counts.push_back(j - i);
      i = j;
    }
    build_rows_with_counts(keys, counts);
  }

  void build_rows_with_counts(const std::vector<std::uint64_t>& keys, const std::vector<std::uint64_t>& counts) {
    std::vector<std::size_t> perm(keys.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    next_begin_.assign(ctx_total_.size() + 1, 0);
    next_sym_.clear();
    next_count_.clear();
    std::fill(ctx_total_.begin(), ctx_total_.end(), 0);
    for (std::size_t p : perm) {
      const auto id = static_cast<std::uint32_t>(keys[p] >> 16);
      next_sym_.push_back(static_cast<Symbol>(keys[p] & 0xffff));
      next_count_.push_back(counts[p]);
      ctx_total_[id] += counts[p];
      ++next_begin_[id + 1];
    }
    for (std::size_t i = 1; i < next_begin_.size(); ++i) next_begin_[i] += next_begin_[i - 1];
  }

  std::uint32_t order_;
  double k_;
  std::vector<Symbol> vocab_;
  std::array<std::int16_t, 258> vocab_index_{};
  std::vector<Symbol> ctx_arena_;
  std::vector<std::uint64_t> ctx_total_;
  std::vector<std::uint32_t> next_begin_;
  std::vector<Symbol> next_sym_;
  std::vector<std::uint64_t> next_count_;
  std::vector<std::uint32_t> slots_;
};

inline NgramModel train_ngram(const IndexedText& corpus, std::uint32_t order, double k,
                              std::string_view extra_vocabulary = {}) {
  return NgramModel::train(corpus, order, k, extra_vocabulary);
}

/// Seed of generated sequence `index` under the sampling config's seed.
inline std::uint64_t sequence_seed(std::uint64_t global_seed, std::uint64_t index) {
  return derive_seed(global_seed, streams::kSequenceBase + index);
}

inline std::string sample_sequence(const NgramModel& model, const SamplingConfig& cfg, std::uint64_t index = 0) {
  return model.sample(cfg, sequence_seed(cfg.seed, index));
}

}  // namespace memaudit
