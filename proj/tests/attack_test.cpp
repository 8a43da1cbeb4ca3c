// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "memaudit/attack.hpp"

#include <zlib.h>
#include <gtest/gtest.h>

#include <cstring>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "memaudit/benchmark.hpp"
#include "oracles.hpp"

namespace memaudit {
namespace {

std::shared_ptr<const IndexedText> text_ptr(std::vector<std::string> bodies) {
  return std::make_shared<const IndexedText>(IndexedText::from_bodies(bodies));
}

// Inflates a raw DEFLATE stream; used to check the compressor's output.
std::string inflate_raw(const std::vector<unsigned char>& data) {
  z_stream zs{};
  EXPECT_EQ(Z_OK, inflateInit2(&zs, -15));
  std::string out(1 << 20, '\0');
  zs.next_in = const_cast<Bytef*>(data.data());
  zs.avail_in = static_cast<uInt>(data.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  EXPECT_EQ(Z_STREAM_END, inflate(&zs, Z_FINISH));
  out.resize(zs.total_out);
  inflateEnd(&zs);
  return out;
}

GenerationPool pool_of(std::vector<std::string> seqs) {
  GenerationPool p;
  p.sequences = std::move(seqs);
  for (const auto& s : p.sequences) p.total_generated_bytes += s.size();
  return p;
}

TEST(GeneratePoolTest, DeterministicAndCounted) {
  auto m = train_ngram(IndexedText::from_bodies(std::vector<std::string>{"hello world", "help wanted"}), 3, 0.1);
  SamplingConfig cfg;
  cfg.seed = 11;
  cfg.max_length = 30;
  const auto a = generate_pool(m, 3, cfg, 1);
  const auto b = generate_pool(m, 3, cfg, 4);
  ASSERT_EQ(3u, a.sequences.size());
  EXPECT_EQ(a.sequences, b.sequences);
  EXPECT_EQ(m.fingerprint(), a.model_fingerprint);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(sample_sequence(m, cfg, i), a.sequences[i]);
    total += a.sequences[i].size();
  }
  EXPECT_EQ(total, a.total_generated_bytes);
  EXPECT_THROW(generate_pool(m, 0, cfg), InvalidArgument);
}

TEST(GeneratePoolTest, TopOnePoolIsConstant) {
  auto m = train_ngram(IndexedText::from_bodies(std::vector<std::string>{"abcabcabd"}), 3, 0.01);
  SamplingConfig cfg;
  cfg.scheme = SamplingConfig::Scheme::kTopK;
  cfg.top_k = 1;
  cfg.max_length = 64;
  const auto pool = generate_pool(m, 50, cfg);
  EXPECT_EQ(1u, std::set<std::string>(pool.sequences.begin(), pool.sequences.end()).size());
}

TEST(AnnotateTest, CanaryMemberCarriesItsCount) {
  CanarySpec spec;
  spec.canary_length = 40;
  spec.duplication_levels = {10};
  spec.canaries_per_level = {1};
  spec.background_size = 5000;
  spec.seed = 4;
  const auto bench = build_synthetic_benchmark(spec);
  const auto& canary = bench.ledger.entries[0].canary;
  auto text = std::make_shared<const IndexedText>(concatenate(bench.documents));
  const auto sa = build_suffix_array(text);
  const auto ann = annotate_overlaps(pool_of({canary}), sa, 40);
  ASSERT_EQ(1u, ann.samples.size());
  EXPECT_TRUE(ann.samples[0].member);
  EXPECT_EQ(10u, ann.samples[0].d);
  EXPECT_EQ(1u, ann.member_count);
}

TEST(AnnotateTest, DisjointAlphabetHasNoMembers) {
  auto sa = build_suffix_array(text_ptr({"abababababab", "bababa"}));
  const auto ann = annotate_overlaps(pool_of({"xyzxyzxyz", "zzzzzz", "x"}), sa, 3);
  EXPECT_EQ(0u, ann.member_count);
  EXPECT_TRUE(ann.overlaps.empty());
  for (const auto& s : ann.samples) {
    EXPECT_FALSE(s.member);
    EXPECT_EQ(0u, s.d);
  }
}

TEST(AnnotateTest, MaxCountAndConsistency) {
  auto text = text_ptr({"xxABCyyABC", "ABCzz"});
  auto sa = build_suffix_array(text);
  const auto pool = pool_of({"qxxAq", "ABCq", "qq"});
  const auto ann = annotate_overlaps(pool, sa, 3);
  EXPECT_TRUE(ann.samples[0].member);
  EXPECT_EQ(1u, ann.samples[0].d);  // "xxA"
  EXPECT_EQ(3u, ann.samples[1].d);  // "ABC"
  EXPECT_FALSE(ann.samples[2].member);
  EXPECT_EQ(cross_corpus_overlaps(sa, pool_text(pool), 3), ann.overlaps);
  // Every recorded window is present post hoc with the recorded count.
  for (const auto& r : ann.overlaps) {
    const auto w = pool.sequences[r.sequence_index].substr(r.offset, 3);
    EXPECT_EQ(r.training_count, count_occurrences(sa, w));
    EXPECT_EQ(w, r.window_bytes(*text, 3));
  }
}

TEST(CompressionTest, RepetitiveBeatsRandom) {
  std::mt19937_64 rng(5);
  std::string random(1000, '\0');
  for (auto& c : random) c = static_cast<char>(rng());
  EXPECT_LT(easiness_compression(std::string(1000, 'a')), easiness_compression(random));
  EXPECT_EQ(easiness_compression(random), easiness_compression(random));
  EXPECT_GT(easiness_compression("a"), 0.0);
  EXPECT_EQ(0.0, std::fmod(easiness_compression("abc"), 8.0));
  EXPECT_THROW(easiness_compression(""), InvalidArgument);
}

// The bit count is the length of a raw DEFLATE stream that inflates back to
// the input.
TEST(CompressionTest, RawDeflateStream) {
  const std::string input = "the cat sat on the mat; the cat sat on the hat";
  z_stream zs{};
  ASSERT_EQ(Z_OK, deflateInit2(&zs, 6, Z_DEFLATED, -15, 8, Z_DEFAULT_STRATEGY));
  std::vector<unsigned char> out(deflateBound(&zs, input.size()));
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(input.data()));
  zs.avail_in = static_cast<uInt>(input.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  ASSERT_EQ(Z_STREAM_END, deflate(&zs, Z_FINISH));
  out.resize(zs.total_out);
  deflateEnd(&zs);
  EXPECT_EQ(input, inflate_raw(out));
  EXPECT_EQ(8.0 * static_cast<double>(out.size()), easiness_compression(input));
  // A zlib container adds 6 bytes around the same stream.
  uLongf zlen = compressBound(input.size());
  std::vector<unsigned char> zbuf(zlen);
  ASSERT_EQ(Z_OK, compress2(zbuf.data(), &zlen, reinterpret_cast<const Bytef*>(input.data()), input.size(), 6));
  EXPECT_EQ(8.0 * static_cast<double>(zlen - 6), easiness_compression(input));
}

TEST(ReferenceTest, UniformAndHandComputed) {
  // A huge smoothing constant makes the model uniform over its 4 symbols.
  auto uniform = std::make_shared<const NgramModel>(
      train_ngram(IndexedText::from_bodies(std::vector<std::string>{"abc"}), 2, 1e12));
  NgramPerplexity u(uniform);
  EXPECT_NEAR(4.0, easiness_reference(u, "abcabc"), 1e-6);
  EXPECT_NEAR(4.0, easiness_reference(u, "c"), 1e-6);

  auto unigram = std::make_shared<const NgramModel>(
      train_ngram(IndexedText::from_bodies(std::vector<std::string>{"aab"}), 1, 1e-12));
  NgramPerplexity ref(unigram);
  EXPECT_NEAR(2.1213, easiness_reference(ref, "ab"), 1e-4);
}

TEST(LowercaseTest, Mapping) {
  EXPECT_EQ("ab", ascii_lowercase("AB"));
  EXPECT_EQ("ab", ascii_lowercase("aB"));
  EXPECT_EQ("@[`{z09", ascii_lowercase("@[`{Z09"));
  auto m = std::make_shared<const NgramModel>(
      train_ngram(IndexedText::from_bodies(std::vector<std::string>{"abAB ab"}), 2, 0.5));
  NgramPerplexity p(m);
  EXPECT_DOUBLE_EQ(m->perplexity("ab"), easiness_lowercase(p, "AB"));
  EXPECT_DOUBLE_EQ(m->perplexity("ab"), easiness_lowercase(p, "aB"));
  EXPECT_DOUBLE_EQ(m->perplexity("ab a"), easiness_lowercase(p, "ab a"));
  auto upper_only = std::make_shared<const NgramModel>(
      train_ngram(IndexedText::from_bodies(std::vector<std::string>{"AB"}), 1, 0.5));
  NgramPerplexity q(upper_only);
  EXPECT_THROW(easiness_lowercase(q, "AB"), InvalidArgument);
}

TEST(ScoreTest, Monotonicity) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(1.01, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double e = pos(rng), p = pos(rng), bump = pos(rng) - 1.0;
    for (auto space : {ScoreSpace::kRatio, ScoreSpace::kLog}) {
      const double s = membership_score(e + 1.0, p, space, false);
      EXPECT_GT(s, 0.0);
      EXPECT_GT(membership_score(e + 1.0 + bump, p, space, false), s);
      EXPECT_LT(membership_score(e + 1.0, p + bump, space, false), s);
    }
  }
  EXPECT_DOUBLE_EQ(6.0, membership_score(12.0, 2.0, ScoreSpace::kRatio, true));
  EXPECT_DOUBLE_EQ(12.0 / std::log(2.0), membership_score(12.0, 2.0, ScoreSpace::kLog, true));
  EXPECT_THROW(membership_score(0.5, 2.0, ScoreSpace::kLog, false), InvalidArgument);
  EXPECT_THROW(parse_score_space("cubic"), InvalidArgument);
}

TEST(RunAttackTest, ToyEndToEnd) {
  auto text = text_ptr({"aab"});
  auto model = train_ngram(*text, 1, 0.1);
  auto sa = build_suffix_array(text);
  NgramPerplexity ref(std::make_shared<const NgramModel>(train_ngram(*text, 1, 0.5)));
  AttackConfig cfg;
  cfg.pool_size = 40;
  cfg.n = 2;
  cfg.sampling.max_length = 8;
  cfg.sampling.seed = 2;
  const auto r = run_attack(model, sa, ref, cfg);
  ASSERT_EQ(40u, r.annotation.samples.size());
  for (const auto& s : r.annotation.samples) {
    if (!s.scored()) continue;
    for (double v : {s.score_compression, s.score_reference, s.score_lowercase}) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GT(v, 0.0);
    }
    EXPECT_DOUBLE_EQ(s.score_lowercase, 1.0);  // already lowercase
  }
  EXPECT_GT(r.annotation.member_count, 0u);
}

TEST(RunAttackTest, SelfReferenceWarnsAndScoresOne) {
  auto text = text_ptr({"the cat sat on the mat"});
  auto model = std::make_shared<const NgramModel>(train_ngram(*text, 3, 0.1));
  auto sa = build_suffix_array(text);
  NgramPerplexity self(model);
  AttackConfig cfg;
  cfg.pool_size = 10;
  cfg.n = 5;
  cfg.sampling.max_length = 20;
  const auto r = run_attack(*model, sa, self, cfg);
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(std::string::npos, r.warnings[0].find("reference"));
  for (const auto& s : r.annotation.samples) {
    if (s.scored()) {
      EXPECT_DOUBLE_EQ(1.0, s.score_reference);
    }
  }
}

TEST(RunAttackTest, ZeroMembersFlagged) {
  // Order 1 on a long alternating corpus almost never emits a 12-byte match.
  std::string body;
  for (int i = 0; i < 200; ++i) body += "ab";
  auto text = text_ptr({body});
  auto model = train_ngram(*text, 1, 100.0, "cdefgh");
  NgramPerplexity ref(std::make_shared<const NgramModel>(train_ngram(*text, 1, 1.0, "cdefgh")));
  AttackConfig cfg;
  cfg.pool_size = 20;
  cfg.n = 12;
  cfg.sampling.max_length = 12;
  const auto r = run_attack(model, build_suffix_array(text), ref, cfg);
  EXPECT_EQ(0u, r.annotation.member_count);
  EXPECT_NE(std::find(r.warnings.begin(), r.warnings.end(), "pool contains no members; AUROC is undefined"),
            r.warnings.end());
}

TEST(RunAttackTest, StageNamedOnFailure) {
  auto text = text_ptr({"abc"});
  auto model = train_ngram(*text, 2, 0.1);
  NgramPerplexity ref(std::make_shared<const NgramModel>(train_ngram(*text, 2, 0.1)));
  AttackConfig cfg;
  cfg.pool_size = 0;
  try {
    run_attack(model, build_suffix_array(text), ref, cfg);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_EQ(0u, std::string(e.what()).rfind("generate:", 0)) << e.what();
  }
}

TEST(RunAttackTest, ExternalReferenceMatchesLocal) {
  auto text = text_ptr({"a quick brown fox jumps", "over a lazy dog"});
  auto model = train_ngram(*text, 2, 0.2);
  AttackConfig cfg;
  cfg.pool_size = 6;
  cfg.n = 4;
  cfg.sampling.max_length = 16;
  auto sa = build_suffix_array(text);
  NgramPerplexity local(std::make_shared<const NgramModel>(train_ngram(*text, 1, 0.2)));
  const auto a = run_attack(model, sa, local, cfg);
  // A shell provider that always answers 3.5.
  auto external = open_external_provider("while read line; do echo 3.5; done");
  const auto b = run_attack(model, sa, *external, cfg);
  for (std::size_t i = 0; i < a.annotation.samples.size(); ++i) {
    const auto& sa_ = a.annotation.samples[i];
    const auto& sb = b.annotation.samples[i];
    EXPECT_EQ(sa_.member, sb.member);
    EXPECT_EQ(sa_.score_compression, sb.score_compression);
    if (sb.scored()) {
      EXPECT_DOUBLE_EQ(3.5 / sb.ppl_model, sb.score_reference);
    }
  }
}

TEST(RunAttackTest, BitIdenticalAcrossThreadCounts) {
  auto text = text_ptr({"she sells sea shells by the sea shore", "the shells she sells are sea shells"});
  auto model = train_ngram(*text, 3, 0.05);
  NgramPerplexity ref(std::make_shared<const NgramModel>(train_ngram(*text, 2, 0.5)));
  AttackConfig cfg;
  cfg.pool_size = 300;
  cfg.n = 6;
  cfg.sampling.max_length = 40;
  cfg.sampling.seed = 99;
  auto sa = build_suffix_array(text);
  cfg.threads = 1;
  const auto a = run_attack(model, sa, ref, cfg);
  cfg.threads = 3;
  const auto b = run_attack(model, sa, ref, cfg);
  ASSERT_EQ(a.annotation.samples.size(), b.annotation.samples.size());
  for (std::size_t i = 0; i < a.annotation.samples.size(); ++i) {
    const auto& x = a.annotation.samples[i];
    const auto& y = b.annotation.samples[i];
    EXPECT_EQ(x.d, y.d);
    EXPECT_EQ(std::memcmp(&x.score_compression, &y.score_compression, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&x.score_reference, &y.score_reference, sizeof(double)), 0);
    EXPECT_EQ(std::memcmp(&x.score_lowercase, &y.score_lowercase, sizeof(double)), 0);
  }
}

// Members of a pool drawn from a planted benchmark carry d values that agree
// with the ledger: any member containing a full canary has d >= its level.
TEST(RunAttackTest, LedgerCrossCheck) {
  CanarySpec spec;
  spec.canary_length = 30;
  spec.duplication_levels = {1, 10, 40};
  spec.canaries_per_level = {3};
  spec.background_size = 40000;
  spec.background = BackgroundMode::kLexicon;
  spec.lexicon_words = 4;
  spec.word_length = 4;
  spec.seed = 6;
  const auto bench = build_synthetic_benchmark(spec);
  auto text = std::make_shared<const IndexedText>(concatenate(bench.documents));
  auto model = train_ngram(*text, 6, 0.01);
  NgramPerplexity ref(std::make_shared<const NgramModel>(train_ngram(*text, 2, 0.5)));
  AttackConfig cfg;
  cfg.pool_size = 3000;
  cfg.n = 30;
  cfg.sampling.max_length = 128;
  const auto r = run_attack(model, build_suffix_array(text), ref, cfg);
  int checked = 0;
  for (const auto& s : r.annotation.samples) {
    for (const auto& e : bench.ledger.entries) {
      if (r.pool.sequences[s.seq_index].find(e.canary) == std::string::npos) continue;
      EXPECT_TRUE(s.member);
      EXPECT_GE(s.d, e.duplicates);
      ++checked;
    }
  }
  EXPECT_GT(checked, 0);
}

}  // namespace
}  // namespace memaudit
