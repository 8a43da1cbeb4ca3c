// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "memaudit/corpus.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace memaudit {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("memaudit_corpus_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }

  std::string write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p.string();
  }

 private:
  fs::path path_;
};

TEST(ConcatenateTest, TwoDocuments) {
  std::vector<Document> docs = {{"0", "ab"}, {"1", "c"}};
  auto text = concatenate(docs);
  EXPECT_EQ(std::string("ab\0c", 4), text.bytes());
  EXPECT_EQ((std::vector<std::uint64_t>{0, 3}),
            std::vector<std::uint64_t>(text.boundaries().begin(), text.boundaries().end()));
  EXPECT_EQ(3u, text.total_size());
}

TEST(ConcatenateTest, SingleDocumentHasNoSeparator) {
  std::vector<Document> docs = {{"0", "x"}};
  auto text = concatenate(docs);
  EXPECT_EQ("x", text.bytes());
  ASSERT_EQ(1u, text.boundaries().size());
  EXPECT_EQ(0u, text.boundaries()[0]);
  EXPECT_EQ(1u, text.total_size());
}

TEST(ConcatenateTest, EmptyBodyAllowed) {
  std::vector<Document> docs = {{"0", ""}, {"1", "a"}};
  auto text = concatenate(docs);
  EXPECT_EQ(std::string("\0a", 2), text.bytes());
  EXPECT_EQ(1u, text.boundaries()[1]);
  EXPECT_EQ(1u, text.total_size());
}

TEST(ConcatenateTest, EmptyListRejected) {
  std::vector<Document> docs;
  EXPECT_THROW(concatenate(docs), InvalidArgument);
}

TEST(ConcatenateTest, SeparatorInBodyRejectedWithId) {
  std::vector<Document> docs = {{"bad-doc", std::string("a\0b", 3)}};
  try {
    concatenate(docs);
    FAIL() << "expected rejection";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("bad-doc"), std::string::npos);
  }
}

TEST(ConcatenateTest, SplitRecoversBodies) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Document> docs;
    const int count = 1 + static_cast<int>(rng() % 6);
    for (int i = 0; i < count; ++i) docs.push_back({std::to_string(i), oracle::random_bytes(rng, rng() % 12, 255, 1)});
    auto text = concatenate(docs);
    auto parts = text.split();
    ASSERT_EQ(docs.size(), parts.size());
    for (std::size_t i = 0; i < docs.size(); ++i) EXPECT_EQ(docs[i].body, parts[i]);
    // Separators sit exactly before each later boundary.
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text.bytes()[i] != '\0') continue;
      auto b = text.boundaries();
      EXPECT_TRUE(std::find(b.begin(), b.end(), i + 1) != b.end());
    }
  }
}

TEST(IndexedTextTest, WindowValidity) {
  std::vector<Document> docs = {{"0", "abc"}, {"1", "de"}};
  auto text = concatenate(docs);
  EXPECT_TRUE(text.window_valid(0, 3));
  EXPECT_FALSE(text.window_valid(1, 3));
  EXPECT_TRUE(text.window_valid(4, 2));
  EXPECT_FALSE(text.window_valid(3, 1));
  EXPECT_EQ(2u + 1u, text.window_count(2));
  EXPECT_EQ(1u, text.document_of(4));
  EXPECT_EQ(0u, text.document_of(3));
}

TEST(LoadCorpusTest, PlainFileIsOneDocument) {
  TempDir dir;
  auto p = dir.write("a.txt", "ab");
  auto docs = load_corpus(std::vector<std::string>{p}, CorpusFormat::kPlain);
  ASSERT_EQ(1u, docs.size());
  EXPECT_EQ("ab", docs[0].body);
}

TEST(LoadCorpusTest, JsonlPreservesOrder) {
  TempDir dir;
  auto p = dir.write("a.jsonl", "{\"text\":\"x\"}\n{\"text\":\"y\"}\n");
  auto docs = load_corpus(std::vector<std::string>{p}, CorpusFormat::kJsonl);
  ASSERT_EQ(2u, docs.size());
  EXPECT_EQ("x", docs[0].body);
  EXPECT_EQ("y", docs[1].body);
}

TEST(LoadCorpusTest, MalformedJsonlReportsLine) {
  try {
    parse_jsonl("{\"text\": }\n", "in.jsonl");
    FAIL() << "expected parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("in.jsonl:1:"), std::string::npos) << e.what();
  }
  try {
    parse_jsonl("{\"text\":\"ok\"}\n\n{\"id\":3}\n", "in.jsonl");
    FAIL() << "expected parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("in.jsonl:3:"), std::string::npos) << e.what();
  }
}

TEST(LoadCorpusTest, MissingFileNamesPath) {
  try {
    load_corpus(std::vector<std::string>{"/nonexistent/zzz.txt"}, CorpusFormat::kPlain);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/zzz.txt"), std::string::npos);
  }
}

TEST(LoadCorpusTest, SeparatorInJsonlRejected) {
  EXPECT_THROW(parse_jsonl("{\"id\":\"q\",\"text\":\"a\\u0000b\"}\n", "s"), InvalidArgument);
}

TEST(LoadCorpusTest, PermutingPathsPermutesDocuments) {
  TempDir dir;
  auto a = dir.write("a.jsonl", "{\"text\":\"1\"}\n{\"text\":\"2\"}\n");
  auto b = dir.write("b.jsonl", "{\"text\":\"3\"}\n");
  auto fwd = load_corpus(std::vector<std::string>{a, b}, CorpusFormat::kJsonl);
  auto rev = load_corpus(std::vector<std::string>{b, a}, CorpusFormat::kJsonl);
  ASSERT_EQ(3u, fwd.size());
  ASSERT_EQ(3u, rev.size());
  EXPECT_EQ(fwd[0], rev[1]);
  EXPECT_EQ(fwd[1], rev[2]);
  EXPECT_EQ(fwd[2], rev[0]);
}

TEST(WriteJsonlTest, RoundTrip) {
  TempDir dir;
  std::vector<Document> docs = {{"a", "hello \"world\"\n"}, {"b", "x"}};
  auto p = dir.write("out.jsonl", "");
  write_jsonl(p, docs);
  auto back = load_corpus(std::vector<std::string>{p}, CorpusFormat::kJsonl);
  EXPECT_EQ(docs, back);
}

}  // namespace
}  // namespace memaudit
