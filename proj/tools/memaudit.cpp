// Copyright 2026 The memaudit Authors
// SPDX-License-Identifier: Apache-2.0

// memaudit: duplication profiling, deduplication, n-gram training and
// sampling, extraction attacks and the planted-canary benchmark.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "memaudit/attack.hpp"
#include "memaudit/bench.hpp"
#include "memaudit/benchmark.hpp"
#include "memaudit/corpus.hpp"
#include "memaudit/dedup.hpp"
#include "memaudit/metrics.hpp"
#include "memaudit/ngram.hpp"
#include "memaudit/provider.hpp"
#include "memaudit/report.hpp"
#include "memaudit/suffix_index.hpp"

namespace fs = std::filesystem;
using namespace memaudit;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

// Flags shared by several subcommands. Defaults follow RunConfig.
struct Options {
  std::vector<std::string> corpus;
  std::string format = "plain";
  std::uint64_t n = 100;
  std::uint64_t min_len = 50;
  std::uint32_t order = 8;
  double smoothing = 0.01;
  std::string scheme = "standard";
  std::uint32_t k = 40;
  double temp = 1.0;
  std::uint64_t pool = 1000;
  std::uint32_t max_len = 256;
  double fpr = 0.001;
  std::uint64_t seed = 0;
  std::string out;
  unsigned threads = 0;

  std::string model;
  std::string extra_vocab;
  std::string ref_model;
  std::vector<std::string> ref_corpus;
  std::string ref_endpoint;
  std::string score_space = "ratio";
  std::string spec;
};

void add_corpus(CLI::App* app, Options& o, bool required = true) {
  auto* opt = app->add_option("--corpus", o.corpus, "corpus files, in order")->check(CLI::ExistingFile);
  if (required) opt->required();
  app->add_option("--format", o.format, "plain (one document per file) or jsonl")
      ->check(CLI::IsMember({"plain", "jsonl"}));
}

void add_sampling(CLI::App* app, Options& o) {
  app->add_option("--scheme", o.scheme, "standard, topk or temp")
      ->check(CLI::IsMember({"standard", "topk", "top_k", "temp", "temperature"}));
  app->add_option("--k", o.k, "top-k cutoff")->check(CLI::PositiveNumber);
  app->add_option("--temp", o.temp, "sampling temperature")->check(CLI::PositiveNumber);
  app->add_option("--max-len", o.max_len, "maximum symbols per sequence")->check(CLI::PositiveNumber);
  app->add_option("--seed", o.seed, "global seed");
}

void add_model(CLI::App* app, Options& o) {
  app->add_option("--model", o.model, "trained model file (MTNG)")->check(CLI::ExistingFile);
  app->add_option("--order", o.order, "n-gram order")->check(CLI::PositiveNumber);
  app->add_option("--smoothing", o.smoothing, "add-k constant")->check(CLI::PositiveNumber);
  app->add_option("--extra-vocab", o.extra_vocab, "bytes added to the model vocabulary");
}

SamplingConfig sampling_of(const Options& o) {
  SamplingConfig cfg;
  cfg.scheme = parse_scheme(o.scheme);
  cfg.top_k = o.k;
  cfg.temperature = o.temp;
  cfg.max_length = o.max_len;
  cfg.seed = o.seed;
  cfg.validate();
  return cfg;
}

std::vector<Document> load(const Options& o) { return load_corpus(o.corpus, parse_corpus_format(o.format)); }

nlohmann::json corpus_echo(const Options& o) { return {{"corpus", o.corpus}, {"format", o.format}}; }

// A model from --model, or one trained on the corpus with --order/--smoothing.
NgramModel model_of(const Options& o, const IndexedText& text) {
  if (!o.model.empty()) return NgramModel::load(o.model);
  return train_ngram(text, o.order, o.smoothing, o.extra_vocab);
}

void write_or_print(const Options& o, const std::string& file, const std::string& content) {
  if (o.out.empty()) {
    std::cout << content;
    return;
  }
  detail::ensure_directory(o.out);
  detail::write_text(fs::path(o.out) / file, content);
}

int cmd_dupstats(const Options& o) {
  auto text = std::make_shared<const IndexedText>(concatenate(load(o)));
  const auto sa = build_suffix_array(text);
  const auto lcp = build_lcp_array(sa);
  const auto profile = window_duplication_profile(sa, lcp, o.n);
  nlohmann::json echo = corpus_echo(o);
  echo["subcommand"] = "dupstats";
  echo["n"] = o.n;
  std::ostringstream csv;
  csv << detail::csv_preamble(echo) << "d,unique_windows\n";
  for (const auto& [d, count] : profile.histogram()) csv << d << ',' << count << '\n';
  write_or_print(o, "dupstats.csv", csv.str());
  return 0;
}

int cmd_dedup(const Options& o) {
  const auto docs = load(o);
  const auto result = exact_substring_dedup(docs, o.min_len);
  detail::ensure_directory(o.out);
  write_jsonl((fs::path(o.out) / "corpus.jsonl").string(), result.documents);
  auto report = result.report.to_json();
  report["config"] = corpus_echo(o);
  detail::write_text(fs::path(o.out) / "dedup.json", report.dump(2) + "\n");
  std::cerr << "removed " << result.report.bytes_removed << " of " << result.report.bytes_in << " bytes in "
            << result.report.passes << " passes\n";
  return 0;
}

int cmd_train(const Options& o) {
  const auto model = train_ngram(concatenate(load(o)), o.order, o.smoothing, o.extra_vocab);
  detail::ensure_directory(o.out);
  model.save((fs::path(o.out) / "model.mtng").string());
  nlohmann::json meta = {{"schema_version", kReportSchemaVersion},
                         {"config", corpus_echo(o)},
                         {"order", model.order()},
                         {"smoothing", model.smoothing()},
                         {"vocabulary_size", model.vocabulary_size()},
                         {"contexts", model.context_count()},
                         {"fingerprint", model.fingerprint()}};
  detail::write_text(fs::path(o.out) / "model.json", meta.dump(2) + "\n");
  std::cout << model.fingerprint() << "\n";
  return 0;
}

int cmd_sample(const Options& o) {
  NgramModel model = [&] {
    if (!o.model.empty()) return NgramModel::load(o.model);
    if (o.corpus.empty()) throw InvalidArgument("sample needs --model or --corpus");
    return train_ngram(concatenate(load(o)), o.order, o.smoothing, o.extra_vocab);
  }();
  const auto pool = generate_pool(model, o.pool, sampling_of(o), o.threads);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < pool.sequences.size(); ++i) docs.push_back({std::to_string(i), pool.sequences[i]});
  detail::ensure_directory(o.out);
  write_jsonl((fs::path(o.out) / "samples.jsonl").string(), docs);
  AttackConfig echo_cfg;
  echo_cfg.sampling = pool.config;
  echo_cfg.pool_size = o.pool;
  nlohmann::json meta = {{"schema_version", kReportSchemaVersion},
                         {"config", echo_cfg.to_json()},
                         {"model_fingerprint", pool.model_fingerprint},
                         {"total_generated_bytes", pool.total_generated_bytes}};
  meta["config"].erase("n");
  meta["config"].erase("score_space");
  meta["config"].erase("compression_level");
  detail::write_text(fs::path(o.out) / "pool.json", meta.dump(2) + "\n");
  return 0;
}

std::unique_ptr<PerplexityProvider> reference_of(const Options& o, nlohmann::json& echo) {
  const int given = !o.ref_model.empty() + !o.ref_corpus.empty() + !o.ref_endpoint.empty();
  if (given != 1) throw InvalidArgument("give exactly one of --ref-model, --ref-corpus, --ref-endpoint");
  if (!o.ref_endpoint.empty()) {
    echo["reference"] = {{"endpoint", o.ref_endpoint}};
    return open_external_provider(o.ref_endpoint);
  }
  std::shared_ptr<const NgramModel> m;
  if (!o.ref_model.empty()) {
    m = std::make_shared<const NgramModel>(NgramModel::load(o.ref_model));
    echo["reference"] = {{"model", o.ref_model}};
  } else {
    m = std::make_shared<const NgramModel>(
        train_ngram(concatenate(load_corpus(o.ref_corpus, parse_corpus_format(o.format))), o.order, o.smoothing,
                    o.extra_vocab));
    echo["reference"] = {
        {"corpus", o.ref_corpus}, {"order", o.order}, {"smoothing", o.smoothing}, {"extra_vocab", o.extra_vocab}};
  }
  echo["reference"]["fingerprint"] = m->fingerprint();
  return std::make_unique<NgramPerplexity>(std::move(m));
}

int cmd_attack(const Options& o) {
  auto text = std::make_shared<const IndexedText>(concatenate(load(o)));
  const auto model = model_of(o, *text);
  AttackConfig cfg;
  cfg.sampling = sampling_of(o);
  cfg.pool_size = o.pool;
  cfg.n = o.n;
  cfg.space = parse_score_space(o.score_space);
  cfg.threads = o.threads;

  nlohmann::json echo = corpus_echo(o);
  echo["subcommand"] = "attack";
  echo["attack"] = cfg.to_json();
  echo["fpr"] = o.fpr;
  echo["model"] = {{"fingerprint", model.fingerprint()}, {"order", model.order()}, {"smoothing", model.smoothing()}};
  if (!o.model.empty()) {
    echo["model"]["path"] = o.model;
  } else {
    echo["model"]["extra_vocab"] = o.extra_vocab;
  }
  echo["bucket_edges"] = default_bucket_edges();
  auto ref = reference_of(o, echo);

  const auto sa = build_suffix_array(text);
  const auto lcp = build_lcp_array(sa);
  const auto profile = window_duplication_profile(sa, lcp, o.n);
  const auto result = run_attack(model, sa, *ref, cfg);
  const auto report = build_report(result, profile, *text, o.fpr, default_bucket_edges(), echo);
  emit_report(report, o.out);
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "members " << report.members << ", count " << report.count << ", percent "
            << format_double(report.percent) << "\n";
  return 0;
}

int cmd_bench(const Options& o, const CLI::App& app) {
  BenchConfig cfg;
  if (!o.spec.empty()) {
    std::ifstream in(o.spec);
    if (!in) throw IoError("cannot read " + o.spec);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(std::string("malformed benchmark spec: ") + e.what());
    }
    cfg.spec = CanarySpec::from_json(j);
  }
  if (app.count("--seed") || o.spec.empty()) cfg.spec.seed = o.seed;
  cfg.order = o.order;
  cfg.smoothing = o.smoothing;
  cfg.min_len = o.min_len;
  cfg.fpr = o.fpr;
  cfg.attack.sampling = sampling_of(o);
  cfg.attack.sampling.seed = cfg.spec.seed;
  cfg.attack.pool_size = app.count("--pool") ? o.pool : 0;
  cfg.attack.n = o.n;
  cfg.attack.space = parse_score_space(o.score_space);
  cfg.attack.threads = o.threads;
  const auto result = run_bench(cfg);
  emit_bench(result, o.out);
  for (const auto& run : result.runs) {
    std::cout << run.name << ": count " << run.report.count << ", percent " << format_double(run.report.percent)
              << "\n";
  }
  return 0;
}

int cmd_serve(const Options& o) {
  std::shared_ptr<const NgramModel> m;
  if (!o.model.empty()) {
    m = std::make_shared<const NgramModel>(NgramModel::load(o.model));
  } else if (!o.corpus.empty()) {
    m = std::make_shared<const NgramModel>(train_ngram(concatenate(load(o)), o.order, o.smoothing, o.extra_vocab));
  } else {
    throw InvalidArgument("serve-ppl needs --model or --corpus");
  }
  NgramPerplexity provider(m);
  std::ios::sync_with_stdio(false);
  serve_perplexity(provider, std::cin, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"memaudit: memorization audits for text corpora and n-gram models"};
  app.require_subcommand(1);
  Options o;

  auto* dupstats = app.add_subcommand("dupstats", "histogram of N-window duplicate counts");
  add_corpus(dupstats, o);
  dupstats->add_option("--n", o.n, "window length in bytes")->check(CLI::PositiveNumber);
  dupstats->add_option("--out", o.out, "output directory (default: stdout)");

  auto* dedup = app.add_subcommand("dedup", "exact-substring deduplication");
  add_corpus(dedup, o);
  dedup->add_option("--min-len", o.min_len, "minimum repeated length in bytes")->check(CLI::Range(2, 1 << 30));
  dedup->add_option("--out", o.out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train a character n-gram model");
  add_corpus(train, o);
  train->add_option("--order", o.order, "n-gram order")->check(CLI::PositiveNumber);
  train->add_option("--smoothing", o.smoothing, "add-k constant")->check(CLI::PositiveNumber);
  train->add_option("--extra-vocab", o.extra_vocab, "bytes added to the model vocabulary");
  train->add_option("--out", o.out, "output directory")->required();

  auto* sample = app.add_subcommand("sample", "generate sequences from a model");
  add_corpus(sample, o, false);
  add_model(sample, o);
  add_sampling(sample, o);
  sample->add_option("--pool", o.pool, "number of sequences")->check(CLI::PositiveNumber);
  sample->add_option("--threads", o.threads, "worker threads (0: all cores)");
  sample->add_option("--out", o.out, "output directory")->required();

  auto* attack = app.add_subcommand("attack", "generate, label and score a pool against the training corpus");
  add_corpus(attack, o);
  add_model(attack, o);
  add_sampling(attack, o);
  attack->add_option("--n", o.n, "window length in bytes")->check(CLI::PositiveNumber);
  attack->add_option("--pool", o.pool, "number of generated sequences")->check(CLI::PositiveNumber);
  attack->add_option("--fpr", o.fpr, "false positive rate for TPR")->check(CLI::Range(0.0, 1.0));
  attack->add_option("--ref-model", o.ref_model, "reference model file")->check(CLI::ExistingFile);
  attack->add_option("--ref-corpus", o.ref_corpus, "train the reference model on these files")
      ->check(CLI::ExistingFile);
  attack->add_option("--ref-endpoint", o.ref_endpoint, "external reference: tcp://host:port or a shell command");
  attack->add_option("--score-space", o.score_space, "ratio or log")->check(CLI::IsMember({"ratio", "log"}));
  attack->add_option("--threads", o.threads, "worker threads (0: all cores)");
  attack->add_option("--out", o.out, "output directory")->required();

  auto* bench = app.add_subcommand("bench", "planted-canary benchmark: raw versus deduplicated model");
  bench->add_option("--spec", o.spec, "benchmark spec JSON")->check(CLI::ExistingFile);
  bench->add_option("--order", o.order, "n-gram order")->check(CLI::PositiveNumber);
  bench->add_option("--smoothing", o.smoothing, "add-k constant")->check(CLI::PositiveNumber);
  add_sampling(bench, o);
  bench->add_option("--n", o.n, "window length in bytes")->check(CLI::PositiveNumber);
  bench->add_option("--min-len", o.min_len, "dedup threshold in bytes")->check(CLI::Range(2, 1 << 30));
  bench->add_option("--pool", o.pool, "sequences per attack (default: training bytes / max-len)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--fpr", o.fpr, "false positive rate for TPR")->check(CLI::Range(0.0, 1.0));
  bench->add_option("--score-space", o.score_space, "ratio or log")->check(CLI::IsMember({"ratio", "log"}));
  bench->add_option("--threads", o.threads, "worker threads (0: all cores)");
  bench->add_option("--out", o.out, "output directory")->required();

  auto* serve = app.add_subcommand("serve-ppl", "answer perplexity requests on stdin/stdout");
  add_corpus(serve, o, false);
  add_model(serve, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsageError;
  }
  if (o.fpr <= 0.0 || o.fpr >= 1.0) {
    std::cerr << "error: --fpr must lie strictly between 0 and 1\n";
    return kUsageError;
  }

  try {
    if (*dupstats) return cmd_dupstats(o);
    if (*dedup) return cmd_dedup(o);
    if (*train) return cmd_train(o);
    if (*sample) return cmd_sample(o);
    if (*attack) return cmd_attack(o);
    if (*bench) return cmd_bench(o, *bench);
    if (*serve) return cmd_serve(o);
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}
