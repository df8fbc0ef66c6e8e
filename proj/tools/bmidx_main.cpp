// bmidx — build hierarchical document IDs, quantify the information plane,
// and evaluate retrieval over them.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bmidx/clustering.hpp"
#include "bmidx/corpus.hpp"
#include "bmidx/error.hpp"
#include "bmidx/eval.hpp"
#include "bmidx/ib.hpp"
#include "bmidx/indexers.hpp"
#include "bmidx/manifest.hpp"
#include "bmidx/matrix.hpp"
#include "bmidx/parallel.hpp"
#include "bmidx/retrieval.hpp"
#include "bmidx/rng.hpp"
#include "bmidx/synth.hpp"

namespace fs = std::filesystem;
using namespace bmidx;

namespace {

struct UsageError {
  std::string message;
};

struct CorpusOptions {
  std::string corpus_dir = ".";
  std::string docs_path;
  std::string queries_path;
  std::string doc_vecs_path;
  std::string query_vecs_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--corpus", corpus_dir,
                    "Directory holding docs.jsonl, queries.jsonl, doc_vectors.f32, "
                    "query_vectors.f32");
    cmd->add_option("--docs-file", docs_path, "Documents JSONL (overrides --corpus)");
    cmd->add_option("--queries-file", queries_path, "Queries JSONL (overrides --corpus)");
    cmd->add_option("--doc-vecs", doc_vecs_path, "Document embedding .f32 (overrides --corpus)");
    cmd->add_option("--query-vecs", query_vecs_path, "Query embedding .f32 (overrides --corpus)");
  }

  fs::path resolve(const std::string& explicit_path, const char* fallback) const {
    if (!explicit_path.empty()) return explicit_path;
    return fs::path(corpus_dir) / fallback;
  }

  Corpus load(RunManifest& manifest) const {
    const fs::path docs = resolve(docs_path, "docs.jsonl");
    const fs::path queries = resolve(queries_path, "queries.jsonl");
    const fs::path doc_vecs = resolve(doc_vecs_path, "doc_vectors.f32");
    const fs::path query_vecs = resolve(query_vecs_path, "query_vectors.f32");
    manifest.add_input(docs);
    manifest.add_input(queries);
    manifest.add_input(doc_vecs);
    manifest.add_input(query_vecs);
    return load_corpus(docs, queries, load_embeddings(doc_vecs), load_embeddings(query_vecs));
  }
};

std::vector<std::size_t> parse_prefix_lens(const std::string& text) {
  std::vector<std::size_t> lens;
  std::istringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    long v = 0;
    try {
      v = std::stol(token);
    } catch (const std::exception&) {
      throw UsageError{"bad prefix length: " + token};
    }
    if (v < 1) throw UsageError{"prefix lengths must be at least 1, got " + token};
    lens.push_back(static_cast<std::size_t>(v));
  }
  if (lens.empty()) throw UsageError{"no prefix lengths given"};
  return lens;
}

// Every corpus document must carry an ID and vice versa.
void check_assignment_covers(const IndexAssignment& a, const Corpus& corpus) {
  if (a.size() != corpus.documents.size()) {
    std::ostringstream msg;
    msg << "assignment covers " << a.size() << " documents, corpus has "
        << corpus.documents.size();
    throw ValidationError(msg.str());
  }
  for (const Document& d : corpus.documents) {
    a.slot(d.doc_id);  // throws LookupError when missing
  }
}

EmbeddingMatrix aligned_reps(const IndexAssignment& a, const Corpus& corpus, RepSource source,
                             const SourceSet& sources) {
  EmbeddingMatrix reps = EmbeddingMatrix::zeros(a.size(), corpus.doc_embeddings.dim);
  RepSet qmeans;
  if (source == RepSource::QueryMean) {
    qmeans = query_mean_reps(corpus, sources);
    if (!qmeans.fallback_docs.empty()) {
      std::cerr << "[bmidx] " << qmeans.fallback_docs.size()
                << " document(s) lack covering queries; their own embeddings back the trie\n";
    }
  }
  for (std::size_t slot = 0; slot < a.size(); ++slot) {
    const std::size_t doc = corpus.doc_index(a.doc_ids[slot]);
    const auto row = source == RepSource::QueryMean
                         ? qmeans.reps.row(doc)
                         : corpus.doc_embeddings.row(corpus.documents[doc].row);
    std::copy(row.begin(), row.end(), reps.row(slot).begin());
  }
  return reps;
}

RepSource resolve_rep_source(const std::string& flag, IndexMethod method) {
  if (flag == "doc") return RepSource::DocEmbedding;
  if (flag == "qmean") return RepSource::QueryMean;
  if (flag == "indexer") {
    return method == IndexMethod::BMI ? RepSource::QueryMean : RepSource::DocEmbedding;
  }
  throw UsageError{"unknown representative source: " + flag};
}

// ---------------------------------------------------------------- synth ---

struct SynthOptions {
  SynthConfig config;
  std::string out_dir = ".";
};

void run_synth(const SynthOptions& opt) {
  const SynthResult result = generate(opt.config);
  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);

  const fs::path docs = dir / "docs.jsonl";
  const fs::path queries = dir / "queries.jsonl";
  const fs::path doc_vecs = dir / "doc_vectors.f32";
  const fs::path query_vecs = dir / "query_vectors.f32";
  save_documents_jsonl(result.corpus, docs);
  save_queries_jsonl(result.corpus, queries);
  save_embeddings(result.corpus.doc_embeddings, doc_vecs);
  save_embeddings(result.corpus.query_embeddings, query_vecs);

  RunManifest manifest;
  manifest.subcommand = "synth";
  manifest.seed = opt.config.seed;
  manifest.flags = {{"docs", std::to_string(opt.config.n_docs)},
                    {"queries-per-doc", std::to_string(opt.config.queries_per_doc)},
                    {"dim", std::to_string(opt.config.dim)},
                    {"doc-spread", std::to_string(opt.config.doc_spread)},
                    {"query-sigma", std::to_string(opt.config.query_sigma)},
                    {"decouple", opt.config.decouple ? "true" : "false"},
                    {"out", opt.out_dir}};
  manifest.add_output(docs);
  manifest.add_output(queries);
  manifest.add_output(doc_vecs);
  manifest.add_output(meta_path_for(doc_vecs));
  manifest.add_output(query_vecs);
  manifest.add_output(meta_path_for(query_vecs));
  manifest.save(dir / "run_manifest.json");

  std::cout << "wrote " << result.corpus.documents.size() << " documents and "
            << result.corpus.queries.size() << " queries to " << dir.string() << "\n";
}

// ---------------------------------------------------------------- index ---

struct IndexOptions {
  CorpusOptions corpus;
  std::string method = "hkmeans";
  std::size_t alphabet_size = 30;
  bool alphabet_given = false;
  std::size_t lsh_bits = 0;
  std::string sources = "all";
  std::uint64_t seed = 0;
  std::string out = "ids.tsv";
};

void run_index(const IndexOptions& opt) {
  const IndexMethod method = [&] {
    try {
      return parse_method(opt.method);
    } catch (const ArgumentError& e) {
      throw UsageError{e.what()};
    }
  }();
  if (method == IndexMethod::LSHI) {
    if (opt.alphabet_given && opt.alphabet_size != 32) {
      throw UsageError{"LSH symbols use a fixed alphabet of 32"};
    }
    if (opt.lsh_bits % 5 != 0) {
      throw UsageError{"--bits must be a multiple of 5"};
    }
  }

  RunManifest manifest;
  manifest.subcommand = "index";
  manifest.seed = opt.seed;
  const Corpus corpus = opt.corpus.load(manifest);

  IndexAssignment assignment;
  switch (method) {
    case IndexMethod::HRI:
      assignment = index_random(corpus, {opt.alphabet_size}, opt.seed);
      break;
    case IndexMethod::HKmI:
      assignment = index_hkm(corpus, {opt.alphabet_size}, opt.seed);
      break;
    case IndexMethod::LSHI:
      assignment = index_lsh(corpus, {32}, opt.lsh_bits, opt.seed);
      break;
    case IndexMethod::BMI: {
      const SourceSet sources = SourceSet::parse(opt.sources);
      assignment = index_bmi(corpus, {opt.alphabet_size}, sources, opt.seed);
      if (!assignment.fallback_docs.empty()) {
        std::cerr << "[bmidx] " << assignment.fallback_docs.size()
                  << " document(s) lack covering queries; fell back to document embeddings\n";
      }
      break;
    }
  }

  const fs::path out(opt.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_assignment(assignment, out);

  manifest.flags = {{"method", opt.method},
                    {"alphabet-size", std::to_string(assignment.alphabet.size)},
                    {"bits", std::to_string(opt.lsh_bits)},
                    {"sources", opt.sources},
                    {"out", opt.out}};
  manifest.add_output(out);
  manifest.save((out.has_parent_path() ? out.parent_path() : fs::path(".")) /
                "run_manifest.json");

  std::cout << "wrote " << assignment.size() << " IDs (max length " << assignment.max_len
            << ") to " << out.string() << "\n";
}

// ------------------------------------------------------------- ib-curve ---

struct CurveOptions {
  CorpusOptions corpus;
  std::string ids_path = "ids.tsv";
  std::string prefix_lens;  // empty = 1..max_len
  double tau = 1.0;
  std::string marginal = "paper";
  std::string reps = "qmean";
  std::string split = "train";
  std::string sources = "all";
  double floor = 1e-12;
  int threads = 1;
  std::string units = "bits";
  std::string out = "curve.csv";
};

void run_ib_curve(const CurveOptions& opt) {
  if (opt.marginal != "paper" && opt.marginal != "empirical") {
    throw UsageError{"--marginal must be paper or empirical"};
  }
  if (opt.units != "bits" && opt.units != "nats") {
    throw UsageError{"--units must be bits or nats"};
  }
  if (opt.split != "train" && opt.split != "test" && opt.split != "all") {
    throw UsageError{"--split must be train, test or all"};
  }

  RunManifest manifest;
  manifest.subcommand = "ib-curve";
  const Corpus corpus = opt.corpus.load(manifest);
  manifest.add_input(opt.ids_path);
  const IndexAssignment assignment = load_assignment(opt.ids_path);
  check_assignment_covers(assignment, corpus);

  std::vector<std::size_t> lens;
  if (opt.prefix_lens.empty()) {
    for (std::size_t l = 1; l <= assignment.max_len; ++l) lens.push_back(l);
  } else {
    lens = parse_prefix_lens(opt.prefix_lens);
  }

  const SourceSet sources = SourceSet::parse(opt.sources);
  const RepSource rep_source = resolve_rep_source(opt.reps, assignment.method);
  const EmbeddingMatrix reps = aligned_reps(assignment, corpus, rep_source, sources);
  const PrefixTrie trie = build_trie(assignment, reps);
  const PrefixScorer scorer = make_trie_scorer(trie, opt.tau);

  CmiOptions cmi;
  cmi.marginal =
      opt.marginal == "paper" ? MarginalMode::PaperFaithful : MarginalMode::Empirical;
  cmi.prob_floor = opt.floor;
  cmi.split = opt.split == "all" ? std::nullopt : std::optional<Split>(parse_split(opt.split));
  cmi.sources = sources;
  cmi.threads = opt.threads;

  const auto curve = ib_curve(assignment, scorer, corpus, lens, cmi);
  const fs::path out(opt.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_curve_csv(curve, out, opt.units == "nats");

  manifest.flags = {{"ids", opt.ids_path},       {"prefix-lens", opt.prefix_lens},
                    {"tau", std::to_string(opt.tau)}, {"marginal", opt.marginal},
                    {"reps", opt.reps},          {"split", opt.split},
                    {"sources", opt.sources},    {"units", opt.units},
                    {"out", opt.out}};
  manifest.add_output(out);
  manifest.save((out.has_parent_path() ? out.parent_path() : fs::path(".")) /
                "run_manifest.json");

  for (const IBPoint& p : curve) {
    std::cout << "l=" << p.prefix_len << " i_dt=" << p.i_dt << " i_dq_given_t=" << p.i_dq_given_t
              << " clamped=" << p.clamped_queries << "\n";
  }
}

// ----------------------------------------------------------------- eval ---

struct EvalOptions {
  CorpusOptions corpus;
  std::string ids_path = "ids.tsv";
  std::size_t beam_width = 100;
  double tau = 1.0;
  std::string reps = "indexer";
  std::string sources = "all";
  int threads = 1;
  std::string out_dir = ".";
};

void run_eval(const EvalOptions& opt) {
  if (opt.beam_width == 0) throw UsageError{"--beam-width must be at least 1"};

  RunManifest manifest;
  manifest.subcommand = "eval";
  const Corpus corpus = opt.corpus.load(manifest);
  manifest.add_input(opt.ids_path);
  const IndexAssignment assignment = load_assignment(opt.ids_path);
  check_assignment_covers(assignment, corpus);

  const auto test_queries = corpus.query_indices(SourceSet::all(), Split::Test);
  if (test_queries.empty()) throw ValidationError("corpus has no test queries");

  const SourceSet sources = SourceSet::parse(opt.sources);
  const RepSource rep_source = resolve_rep_source(opt.reps, assignment.method);
  const EmbeddingMatrix reps = aligned_reps(assignment, corpus, rep_source, sources);
  const PrefixTrie trie = build_trie(assignment, reps);

  RetrieverConfig config;
  config.tau = opt.tau;
  config.beam_width = opt.beam_width;
  config.rep_source = rep_source;

  std::vector<Ranking> rankings(test_queries.size());
  parallel_for(test_queries.size(), opt.threads, [&](std::size_t i) {
    const Query& q = corpus.queries[test_queries[i]];
    rankings[i] = beam_rank(trie, corpus.query_embeddings.row(q.row), config, q.query_id);
  });

  const MetricsReport report = score(rankings, corpus);

  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  const fs::path metrics_path = dir / "metrics.json";
  const fs::path rankings_path = dir / "rankings.tsv";
  save_metrics_json(report, metrics_path);
  save_rankings_tsv(rankings, rankings_path);

  manifest.flags = {{"ids", opt.ids_path},
                    {"beam-width", std::to_string(opt.beam_width)},
                    {"tau", std::to_string(opt.tau)},
                    {"reps", opt.reps},
                    {"sources", opt.sources},
                    {"out-dir", opt.out_dir}};
  manifest.add_output(metrics_path);
  manifest.add_output(rankings_path);
  manifest.save(dir / "run_manifest.json");

  std::cout << "n_queries=" << report.n_queries;
  for (const auto& [cutoff, value] : report.recall_at) {
    std::cout << " rec@" << cutoff << "=" << value;
  }
  std::cout << " mrr@100=" << report.mrr_at_100 << "\n";
}

// --------------------------------------------------------------- verify ---

struct VerifyOptions {
  std::string suite = "all";
  std::size_t trials = 0;  // 0 = per-suite default
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

bool verify_partition_oracle(std::size_t trials, std::uint64_t seed) {
  bool ok = true;
  for (std::size_t t = 0; t < trials; ++t) {
    std::mt19937_64 rng(derive_seed(seed, 1000 + t));
    const std::size_t n = 4 + static_cast<std::size_t>(rng() % 5);  // 4..8
    const std::size_t dim = 1 + static_cast<std::size_t>(rng() % 3);
    const std::size_t k = 2 + static_cast<std::size_t>(rng() % 2);
    EmbeddingMatrix points = EmbeddingMatrix::zeros(n, dim);
    for (double& v : points.data) v = std_normal(rng);

    const auto oracle = enumerate_partitions_oracle(points, k, {1.0, 1.0});
    const bool match = oracle.argmin_partitions == oracle.argmax_partitions;
    ok = ok && match;
    std::cout << "partition-oracle trial " << t << ": n=" << n << " d=" << dim << " k=" << k
              << " partitions=" << oracle.n_partitions << " "
              << (match ? "OK" : "MISMATCH") << "\n";
  }
  return ok;
}

bool verify_mi_identity(std::size_t trials, std::uint64_t seed) {
  bool ok = true;
  for (std::size_t t = 0; t < trials; ++t) {
    std::mt19937_64 rng(derive_seed(seed, 2000 + t));
    const std::size_t nd = 2 + static_cast<std::size_t>(rng() % 7);
    const std::size_t nq = 2 + static_cast<std::size_t>(rng() % 7);
    std::vector<std::vector<double>> joint(nd, std::vector<double>(nq));
    double total = 0.0;
    for (auto& row : joint) {
      for (double& p : row) {
        p = uniform01(rng) + 1e-4;
        total += p;
      }
    }
    for (auto& row : joint) {
      for (double& p : row) p /= total;
    }
    const int nt = 1 + static_cast<int>(rng() % nd);
    std::vector<int> f(nd);
    for (int& v : f) v = static_cast<int>(rng() % static_cast<std::uint64_t>(nt));

    const auto mi = discrete_mi_oracle(joint, f);
    const double gap = std::abs(mi.i_dq_given_t - (mi.i_dq - mi.i_tq));
    const bool pass = gap < 1e-9;
    ok = ok && pass;
    std::cout << "mi-identity trial " << t << ": |D|=" << nd << " |Q|=" << nq << " |T|=" << nt
              << " gap=" << gap << " " << (pass ? "OK" : "FAIL") << "\n";
  }
  return ok;
}

bool verify_mle_gradient(std::size_t trials, std::uint64_t seed) {
  bool ok = true;
  double worst = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    std::mt19937_64 rng(derive_seed(seed, 3000 + t));
    const std::size_t dim = 1 + static_cast<std::size_t>(rng() % 8);
    const std::size_t nq = 1 + static_cast<std::size_t>(rng() % 10);
    std::vector<double> variances(dim);
    for (double& v : variances) v = uniform_in(rng, 0.5, 2.0);
    std::vector<double> center(dim);
    for (double& v : center) v = 2.0 * std_normal(rng);

    EmbeddingMatrix doc_vecs = EmbeddingMatrix::zeros(1, dim);
    EmbeddingMatrix query_vecs = EmbeddingMatrix::zeros(nq, dim);
    std::vector<Query> queries(nq);
    for (std::size_t i = 0; i < nq; ++i) {
      auto row = query_vecs.row(i);
      for (std::size_t j = 0; j < dim; ++j) {
        row[j] = center[j] + std::sqrt(variances[j]) * std_normal(rng);
      }
      queries[i] = {"q" + std::to_string(i), "d0", QuerySource::GenQ, Split::Train, i};
    }
    const Corpus corpus = assemble_corpus({{"d0", 0}}, std::move(queries), std::move(doc_vecs),
                                          std::move(query_vecs));
    const auto mean = query_mean(corpus, "d0", SourceSet::all());

    // Gaussian log-likelihood of the queries at mu, up to its constant.
    auto loglik = [&](const std::vector<double>& mu) {
      double value = 0.0;
      for (std::size_t i = 0; i < nq; ++i) {
        const auto row = corpus.query_embeddings.row(i);
        for (std::size_t j = 0; j < dim; ++j) {
          const double d = row[j] - mu[j];
          value -= 0.5 * d * d / variances[j];
        }
      }
      return value;
    };
    const double h = 1e-4;
    double norm2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      std::vector<double> up = mean, down = mean;
      up[j] += h;
      down[j] -= h;
      const double g = (loglik(up) - loglik(down)) / (2.0 * h);
      norm2 += g * g;
    }
    const double norm = std::sqrt(norm2);
    worst = std::max(worst, norm);
    const bool pass = norm < 1e-6;
    ok = ok && pass;
    std::cout << "mle-gradient trial " << t << ": dim=" << dim << " |Q_d|=" << nq
              << " grad_norm=" << norm << " " << (pass ? "OK" : "FAIL") << "\n";
  }
  std::cout << "mle-gradient max gradient norm: " << worst << "\n";
  return ok;
}

void run_verify(const VerifyOptions& opt) {
  bool ok = true;
  bool ran = false;
  if (opt.suite == "partition-oracle" || opt.suite == "all") {
    ok = verify_partition_oracle(opt.trials ? opt.trials : 50, opt.seed) && ok;
    ran = true;
  }
  if (opt.suite == "mi-identity" || opt.suite == "all") {
    ok = verify_mi_identity(opt.trials ? opt.trials : 100, opt.seed) && ok;
    ran = true;
  }
  if (opt.suite == "mle-gradient" || opt.suite == "all") {
    ok = verify_mle_gradient(opt.trials ? opt.trials : 20, opt.seed) && ok;
    ran = true;
  }
  if (!ran) throw UsageError{"unknown suite: " + opt.suite};

  RunManifest manifest;
  manifest.subcommand = "verify";
  manifest.seed = opt.seed;
  manifest.flags = {{"suite", opt.suite}, {"trials", std::to_string(opt.trials)}};
  fs::create_directories(opt.out_dir);
  manifest.save(fs::path(opt.out_dir) / "run_manifest.json");

  std::cout << (ok ? "verify: all checks passed" : "verify: FAILURES above") << "\n";
  if (!ok) throw ValidationError("verification failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical document-ID indexing and information-plane toolkit"};
  app.require_subcommand(1);

  SynthOptions synth_opt;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic Gaussian corpus");
  synth_cmd->add_option("--docs", synth_opt.config.n_docs, "Number of documents")->required();
  synth_cmd->add_option("--queries-per-doc", synth_opt.config.queries_per_doc,
                        "Train queries per document");
  synth_cmd->add_option("--dim", synth_opt.config.dim, "Embedding dimensionality");
  synth_cmd->add_option("--doc-spread", synth_opt.config.doc_spread, "Document vector std");
  synth_cmd->add_option("--query-sigma", synth_opt.config.query_sigma, "Query noise std");
  synth_cmd->add_flag("--decouple", synth_opt.config.decouple,
                      "Decouple query-space geometry from document space");
  synth_cmd->add_option("--seed", synth_opt.config.seed, "Master seed");
  synth_cmd->add_option("--out", synth_opt.out_dir, "Output directory");
  synth_cmd->callback([&] { run_synth(synth_opt); });

  IndexOptions index_opt;
  auto* index_cmd = app.add_subcommand("index", "Assign document ID strings");
  index_opt.corpus.attach(index_cmd);
  index_cmd->add_option("--method", index_opt.method, "random | hkmeans | lsh | bmi")->required();
  auto* alpha_opt = index_cmd->add_option("--alphabet-size", index_opt.alphabet_size,
                                          "Digit alphabet size (default 30; LSH fixed at 32)");
  index_cmd->add_option("--bits", index_opt.lsh_bits,
                        "LSH hyperplane count, multiple of 5 (0 = auto)");
  index_cmd->add_option("--sources", index_opt.sources,
                        "Query sources for bmi: genq,realq,docseg or all");
  index_cmd->add_option("--seed", index_opt.seed, "Master seed");
  index_cmd->add_option("--out", index_opt.out, "Output ids.tsv");
  index_cmd->callback([&] {
    index_opt.alphabet_given = alpha_opt->count() > 0;
    run_index(index_opt);
  });

  CurveOptions curve_opt;
  auto* curve_cmd = app.add_subcommand("ib-curve", "Quantify the empirical information plane");
  curve_opt.corpus.attach(curve_cmd);
  curve_cmd->add_option("--ids", curve_opt.ids_path, "Assignment TSV")->required();
  curve_cmd->add_option("--prefix-lens", curve_opt.prefix_lens,
                        "Comma-separated prefix lengths (default 1..max)");
  curve_cmd->add_option("--tau", curve_opt.tau, "Retriever softmax temperature");
  curve_cmd->add_option("--marginal", curve_opt.marginal, "paper | empirical");
  curve_cmd->add_option("--reps", curve_opt.reps, "Trie centroids: qmean | doc | indexer");
  curve_cmd->add_option("--split", curve_opt.split, "Query split: train | test | all");
  curve_cmd->add_option("--sources", curve_opt.sources, "Query sources filter");
  curve_cmd->add_option("--floor", curve_opt.floor, "Probability floor for retriever zeros");
  curve_cmd->add_option("--threads", curve_opt.threads, "Worker threads");
  curve_cmd->add_option("--units", curve_opt.units, "bits | nats");
  curve_cmd->add_option("--out", curve_opt.out, "Output CSV");
  curve_cmd->callback([&] { run_ib_curve(curve_opt); });

  EvalOptions eval_opt;
  auto* eval_cmd = app.add_subcommand("eval", "Beam-search retrieval metrics on the test split");
  eval_opt.corpus.attach(eval_cmd);
  eval_cmd->add_option("--ids", eval_opt.ids_path, "Assignment TSV")->required();
  eval_cmd->add_option("--beam-width", eval_opt.beam_width, "Beam width");
  eval_cmd->add_option("--tau", eval_opt.tau, "Retriever softmax temperature");
  eval_cmd->add_option("--reps", eval_opt.reps, "Trie centroids: indexer | doc | qmean");
  eval_cmd->add_option("--sources", eval_opt.sources, "Query sources for query-mean reps");
  eval_cmd->add_option("--threads", eval_opt.threads, "Worker threads");
  eval_cmd->add_option("--out-dir", eval_opt.out_dir, "Output directory");
  eval_cmd->callback([&] { run_eval(eval_opt); });

  VerifyOptions verify_opt;
  auto* verify_cmd = app.add_subcommand("verify", "Run the closed-form oracle suites");
  verify_cmd->add_option("--suite", verify_opt.suite,
                         "partition-oracle | mi-identity | mle-gradient | all")
      ->required();
  verify_cmd->add_option("--trials", verify_opt.trials, "Trial count (0 = suite default)");
  verify_cmd->add_option("--seed", verify_opt.seed, "Master seed");
  verify_cmd->add_option("--out-dir", verify_opt.out_dir, "Manifest directory");
  verify_cmd->callback([&] { run_verify(verify_opt); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // usage errors exit 2, help/version exit 0
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.message << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
