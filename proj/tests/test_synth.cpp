#include <algorithm>
#include <cmath>
#include <set>

#include "bmidx/error.hpp"
#include "bmidx/rng.hpp"
#include "bmidx/synth.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bmidx;
using bmidx::testing::matrix_from;
using bmidx::testing::TempDir;

TEST_SUITE_BEGIN("synth");

TEST_CASE("without decoupling the query means equal the document vectors") {
  SynthConfig config;
  config.n_docs = 20;
  config.queries_per_doc = 3;
  config.dim = 5;
  config.seed = 4;
  const SynthResult r = generate(config);
  CHECK(r.true_query_means.data == r.corpus.doc_embeddings.data);
}

TEST_CASE("generation is byte-identical per seed") {
  SynthConfig config;
  config.n_docs = 30;
  config.queries_per_doc = 4;
  config.dim = 6;
  config.decouple = true;
  config.seed = 99;
  const SynthResult a = generate(config);
  const SynthResult b = generate(config);
  CHECK(a.corpus.doc_embeddings.data == b.corpus.doc_embeddings.data);
  CHECK(a.corpus.query_embeddings.data == b.corpus.query_embeddings.data);
  CHECK(a.true_query_means.data == b.true_query_means.data);

  config.seed = 100;
  const SynthResult c = generate(config);
  CHECK(a.corpus.doc_embeddings.data != c.corpus.doc_embeddings.data);
}

TEST_CASE("corpus shape: train queries per doc plus one held-out test query") {
  SynthConfig config;
  config.n_docs = 15;
  config.queries_per_doc = 7;
  config.dim = 3;
  config.seed = 1;
  const SynthResult r = generate(config);
  CHECK(r.corpus.documents.size() == 15);
  CHECK(r.corpus.queries.size() == 15 * 7 + 15);
  CHECK(r.corpus.query_indices(SourceSet::all(), Split::Test).size() == 15);

  const auto groups = r.corpus.queries_by_doc(SourceSet::all(), Split::Test);
  for (const auto& g : groups) CHECK(g.size() == 1);
  for (const Query& q : r.corpus.queries) CHECK(q.source == QuerySource::GenQ);
}

TEST_CASE("sample query means concentrate around the true means") {
  SynthConfig config;
  config.n_docs = 400;
  config.queries_per_doc = 10;
  config.dim = 8;
  config.query_sigma = 0.1;
  config.decouple = true;
  config.seed = 7;
  const SynthResult r = generate(config);

  const auto groups = r.corpus.queries_by_doc(SourceSet::all(), Split::Train);
  const double bound =
      4.0 * config.query_sigma / std::sqrt(static_cast<double>(config.queries_per_doc));
  std::size_t ok = 0;
  for (std::size_t d = 0; d < config.n_docs; ++d) {
    std::vector<double> mean(config.dim, 0.0);
    for (std::size_t qi : groups[d]) {
      const auto row = r.corpus.query_embeddings.row(r.corpus.queries[qi].row);
      for (std::size_t j = 0; j < config.dim; ++j) mean[j] += row[j];
    }
    for (double& v : mean) v /= static_cast<double>(groups[d].size());
    bool within = true;
    for (std::size_t j = 0; j < config.dim; ++j) {
      within = within && std::abs(mean[j] - r.true_query_means.row(d)[j]) <= bound;
    }
    ok += within ? 1 : 0;
  }
  CHECK(ok >= 396);  // at least 99% of documents
}

TEST_CASE("decoupling materially reduces the inter-document distance correlation") {
  SynthConfig config;
  config.n_docs = 120;
  config.queries_per_doc = 2;
  config.dim = 8;
  config.seed = 13;

  const SynthResult coupled = generate(config);
  const double corr_coupled =
      distance_correlation(coupled.corpus.doc_embeddings, coupled.true_query_means);
  CHECK(corr_coupled == doctest::Approx(1.0).epsilon(1e-9));

  config.decouple = true;
  const SynthResult decoupled = generate(config);
  const double corr = distance_correlation(decoupled.corpus.doc_embeddings,
                                           decoupled.true_query_means);
  // Sanity metric, reported rather than asserted to a threshold.
  MESSAGE("decoupled distance correlation: " << corr << " (coupled: " << corr_coupled << ")");
  CHECK(corr >= -1.0);
  CHECK(corr <= 1.0);
}

TEST_CASE("synth corpus round-trips through the standard corpus files") {
  TempDir tmp;
  SynthConfig config;
  config.n_docs = 12;
  config.queries_per_doc = 2;
  config.dim = 4;
  config.seed = 21;
  const SynthResult r = generate(config);

  save_documents_jsonl(r.corpus, tmp / "docs.jsonl");
  save_queries_jsonl(r.corpus, tmp / "queries.jsonl");
  save_embeddings(r.corpus.doc_embeddings, tmp / "doc_vectors.f32");
  save_embeddings(r.corpus.query_embeddings, tmp / "query_vectors.f32");

  const Corpus back = load_corpus(tmp / "docs.jsonl", tmp / "queries.jsonl",
                                  load_embeddings(tmp / "doc_vectors.f32"),
                                  load_embeddings(tmp / "query_vectors.f32"));
  CHECK(back.documents.size() == r.corpus.documents.size());
  CHECK(back.queries.size() == r.corpus.queries.size());
  CHECK(back.doc_embeddings.data == r.corpus.doc_embeddings.data);
  CHECK(back.query_embeddings.data == r.corpus.query_embeddings.data);
  CHECK(back.queries[0].query_id == r.corpus.queries[0].query_id);
}

TEST_CASE("invalid synth configs are argument errors") {
  SynthConfig config;
  config.n_docs = 0;
  CHECK_THROWS_AS(generate(config), ArgumentError);
  config.n_docs = 1;
  config.query_sigma = 0.0;
  CHECK_THROWS_AS(generate(config), ArgumentError);
}

TEST_CASE("two-blob instance has one optimal partition under both criteria") {
  const EmbeddingMatrix points = matrix_from(4, 1, {0.0, 1.0, 10.0, 11.0});
  const auto oracle = enumerate_partitions_oracle(points, 2);
  CHECK(oracle.n_partitions == 7);  // Stirling S(4,2)
  REQUIRE(oracle.argmin_partitions.size() == 1);
  REQUIRE(oracle.argmax_partitions.size() == 1);
  const Partition expected{{0, 1}, {2, 3}};
  CHECK(oracle.argmin_partitions[0] == expected);
  CHECK(oracle.argmax_partitions[0] == expected);
  CHECK(oracle.min_objective == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identical points make every partition optimal") {
  const EmbeddingMatrix points = matrix_from(4, 2, std::vector<double>(8, 2.0));
  const auto oracle = enumerate_partitions_oracle(points, 2);
  CHECK(oracle.argmin_partitions.size() == oracle.n_partitions);
  CHECK(oracle.argmax_partitions.size() == oracle.n_partitions);
  CHECK(oracle.min_objective == 0.0);
}

TEST_CASE("oracle bounds are enforced") {
  const EmbeddingMatrix points = EmbeddingMatrix::zeros(11, 1);
  CHECK_THROWS_AS(enumerate_partitions_oracle(points, 2), ArgumentError);
  const EmbeddingMatrix small = EmbeddingMatrix::zeros(5, 1);
  CHECK_THROWS_AS(enumerate_partitions_oracle(small, 4), ArgumentError);
  CHECK_THROWS_AS(enumerate_partitions_oracle(small, 0), ArgumentError);
}

TEST_CASE("likelihood argmax equals objective argmin on seeded instances") {
  for (std::uint64_t t = 0; t < 20; ++t) {
    std::mt19937_64 rng(derive_seed(500, t));
    const std::size_t n = 4 + static_cast<std::size_t>(rng() % 5);
    const std::size_t dim = 1 + static_cast<std::size_t>(rng() % 3);
    const std::size_t k = 2 + static_cast<std::size_t>(rng() % 2);
    EmbeddingMatrix points = EmbeddingMatrix::zeros(n, dim);
    for (double& v : points.data) v = std_normal(rng);
    const auto oracle = enumerate_partitions_oracle(points, k, {1.0, 1.0});
    CAPTURE(t);
    CHECK(oracle.argmin_partitions == oracle.argmax_partitions);
  }
}

TEST_CASE("independent joints carry no mutual information") {
  std::vector<std::vector<double>> joint(3, std::vector<double>(4));
  const std::vector<double> pd{0.2, 0.3, 0.5};
  const std::vector<double> pq{0.1, 0.2, 0.3, 0.4};
  for (std::size_t d = 0; d < 3; ++d) {
    for (std::size_t q = 0; q < 4; ++q) joint[d][q] = pd[d] * pq[q];
  }
  const auto mi = discrete_mi_oracle(joint, std::vector<int>{0, 1, 0});
  CHECK(std::abs(mi.i_dq) < 1e-12);
  CHECK(std::abs(mi.i_tq) < 1e-12);
  CHECK(std::abs(mi.i_dq_given_t) < 1e-12);
}

TEST_CASE("a constant map leaves all information conditional") {
  std::vector<std::vector<double>> joint{{0.4, 0.1}, {0.05, 0.45}};
  const auto mi = discrete_mi_oracle(joint, std::vector<int>{0, 0});
  CHECK(std::abs(mi.i_tq) < 1e-12);
  CHECK(mi.i_dq_given_t == doctest::Approx(mi.i_dq).epsilon(1e-12));
  CHECK(mi.i_dq > 0.1);
}

TEST_CASE("markov identity holds on random joints") {
  for (std::uint64_t t = 0; t < 30; ++t) {
    std::mt19937_64 rng(derive_seed(800, t));
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
    std::vector<int> f(nd);
    const int nt = 1 + static_cast<int>(rng() % nd);
    for (int& v : f) v = static_cast<int>(rng() % static_cast<std::uint64_t>(nt));
    const auto mi = discrete_mi_oracle(joint, f);
    CAPTURE(t);
    CHECK(std::abs(mi.i_dq_given_t - (mi.i_dq - mi.i_tq)) < 1e-9);
  }
}

TEST_CASE("oracle rejects bad tables") {
  std::vector<std::vector<double>> joint{{0.5, 0.4}};  // sums to 0.9
  CHECK_THROWS_AS(discrete_mi_oracle(joint, std::vector<int>{0}), ArgumentError);
  std::vector<std::vector<double>> big(9, std::vector<double>(2, 1.0 / 18));
  CHECK_THROWS_AS(discrete_mi_oracle(big, std::vector<int>(9, 0)), ArgumentError);
}

TEST_SUITE_END();
