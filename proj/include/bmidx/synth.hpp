#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bmidx/corpus.hpp"
#include "bmidx/ib.hpp"
#include "bmidx/matrix.hpp"

namespace bmidx {

// Synthetic Gaussian corpus: documents at mu_d ~ N(0, doc_spread^2 I),
// queries at N(g(mu_d), query_sigma^2 I). With decouple on, g composes a
// seeded random orthogonal map with a seeded re-labeling of which document
// occupies which position, so query-space neighborhoods carry no
// information about document-space neighborhoods.
struct SynthConfig {
  std::size_t n_docs = 1;
  std::size_t queries_per_doc = 1;
  std::size_t dim = 1;
  double doc_spread = 1.0;
  double query_sigma = 0.1;
  bool decouple = false;
  std::uint64_t seed = 0;
};

struct SynthResult {
  Corpus corpus;                    // train queries GenQ, one held-out GenQ test query per doc
  EmbeddingMatrix true_query_means;  // row i = g(mu_d) for document i
};

SynthResult generate(const SynthConfig& config);

// Pearson correlation between inter-document distances in document space
// and in query-mean space; a sanity metric, reported rather than asserted.
double distance_correlation(const EmbeddingMatrix& doc_vecs, const EmbeddingMatrix& query_means);

// Canonical partition: parts sorted internally and by first element.
using Partition = std::vector<std::vector<std::size_t>>;

struct PartitionOracleResult {
  double min_objective = 0.0;
  std::vector<Partition> argmin_partitions;  // ties honored
  double max_log_likelihood = 0.0;
  std::vector<Partition> argmax_partitions;
  std::size_t n_partitions = 0;
};

// Exhaustive sweep over all partitions of the points into exactly k
// non-empty parts: the k-means objective is computed locally, the
// likelihood route goes through indexing_log_likelihood. Bounds: point
// count <= 10, k <= 3.
PartitionOracleResult enumerate_partitions_oracle(const EmbeddingMatrix& points, std::size_t k,
                                                  const BetaParams& beta = {1.0, 1.0});

struct DiscreteMiResult {
  double i_dq = 0.0;          // I(D;Q), bits
  double i_tq = 0.0;          // I(T;Q), bits
  double i_dq_given_t = 0.0;  // I(D;Q|T), bits
};

// Exact summation over a joint table p(d,q) (supports <= 8x8, must sum to 1
// within 1e-12) with a deterministic map f: d -> t.
DiscreteMiResult discrete_mi_oracle(const std::vector<std::vector<double>>& joint,
                                    std::span<const int> f);

}  // namespace bmidx
