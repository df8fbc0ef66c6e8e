#include "bmidx/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "bmidx/error.hpp"
#include "bmidx/rng.hpp"

namespace bmidx {

namespace {

std::string padded(const char* prefix, std::size_t value, int width) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, value);
  return buf;
}

// Orthonormal matrix from modified Gram-Schmidt over a seeded Gaussian
// matrix; column-major application q_out = R x.
std::vector<double> random_orthogonal(std::size_t dim, std::mt19937_64& rng) {
  std::vector<double> r(dim * dim);  // row-major
  for (double& v : r) v = std_normal(rng);
  for (std::size_t c = 0; c < dim; ++c) {
    for (std::size_t prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (std::size_t i = 0; i < dim; ++i) dot += r[i * dim + c] * r[i * dim + prev];
      for (std::size_t i = 0; i < dim; ++i) r[i * dim + c] -= dot * r[i * dim + prev];
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < dim; ++i) norm += r[i * dim + c] * r[i * dim + c];
    norm = std::sqrt(norm);
    if (!(norm > 1e-12)) throw Error("degenerate Gaussian matrix in orthogonalization");
    for (std::size_t i = 0; i < dim; ++i) r[i * dim + c] /= norm;
  }
  return r;
}

void apply_matrix(const std::vector<double>& r, std::span<const double> x,
                  std::span<double> out) {
  const std::size_t dim = out.size();
  for (std::size_t i = 0; i < dim; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) acc += r[i * dim + j] * x[j];
    out[i] = acc;
  }
}

}  // namespace

SynthResult generate(const SynthConfig& config) {
  if (config.n_docs < 1 || config.queries_per_doc < 1 || config.dim < 1) {
    throw ArgumentError("synth: counts must be at least 1");
  }
  if (!(config.doc_spread > 0.0) || !(config.query_sigma > 0.0)) {
    throw ArgumentError("synth: spreads must be positive");
  }

  const std::size_t n = config.n_docs;
  const std::size_t dim = config.dim;

  EmbeddingMatrix doc_vecs = EmbeddingMatrix::zeros(n, dim);
  {
    std::mt19937_64 rng(derive_seed(config.seed, "docs"));
    for (double& v : doc_vecs.data) v = config.doc_spread * std_normal(rng);
  }
  snap_to_f32(doc_vecs);

  // g maps a document to its query-space mean. Decoupling composes a random
  // orthogonal map with a random re-labeling of which document occupies
  // which position, so query-space geometry is a shuffled copy of the
  // document cloud rather than an isometric image of it.
  EmbeddingMatrix true_means = EmbeddingMatrix::zeros(n, dim);
  if (config.decouple) {
    std::mt19937_64 rot_rng(derive_seed(config.seed, "rotation"));
    const auto rotation = random_orthogonal(dim, rot_rng);
    std::vector<std::size_t> relabel(n);
    std::iota(relabel.begin(), relabel.end(), 0);
    std::mt19937_64 perm_rng(derive_seed(config.seed, "relabel"));
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(perm_rng() % i);
      std::swap(relabel[i - 1], relabel[j]);
    }
    for (std::size_t d = 0; d < n; ++d) {
      apply_matrix(rotation, doc_vecs.row(relabel[d]), true_means.row(d));
    }
  } else {
    true_means.data = doc_vecs.data;
  }

  const std::size_t n_train = n * config.queries_per_doc;
  EmbeddingMatrix query_vecs = EmbeddingMatrix::zeros(n_train + n, dim);
  {
    std::mt19937_64 rng(derive_seed(config.seed, "queries"));
    for (std::size_t d = 0; d < n; ++d) {
      for (std::size_t j = 0; j < config.queries_per_doc; ++j) {
        auto row = query_vecs.row(d * config.queries_per_doc + j);
        const auto mean = true_means.row(d);
        for (std::size_t t = 0; t < dim; ++t) row[t] = mean[t] + config.query_sigma * std_normal(rng);
      }
    }
    for (std::size_t d = 0; d < n; ++d) {
      auto row = query_vecs.row(n_train + d);
      const auto mean = true_means.row(d);
      for (std::size_t t = 0; t < dim; ++t) row[t] = mean[t] + config.query_sigma * std_normal(rng);
    }
  }
  snap_to_f32(query_vecs);

  std::vector<Document> documents(n);
  for (std::size_t d = 0; d < n; ++d) {
    documents[d] = {padded("d", d, 6), d};
  }
  std::vector<Query> queries;
  queries.reserve(n_train + n);
  for (std::size_t d = 0; d < n; ++d) {
    for (std::size_t j = 0; j < config.queries_per_doc; ++j) {
      Query q;
      q.query_id = padded("qtrain-", d, 6) + padded("-", j, 3);
      q.gold_doc_id = documents[d].doc_id;
      q.source = QuerySource::GenQ;
      q.split = Split::Train;
      q.row = d * config.queries_per_doc + j;
      queries.push_back(std::move(q));
    }
  }
  for (std::size_t d = 0; d < n; ++d) {
    Query q;
    q.query_id = padded("qtest-", d, 6);
    q.gold_doc_id = documents[d].doc_id;
    q.source = QuerySource::GenQ;
    q.split = Split::Test;
    q.row = n_train + d;
    queries.push_back(std::move(q));
  }

  SynthResult result;
  result.corpus = assemble_corpus(std::move(documents), std::move(queries), std::move(doc_vecs),
                                  std::move(query_vecs));
  result.true_query_means = std::move(true_means);
  return result;
}

double distance_correlation(const EmbeddingMatrix& doc_vecs, const EmbeddingMatrix& query_means) {
  if (doc_vecs.rows != query_means.rows) {
    throw ArgumentError("matrices must have the same number of rows");
  }
  const std::size_t n = doc_vecs.rows;
  if (n < 3) throw ArgumentError("need at least 3 rows");

  // Stride through pairs so no more than ~200k contribute.
  const std::size_t total_pairs = n * (n - 1) / 2;
  const std::size_t stride = std::max<std::size_t>(1, total_pairs / 200000);

  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  std::size_t count = 0;
  std::size_t pair_index = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++pair_index) {
      if (pair_index % stride != 0) continue;
      const double x = std::sqrt(squared_distance(doc_vecs.row(i), doc_vecs.row(j)));
      const double y = std::sqrt(squared_distance(query_means.row(i), query_means.row(j)));
      sx += x;
      sy += y;
      sxx += x * x;
      syy += y * y;
      sxy += x * y;
      ++count;
    }
  }
  const double c = static_cast<double>(count);
  const double cov = sxy / c - (sx / c) * (sy / c);
  const double vx = sxx / c - (sx / c) * (sx / c);
  const double vy = syy / c - (sy / c) * (sy / c);
  if (vx <= 0.0 || vy <= 0.0) return 0.0;
  return cov / std::sqrt(vx * vy);
}

namespace {

double partition_objective(const EmbeddingMatrix& points, std::span<const int> labels,
                           std::size_t k) {
  const std::size_t dim = points.dim;
  std::vector<double> centroids(k * dim, 0.0);
  std::vector<std::size_t> sizes(k, 0);
  for (std::size_t i = 0; i < points.rows; ++i) {
    const auto row = points.row(i);
    double* c = centroids.data() + static_cast<std::size_t>(labels[i]) * dim;
    for (std::size_t j = 0; j < dim; ++j) c[j] += row[j];
    ++sizes[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t t = 0; t < k; ++t) {
    const double inv = 1.0 / static_cast<double>(sizes[t]);
    double* c = centroids.data() + t * dim;
    for (std::size_t j = 0; j < dim; ++j) c[j] *= inv;
  }
  double obj = 0.0;
  for (std::size_t i = 0; i < points.rows; ++i) {
    const auto row = points.row(i);
    const double* c = centroids.data() + static_cast<std::size_t>(labels[i]) * dim;
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = row[j] - c[j];
      obj += d * d;
    }
  }
  return obj;
}

Partition to_partition(std::span<const int> labels, std::size_t k) {
  Partition parts(k);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    parts[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  // Restricted-growth labels already order parts by their minimum element.
  return parts;
}

}  // namespace

PartitionOracleResult enumerate_partitions_oracle(const EmbeddingMatrix& points, std::size_t k,
                                                  const BetaParams& beta) {
  if (points.rows > 10) throw ArgumentError("partition oracle bounded at 10 points");
  if (k > 3) throw ArgumentError("partition oracle bounded at k = 3");
  if (k == 0 || k > points.rows) throw ArgumentError("invalid part count");

  const std::size_t n = points.rows;
  std::vector<int> labels(n, 0);
  std::vector<double> objectives;
  std::vector<double> likelihoods;
  std::vector<Partition> partitions;

  // Restricted growth strings enumerate each set partition exactly once.
  auto recurse = [&](auto&& self, std::size_t i, int max_used) -> void {
    if (i == n) {
      if (static_cast<std::size_t>(max_used) + 1 != k) return;
      objectives.push_back(partition_objective(points, labels, k));
      likelihoods.push_back(indexing_log_likelihood(points, labels, beta));
      partitions.push_back(to_partition(labels, k));
      return;
    }
    const int limit = std::min(max_used + 1, static_cast<int>(k) - 1);
    for (int l = 0; l <= limit; ++l) {
      labels[i] = l;
      self(self, i + 1, std::max(max_used, l));
    }
  };
  labels[0] = 0;
  recurse(recurse, 1, 0);

  PartitionOracleResult result;
  result.n_partitions = partitions.size();
  result.min_objective = *std::min_element(objectives.begin(), objectives.end());
  result.max_log_likelihood = *std::max_element(likelihoods.begin(), likelihoods.end());

  const double obj_tol = 1e-9 * std::max(1.0, std::abs(result.min_objective));
  const double lik_tol = 1e-9 * std::max(1.0, std::abs(result.max_log_likelihood));
  for (std::size_t p = 0; p < partitions.size(); ++p) {
    if (objectives[p] <= result.min_objective + obj_tol) {
      result.argmin_partitions.push_back(partitions[p]);
    }
    if (likelihoods[p] >= result.max_log_likelihood - lik_tol) {
      result.argmax_partitions.push_back(partitions[p]);
    }
  }
  return result;
}

DiscreteMiResult discrete_mi_oracle(const std::vector<std::vector<double>>& joint,
                                    std::span<const int> f) {
  const std::size_t nd = joint.size();
  if (nd == 0 || nd > 8) throw ArgumentError("joint table must have 1..8 rows");
  const std::size_t nq = joint[0].size();
  if (nq == 0 || nq > 8) throw ArgumentError("joint table must have 1..8 columns");
  if (f.size() != nd) throw ArgumentError("f must map every document");

  double total = 0.0;
  int nt = 0;
  for (std::size_t d = 0; d < nd; ++d) {
    if (joint[d].size() != nq) throw ArgumentError("ragged joint table");
    if (f[d] < 0) throw ArgumentError("f must be nonnegative");
    nt = std::max(nt, f[d] + 1);
    for (double p : joint[d]) {
      if (p < 0.0) throw ArgumentError("joint probabilities must be nonnegative");
      total += p;
    }
  }
  if (std::abs(total - 1.0) > 1e-12) throw ArgumentError("joint table must sum to 1");

  std::vector<double> p_d(nd, 0.0), p_q(nq, 0.0), p_t(static_cast<std::size_t>(nt), 0.0);
  std::vector<std::vector<double>> p_tq(static_cast<std::size_t>(nt),
                                        std::vector<double>(nq, 0.0));
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t q = 0; q < nq; ++q) {
      const double p = joint[d][q];
      p_d[d] += p;
      p_q[q] += p;
      p_t[static_cast<std::size_t>(f[d])] += p;
      p_tq[static_cast<std::size_t>(f[d])][q] += p;
    }
  }

  DiscreteMiResult r;
  for (std::size_t d = 0; d < nd; ++d) {
    for (std::size_t q = 0; q < nq; ++q) {
      const double p = joint[d][q];
      if (p <= 0.0) continue;
      r.i_dq += p * std::log2(p / (p_d[d] * p_q[q]));
      const std::size_t t = static_cast<std::size_t>(f[d]);
      // p(d,q|t)/(p(d|t) p(q|t)) = p(d,q) p(t) / (p(d) p(t,q)) since t = f(d).
      r.i_dq_given_t += p * std::log2(p * p_t[t] / (p_d[d] * p_tq[t][q]));
    }
  }
  for (int t = 0; t < nt; ++t) {
    for (std::size_t q = 0; q < nq; ++q) {
      const double p = p_tq[static_cast<std::size_t>(t)][q];
      if (p <= 0.0) continue;
      r.i_tq += p * std::log2(p / (p_t[static_cast<std::size_t>(t)] * p_q[q]));
    }
  }
  return r;
}

}  // namespace bmidx
