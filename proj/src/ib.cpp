#include "bmidx/ib.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "bmidx/error.hpp"
#include "bmidx/parallel.hpp"

namespace bmidx {

GaussianParams GaussianParams::isotropic(std::vector<double> mean, double variance) {
  GaussianParams p;
  p.mean = std::move(mean);
  p.variances = {variance};
  return p;
}

GaussianParams GaussianParams::diagonal(std::vector<double> mean, std::vector<double> variances) {
  GaussianParams p;
  p.mean = std::move(mean);
  p.variances = std::move(variances);
  return p;
}

namespace {

void check_gaussian(const GaussianParams& g, const char* who) {
  if (!g.is_isotropic() && g.variances.size() != g.mean.size()) {
    throw ArgumentError(std::string(who) + ": diagonal covariance size does not match mean");
  }
  for (double v : g.variances) {
    if (!(v > 0.0)) throw ArgumentError(std::string(who) + ": variances must be positive");
  }
}

}  // namespace

double kl_gaussian(const GaussianParams& p, const GaussianParams& q_iso) {
  check_gaussian(p, "kl_gaussian p");
  check_gaussian(q_iso, "kl_gaussian q");
  if (!q_iso.is_isotropic()) throw ArgumentError("kl_gaussian: q must be isotropic");
  if (p.dim() != q_iso.dim()) throw ArgumentError("kl_gaussian: dimension mismatch");

  const std::size_t d = p.dim();
  const double sigma2 = q_iso.variances[0];
  double trace = 0.0;
  double log_det = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    trace += p.variance(i);
    log_det += std::log(p.variance(i));
  }
  double mean_dist2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = q_iso.mean[i] - p.mean[i];
    mean_dist2 += diff * diff;
  }
  return 0.5 * (trace / sigma2 + mean_dist2 / sigma2 - static_cast<double>(d) +
                static_cast<double>(d) * std::log(sigma2) - log_det);
}

std::vector<double> optimal_assignment_distribution(const GaussianParams& doc,
                                                    const std::vector<GaussianParams>& clusters,
                                                    std::span<const double> prior,
                                                    const BetaParams& beta) {
  if (clusters.empty()) throw ArgumentError("no clusters");
  if (prior.size() != clusters.size()) {
    throw ArgumentError("prior length does not match cluster count");
  }
  if (beta.beta < 0.0) throw ArgumentError("beta must be nonnegative");
  double prior_sum = 0.0;
  for (double p : prior) {
    if (p < 0.0) throw ArgumentError("prior entries must be nonnegative");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > 1e-6) throw ArgumentError("prior must sum to 1");

  if (beta.beta == 0.0) {
    // The exponent vanishes; the posterior is the prior itself.
    return std::vector<double>(prior.begin(), prior.end());
  }

  // Log-space weights so that large beta times large KL never underflows to
  // an all-zero vector.
  std::vector<double> log_w(clusters.size(), -std::numeric_limits<double>::infinity());
  double max_w = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < clusters.size(); ++t) {
    if (prior[t] <= 0.0) continue;
    log_w[t] = std::log(prior[t]) - beta.beta * kl_gaussian(doc, clusters[t]);
    max_w = std::max(max_w, log_w[t]);
  }
  if (!std::isfinite(max_w)) throw ArgumentError("prior has no positive entry");

  std::vector<double> out(clusters.size(), 0.0);
  double z = 0.0;
  for (std::size_t t = 0; t < clusters.size(); ++t) {
    if (std::isfinite(log_w[t])) {
      out[t] = std::exp(log_w[t] - max_w);
      z += out[t];
    }
  }
  for (double& v : out) v /= z;
  return out;
}

double indexing_log_likelihood(const EmbeddingMatrix& reps, std::span<const int> labels,
                               const BetaParams& beta) {
  if (labels.size() != reps.rows) throw ArgumentError("one label per representative required");
  if (labels.empty()) throw ArgumentError("empty representative set");
  if (!(beta.sigma2 > 0.0)) throw ArgumentError("sigma^2 must be positive");

  int k = 0;
  for (int l : labels) {
    if (l < 0) throw ArgumentError("labels must be nonnegative");
    k = std::max(k, l + 1);
  }
  std::vector<double> centroids(static_cast<std::size_t>(k) * reps.dim, 0.0);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < reps.rows; ++i) {
    const auto row = reps.row(i);
    double* c = centroids.data() + static_cast<std::size_t>(labels[i]) * reps.dim;
    for (std::size_t j = 0; j < reps.dim; ++j) c[j] += row[j];
    ++sizes[static_cast<std::size_t>(labels[i])];
  }
  for (int t = 0; t < k; ++t) {
    if (sizes[static_cast<std::size_t>(t)] == 0) {
      std::ostringstream msg;
      msg << "cluster " << t << " is empty";
      throw ArgumentError(msg.str());
    }
    double* c = centroids.data() + static_cast<std::size_t>(t) * reps.dim;
    const double inv = 1.0 / static_cast<double>(sizes[static_cast<std::size_t>(t)]);
    for (std::size_t j = 0; j < reps.dim; ++j) c[j] *= inv;
  }

  double objective = 0.0;
  for (std::size_t i = 0; i < reps.rows; ++i) {
    const auto row = reps.row(i);
    const double* c = centroids.data() + static_cast<std::size_t>(labels[i]) * reps.dim;
    for (std::size_t j = 0; j < reps.dim; ++j) {
      const double d = row[j] - c[j];
      objective += d * d;
    }
  }
  return -beta.beta / (2.0 * beta.sigma2) * objective;
}

namespace {

IdString truncated(const IdString& id, std::size_t prefix_len) {
  if (prefix_len >= id.size()) return id;
  return IdString(id.begin(), id.begin() + static_cast<std::ptrdiff_t>(prefix_len));
}

// prefix -> ordinal in first-appearance (slot) order, plus group sizes.
struct PrefixGroups {
  std::map<IdString, std::size_t> index;
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> doc_group;  // per slot
};

PrefixGroups group_by_prefix(const IndexAssignment& a, std::size_t prefix_len) {
  PrefixGroups g;
  g.doc_group.resize(a.ids.size());
  for (std::size_t i = 0; i < a.ids.size(); ++i) {
    const IdString key = truncated(a.ids[i], prefix_len);
    auto [it, inserted] = g.index.emplace(key, g.index.size());
    if (inserted) g.sizes.push_back(0);
    g.doc_group[i] = it->second;
    ++g.sizes[it->second];
  }
  return g;
}

}  // namespace

std::vector<int> prefix_labels(const IndexAssignment& a, std::size_t level) {
  if (level == 0) throw ArgumentError("prefix level must be at least 1");
  const PrefixGroups g = group_by_prefix(a, level);
  // Relabel in first-appearance order over slots for a dense 0..k-1 map.
  std::vector<int> labels(a.ids.size());
  std::map<std::size_t, int> dense;
  for (std::size_t i = 0; i < a.ids.size(); ++i) {
    auto it = dense.emplace(g.doc_group[i], static_cast<int>(dense.size())).first;
    labels[i] = it->second;
  }
  return labels;
}

std::size_t count_prefixes(const IndexAssignment& a, std::size_t prefix_len) {
  return group_by_prefix(a, prefix_len).index.size();
}

double mutual_info_dt(const IndexAssignment& a, std::size_t prefix_len) {
  if (prefix_len == 0) throw ArgumentError("prefix length must be at least 1");
  if (a.ids.empty()) throw ArgumentError("empty assignment");
  const PrefixGroups g = group_by_prefix(a, prefix_len);
  const double n = static_cast<double>(a.ids.size());
  double sum_log_group = 0.0;
  for (std::size_t i = 0; i < a.ids.size(); ++i) {
    sum_log_group += std::log2(static_cast<double>(g.sizes[g.doc_group[i]]));
  }
  return std::log2(n) - sum_log_group / n;
}

namespace {

// Deterministic chunked sums: per-query terms are accumulated within
// fixed-size chunks and the chunk partials combined in index order, so the
// result is identical for any thread count.
constexpr std::size_t kChunk = 256;

struct ChunkSums {
  double term = 0.0;
  std::size_t clamped = 0;
};

template <typename PerQuery>
std::vector<ChunkSums> run_chunked(std::size_t n, int threads, const PerQuery& per_query) {
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  std::vector<ChunkSums> partials(n_chunks);
  parallel_for(n_chunks, threads, [&](std::size_t chunk) {
    const std::size_t begin = chunk * kChunk;
    const std::size_t end = std::min(n, begin + kChunk);
    ChunkSums sums;
    for (std::size_t i = begin; i < end; ++i) {
      per_query(i, sums);
    }
    partials[chunk] = sums;
  });
  return partials;
}

}  // namespace

CmiResult cond_mutual_info(const IndexAssignment& a, std::size_t prefix_len,
                           const PrefixScorer& retriever, const Corpus& corpus,
                           const CmiOptions& options) {
  if (prefix_len == 0) throw ArgumentError("prefix length must be at least 1");
  if (!(options.prob_floor > 0.0)) throw ArgumentError("probability floor must be positive");

  const auto query_idx = corpus.query_indices(options.sources, options.split);
  if (query_idx.empty()) throw ValidationError("no queries selected for CMI estimation");

  const PrefixGroups groups = group_by_prefix(a, prefix_len);
  const double log2_docs = std::log2(static_cast<double>(a.ids.size()));
  const double log2_prefixes = std::log2(static_cast<double>(groups.index.size()));

  // Gold prefix and marginal term per query, resolved up front.
  struct QueryTerm {
    std::size_t query_row;
    const IdString* prefix;
    double log2_marginal;
  };
  std::vector<IdString> prefix_store;
  prefix_store.reserve(groups.index.size());
  std::vector<const IdString*> group_prefix(groups.index.size());
  std::vector<double> group_marginal(groups.index.size());
  for (const auto& [prefix, g] : groups.index) {
    prefix_store.push_back(prefix);
  }
  {
    std::size_t i = 0;
    for (const auto& [prefix, g] : groups.index) {
      group_prefix[g] = &prefix_store[i++];
      group_marginal[g] = options.marginal == MarginalMode::PaperFaithful
                              ? -log2_prefixes
                              : std::log2(static_cast<double>(groups.sizes[g]) /
                                          static_cast<double>(a.ids.size()));
    }
  }

  std::vector<QueryTerm> terms(query_idx.size());
  for (std::size_t i = 0; i < query_idx.size(); ++i) {
    const Query& q = corpus.queries[query_idx[i]];
    const std::size_t slot = a.slot(q.gold_doc_id);
    const std::size_t g = groups.doc_group[slot];
    terms[i] = {q.row, group_prefix[g], group_marginal[g]};
  }

  const auto partials = run_chunked(terms.size(), options.threads, [&](std::size_t i, ChunkSums& sums) {
    const QueryTerm& t = terms[i];
    double p = retriever(corpus.query_embeddings.row(t.query_row), *t.prefix);
    if (p < options.prob_floor) {
      p = options.prob_floor;
      ++sums.clamped;
    }
    sums.term += -std::log2(p) + t.log2_marginal + log2_docs;
  });

  CmiResult result;
  result.n_queries = terms.size();
  double total = 0.0;
  for (const ChunkSums& c : partials) {
    total += c.term;
    result.clamped_queries += c.clamped;
  }
  result.bits = total / static_cast<double>(terms.size());
  return result;
}

std::vector<IBPoint> ib_curve(const IndexAssignment& a, const PrefixScorer& retriever,
                              const Corpus& corpus, std::span<const std::size_t> prefix_lens,
                              const CmiOptions& options) {
  if (prefix_lens.empty()) throw ArgumentError("prefix length list must not be empty");
  constexpr double kSlack = 1e-9;
  const double log2_docs = std::log2(static_cast<double>(a.ids.size()));

  std::vector<IBPoint> curve;
  curve.reserve(prefix_lens.size());
  for (std::size_t l : prefix_lens) {
    if (l == 0) throw ArgumentError("prefix lengths must be at least 1");
    IBPoint point;
    point.prefix_len = l;
    point.i_dt = mutual_info_dt(a, l);
    const CmiResult cmi = cond_mutual_info(a, l, retriever, corpus, options);
    point.i_dq_given_t = cmi.bits;
    point.clamped_queries = cmi.clamped_queries;
    if (point.i_dt < -kSlack || point.i_dt > log2_docs + kSlack) {
      throw ValidationError("I(D;T) outside [0, log2 |D|]");
    }
    if (point.i_dq_given_t < -kSlack) {
      throw ValidationError("I(D;Q|T) below zero");
    }
    curve.push_back(point);
  }
  std::sort(curve.begin(), curve.end(), [](const IBPoint& x, const IBPoint& y) {
    if (x.i_dt != y.i_dt) return x.i_dt < y.i_dt;
    return x.prefix_len < y.prefix_len;
  });
  return curve;
}

void save_curve_csv(std::span<const IBPoint> curve, const std::filesystem::path& path, bool nats) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << std::setprecision(17);
  if (nats) {
    out << "l,i_dt_nats,i_dq_given_t_nats,clamped_queries\n";
  } else {
    out << "l,i_dt_bits,i_dq_given_t_bits,clamped_queries\n";
  }
  for (const IBPoint& p : curve) {
    const double a = nats ? bits_to_nats(p.i_dt) : p.i_dt;
    const double b = nats ? bits_to_nats(p.i_dq_given_t) : p.i_dq_given_t;
    out << p.prefix_len << ',' << a << ',' << b << ',' << p.clamped_queries << "\n";
  }
}

}  // namespace bmidx
