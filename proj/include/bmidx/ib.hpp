#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bmidx/corpus.hpp"
#include "bmidx/indexers.hpp"
#include "bmidx/matrix.hpp"

namespace bmidx {

// Gaussian with diagonal or isotropic covariance.
struct GaussianParams {
  std::vector<double> mean;
  std::vector<double> variances;  // size dim (diagonal) or size 1 (isotropic)

  static GaussianParams isotropic(std::vector<double> mean, double variance);
  static GaussianParams diagonal(std::vector<double> mean, std::vector<double> variances);

  bool is_isotropic() const { return variances.size() == 1; }
  std::size_t dim() const { return mean.size(); }
  double variance(std::size_t i) const {
    return is_isotropic() ? variances[0] : variances[i];
  }
};

// Lagrange multiplier and the isotropic cluster variance it is paired with.
// beta = 0 is allowed: the assignment distribution then equals the prior.
struct BetaParams {
  double beta = 1.0;
  double sigma2 = 1.0;
};

// KL[p || q] in nats for q isotropic:
//   1/2 [ tr(Sigma)/sigma^2 + ||mu_q - mu_p||^2/sigma^2 - d
//         + d ln sigma^2 - ln |Sigma| ]
double kl_gaussian(const GaussianParams& p, const GaussianParams& q_iso);

// p*(t|x) proportional to p(t) exp(-beta KL[p(q|x) || p(q|t)]), computed in
// log space; sums to 1 within 1e-12.
std::vector<double> optimal_assignment_distribution(const GaussianParams& doc,
                                                    const std::vector<GaussianParams>& clusters,
                                                    std::span<const double> prior,
                                                    const BetaParams& beta);

// -beta/(2 sigma^2) * sum_d ||x_d - centroid(label_d)||^2, up to an additive
// constant; centroids are the member means. Labels must cover 0..k-1 with no
// empty cluster.
double indexing_log_likelihood(const EmbeddingMatrix& reps, std::span<const int> labels,
                               const BetaParams& beta);

// First `level` digits of every ID (full ID when shorter), relabeled to a
// dense 0..k-1 cluster map in assignment slot order.
std::vector<int> prefix_labels(const IndexAssignment& a, std::size_t level);

// Number of distinct length-l prefixes (full IDs count when shorter).
std::size_t count_prefixes(const IndexAssignment& a, std::size_t prefix_len);

// I(D;T) over the empirical distributions, in bits:
//   log2 |D| - (1/|D|) sum_d log2 |D_{t_d}^l|
double mutual_info_dt(const IndexAssignment& a, std::size_t prefix_len);

// p(t-prefix | q) for a query vector; provided by the retrieval module.
using PrefixScorer =
    std::function<double(std::span<const double> query_vec, std::span<const int> prefix)>;

enum class MarginalMode { PaperFaithful, Empirical };  // p(t) = 1/|I^l| vs |D_t^l|/|D|

struct CmiOptions {
  MarginalMode marginal = MarginalMode::PaperFaithful;
  double prob_floor = 1e-12;  // retriever zeros are clamped here and counted
  std::optional<Split> split = Split::Train;
  SourceSet sources = SourceSet::all();
  int threads = 1;  // results are identical for any thread count
};

struct CmiResult {
  double bits = 0.0;
  std::size_t clamped_queries = 0;
  std::size_t n_queries = 0;
};

// I(D;Q|T) estimate in bits: mean over queries of
//   -log2 p(t_gold^l | q) + log2 p_hat(t_gold^l) + log2 |D|
// with p(d|q) degenerate at the gold document.
CmiResult cond_mutual_info(const IndexAssignment& a, std::size_t prefix_len,
                           const PrefixScorer& retriever, const Corpus& corpus,
                           const CmiOptions& options = {});

// One coordinate pair of the information plane at a given prefix length.
struct IBPoint {
  std::size_t prefix_len = 0;
  double i_dt = 0.0;          // bits
  double i_dq_given_t = 0.0;  // bits
  std::size_t clamped_queries = 0;
};

// One point per prefix length, sorted by i_dt ascending.
std::vector<IBPoint> ib_curve(const IndexAssignment& a, const PrefixScorer& retriever,
                              const Corpus& corpus, std::span<const std::size_t> prefix_lens,
                              const CmiOptions& options = {});

// CSV: "l,i_dt_bits,i_dq_given_t_bits,clamped_queries". With nats=true the
// value columns are converted and renamed *_nats.
void save_curve_csv(std::span<const IBPoint> curve, const std::filesystem::path& path,
                    bool nats = false);

inline double bits_to_nats(double bits) { return bits * 0.6931471805599453; }

}  // namespace bmidx
