#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "bmidx/corpus.hpp"
#include "bmidx/retrieval.hpp"

namespace bmidx {

struct MetricsReport {
  std::map<int, double> recall_at;  // cutoff -> percentage in [0, 100]
  double mrr_at_100 = 0.0;          // in [0, 1]
  std::size_t n_queries = 0;
};

// Rec@N = 100 * |{q : gold within top N}| / |Q|; MRR@100 averages 1/rank
// with 0 when the gold document is outside the top 100. Every ranking's
// query must exist in the corpus (its gold document defines the target).
MetricsReport score(std::span<const Ranking> rankings, const Corpus& corpus,
                    std::span<const int> cutoffs);
MetricsReport score(std::span<const Ranking> rankings, const Corpus& corpus);

// {"recall": {"1": x, "10": y, "100": z}, "mrr100": m, "n_queries": n}
void save_metrics_json(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace bmidx
