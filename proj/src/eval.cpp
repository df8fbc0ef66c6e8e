#include "bmidx/eval.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "bmidx/error.hpp"
#include "json.hpp"

namespace bmidx {

MetricsReport score(std::span<const Ranking> rankings, const Corpus& corpus,
                    std::span<const int> cutoffs) {
  if (rankings.empty()) throw ValidationError("no rankings to score");

  std::unordered_map<std::string, const std::string*> gold_of;
  gold_of.reserve(corpus.queries.size());
  for (const Query& q : corpus.queries) {
    gold_of.emplace(q.query_id, &q.gold_doc_id);
  }

  MetricsReport report;
  report.n_queries = rankings.size();
  std::vector<std::size_t> hits(cutoffs.size(), 0);
  double mrr_sum = 0.0;

  for (const Ranking& r : rankings) {
    auto it = gold_of.find(r.query_id);
    if (it == gold_of.end()) {
      throw ReferentialError("ranking for unknown query: " + r.query_id);
    }
    const std::string& gold = *it->second;
    std::size_t rank = 0;  // 0 = not found
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      if (r.entries[i].doc_id == gold) {
        rank = i + 1;
        break;
      }
    }
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      if (rank > 0 && rank <= static_cast<std::size_t>(cutoffs[c])) ++hits[c];
    }
    if (rank > 0 && rank <= 100) mrr_sum += 1.0 / static_cast<double>(rank);
  }

  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    report.recall_at[cutoffs[c]] =
        100.0 * static_cast<double>(hits[c]) / static_cast<double>(rankings.size());
  }
  report.mrr_at_100 = mrr_sum / static_cast<double>(rankings.size());
  return report;
}

MetricsReport score(std::span<const Ranking> rankings, const Corpus& corpus) {
  static constexpr int kDefault[] = {1, 10, 100};
  return score(rankings, corpus, kDefault);
}

void save_metrics_json(const MetricsReport& report, const std::filesystem::path& path) {
  nlohmann::json j;
  nlohmann::json recall = nlohmann::json::object();
  for (const auto& [cutoff, value] : report.recall_at) {
    recall[std::to_string(cutoff)] = value;
  }
  j["recall"] = std::move(recall);
  j["mrr100"] = report.mrr_at_100;
  j["n_queries"] = report.n_queries;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace bmidx
