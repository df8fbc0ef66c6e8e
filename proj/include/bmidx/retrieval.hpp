#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bmidx/ib.hpp"
#include "bmidx/indexers.hpp"
#include "bmidx/matrix.hpp"

namespace bmidx {

// Trie over ID strings. Each node carries the mean representative vector of
// its member documents; leaves correspond to complete IDs and hold exactly
// one document.
struct TrieNode {
  int digit = -1;
  std::vector<double> centroid;
  std::vector<std::size_t> members;  // assignment slots
  std::vector<std::unique_ptr<TrieNode>> children;  // ordered by digit

  bool is_leaf() const { return children.empty(); }
  const TrieNode* child(int digit) const;
};

struct PrefixTrie {
  std::unique_ptr<TrieNode> root;
  std::vector<std::string> doc_ids;  // slot -> doc_id
  std::size_t n_nodes = 0;
  double tau = 1.0;  // informational default; scoring takes tau explicitly
};

// reps row i must hold the representative vector of assignment slot i.
PrefixTrie build_trie(const IndexAssignment& a, const EmbeddingMatrix& reps);

// Product over levels of softmax(-||q - child centroid||^2 / tau) among
// siblings along the prefix path. LookupError for unknown prefixes.
double prefix_prob(const PrefixTrie& trie, std::span<const double> query_vec,
                   std::span<const int> prefix, double tau);
double prefix_log_prob(const PrefixTrie& trie, std::span<const double> query_vec,
                       std::span<const int> prefix, double tau);

// Which vectors back the trie centroids.
enum class RepSource { DocEmbedding, QueryMean };

struct RetrieverConfig {
  double tau = 1.0;
  std::size_t beam_width = 100;
  std::size_t top_k = 100;  // documents returned per query
  RepSource rep_source = RepSource::DocEmbedding;
};

struct RankedDoc {
  std::string doc_id;
  double log_prob = 0.0;
};

struct Ranking {
  std::string query_id;
  std::vector<RankedDoc> entries;  // log_prob non-increasing, doc_ids distinct
};

// Width-W beam over trie levels by cumulative log probability; completed
// leaves stay in the beam. Ties break on path digits during search and on
// doc_id in the final ranking.
Ranking beam_rank(const PrefixTrie& trie, std::span<const double> query_vec,
                  const RetrieverConfig& config, std::string query_id = {});

// Scores every document by its full-path joint probability; exact sort.
// top_k = 0 returns all documents.
Ranking exhaustive_rank(const PrefixTrie& trie, std::span<const double> query_vec, double tau,
                        std::string query_id = {}, std::size_t top_k = 0);

// Adapter for the information-bottleneck estimators.
PrefixScorer make_trie_scorer(const PrefixTrie& trie, double tau);

// TSV: query_id <TAB> rank <TAB> doc_id <TAB> log_prob
void save_rankings_tsv(std::span<const Ranking> rankings, const std::filesystem::path& path);

}  // namespace bmidx
