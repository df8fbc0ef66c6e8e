#include "bmidx/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "bmidx/error.hpp"

namespace bmidx {

const TrieNode* TrieNode::child(int digit) const {
  for (const auto& c : children) {
    if (c->digit == digit) return c.get();
  }
  return nullptr;
}

namespace {

void compute_centroids(TrieNode& node, const EmbeddingMatrix& reps) {
  node.centroid.assign(reps.dim, 0.0);
  for (std::size_t slot : node.members) {
    const auto row = reps.row(slot);
    for (std::size_t j = 0; j < reps.dim; ++j) node.centroid[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(node.members.size());
  for (double& v : node.centroid) v *= inv;
  for (auto& child : node.children) compute_centroids(*child, reps);
}

void sort_children(TrieNode& node, std::size_t& n_nodes) {
  ++n_nodes;
  std::sort(node.children.begin(), node.children.end(),
            [](const auto& a, const auto& b) { return a->digit < b->digit; });
  for (auto& child : node.children) sort_children(*child, n_nodes);
}

// Log softmax factor of `target` among the children of `node`.
double level_log_factor(const TrieNode& node, const TrieNode& target,
                        std::span<const double> query_vec, double tau) {
  double target_logit = 0.0;
  double max_logit = -std::numeric_limits<double>::infinity();
  for (const auto& child : node.children) {
    const double logit = -squared_distance(query_vec, child->centroid) / tau;
    if (child.get() == &target) target_logit = logit;
    max_logit = std::max(max_logit, logit);
  }
  double z = 0.0;
  for (const auto& child : node.children) {
    const double logit = -squared_distance(query_vec, child->centroid) / tau;
    z += std::exp(logit - max_logit);
  }
  return target_logit - max_logit - std::log(z);
}

}  // namespace

PrefixTrie build_trie(const IndexAssignment& a, const EmbeddingMatrix& reps) {
  if (reps.rows != a.size()) {
    std::ostringstream msg;
    msg << "representative matrix has " << reps.rows << " rows for " << a.size() << " documents";
    throw ArgumentError(msg.str());
  }
  if (a.size() == 0) throw ArgumentError("cannot build a trie over an empty assignment");

  PrefixTrie trie;
  trie.root = std::make_unique<TrieNode>();
  trie.doc_ids = a.doc_ids;
  for (std::size_t slot = 0; slot < a.size(); ++slot) {
    TrieNode* node = trie.root.get();
    node->members.push_back(slot);
    for (int digit : a.ids[slot]) {
      TrieNode* next = nullptr;
      for (auto& child : node->children) {
        if (child->digit == digit) {
          next = child.get();
          break;
        }
      }
      if (next == nullptr) {
        auto child = std::make_unique<TrieNode>();
        child->digit = digit;
        next = child.get();
        node->children.push_back(std::move(child));
      }
      next->members.push_back(slot);
      node = next;
    }
    if (!node->children.empty() || node->members.size() != 1) {
      throw ValidationError("assignment is not prefix-free or not injective at doc " +
                            a.doc_ids[slot]);
    }
  }
  compute_centroids(*trie.root, reps);
  sort_children(*trie.root, trie.n_nodes);
  return trie;
}

double prefix_log_prob(const PrefixTrie& trie, std::span<const double> query_vec,
                       std::span<const int> prefix, double tau) {
  if (!(tau > 0.0)) throw ArgumentError("tau must be positive");
  const TrieNode* node = trie.root.get();
  double logp = 0.0;
  for (int digit : prefix) {
    const TrieNode* next = node->child(digit);
    if (next == nullptr) {
      throw LookupError("prefix not present in trie at digit " + std::to_string(digit));
    }
    logp += level_log_factor(*node, *next, query_vec, tau);
    node = next;
  }
  return logp;
}

double prefix_prob(const PrefixTrie& trie, std::span<const double> query_vec,
                   std::span<const int> prefix, double tau) {
  return std::exp(prefix_log_prob(trie, query_vec, prefix, tau));
}

namespace {

struct BeamItem {
  const TrieNode* node;
  double log_prob;
  IdString path;
  bool completed;
};

void finalize_ranking(std::vector<BeamItem>& completed, const PrefixTrie& trie,
                      std::size_t top_k, Ranking& out) {
  std::sort(completed.begin(), completed.end(), [&trie](const BeamItem& a, const BeamItem& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return trie.doc_ids[a.node->members[0]] < trie.doc_ids[b.node->members[0]];
  });
  const std::size_t keep = top_k == 0 ? completed.size() : std::min(top_k, completed.size());
  out.entries.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) {
    out.entries.push_back({trie.doc_ids[completed[i].node->members[0]], completed[i].log_prob});
  }
}

}  // namespace

Ranking beam_rank(const PrefixTrie& trie, std::span<const double> query_vec,
                  const RetrieverConfig& config, std::string query_id) {
  if (config.beam_width == 0) throw ArgumentError("beam width must be at least 1");
  Ranking out;
  out.query_id = std::move(query_id);

  std::vector<BeamItem> beam;
  beam.push_back({trie.root.get(), 0.0, {}, trie.root->is_leaf()});

  bool any_active = !beam.front().completed;
  while (any_active) {
    std::vector<BeamItem> next;
    next.reserve(beam.size() * 4);
    for (BeamItem& item : beam) {
      if (item.completed) {
        next.push_back(std::move(item));
        continue;
      }
      for (const auto& child : item.node->children) {
        BeamItem expanded;
        expanded.node = child.get();
        expanded.log_prob =
            item.log_prob + level_log_factor(*item.node, *child, query_vec, config.tau);
        expanded.path = item.path;
        expanded.path.push_back(child->digit);
        expanded.completed = child->is_leaf();
        next.push_back(std::move(expanded));
      }
    }
    // Completed leaves stay in the beam and count against its width.
    std::sort(next.begin(), next.end(), [](const BeamItem& a, const BeamItem& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      return a.path < b.path;
    });
    if (next.size() > config.beam_width) next.resize(config.beam_width);
    beam = std::move(next);
    any_active = std::any_of(beam.begin(), beam.end(),
                             [](const BeamItem& i) { return !i.completed; });
  }

  finalize_ranking(beam, trie, config.top_k, out);
  return out;
}

namespace {

void exhaustive_walk(const PrefixTrie& trie, const TrieNode& node, double log_prob,
                     std::span<const double> query_vec, double tau,
                     std::vector<BeamItem>& completed) {
  if (node.is_leaf()) {
    completed.push_back({&node, log_prob, {}, true});
    return;
  }
  for (const auto& child : node.children) {
    const double factor = level_log_factor(node, *child, query_vec, tau);
    exhaustive_walk(trie, *child, log_prob + factor, query_vec, tau, completed);
  }
}

}  // namespace

Ranking exhaustive_rank(const PrefixTrie& trie, std::span<const double> query_vec, double tau,
                        std::string query_id, std::size_t top_k) {
  Ranking out;
  out.query_id = std::move(query_id);
  std::vector<BeamItem> completed;
  completed.reserve(trie.doc_ids.size());
  exhaustive_walk(trie, *trie.root, 0.0, query_vec, tau, completed);
  finalize_ranking(completed, trie, top_k, out);
  return out;
}

PrefixScorer make_trie_scorer(const PrefixTrie& trie, double tau) {
  return [&trie, tau](std::span<const double> query_vec, std::span<const int> prefix) {
    return prefix_prob(trie, query_vec, prefix, tau);
  };
}

void save_rankings_tsv(std::span<const Ranking> rankings, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << std::setprecision(17);
  for (const Ranking& r : rankings) {
    for (std::size_t i = 0; i < r.entries.size(); ++i) {
      out << r.query_id << '\t' << (i + 1) << '\t' << r.entries[i].doc_id << '\t'
          << r.entries[i].log_prob << "\n";
    }
  }
}

}  // namespace bmidx
