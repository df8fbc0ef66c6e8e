#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bmidx/matrix.hpp"

namespace bmidx {

struct KmeansParams {
  std::size_t max_iters = 100;
  double rel_tol = 1e-6;  // stop when relative objective improvement drops below
  std::size_t restarts = 8;
};

struct KmeansResult {
  std::vector<int> labels;          // one per input point, in [0, k)
  EmbeddingMatrix centroids;        // k x dim, each the mean of its members
  double objective = 0.0;           // sum of squared distances to own centroid
  std::vector<double> objective_history;  // per-iteration, best restart
};

// Lloyd iterations with distance-squared weighted farthest-point seeding and
// empty-cluster repair, best of `restarts` seeded runs. Deterministic given
// (points order, k, seed).
KmeansResult kmeans(const EmbeddingMatrix& points, std::span<const std::size_t> subset,
                    std::size_t k, std::uint64_t seed, const KmeansParams& params = {});
KmeansResult kmeans(const EmbeddingMatrix& points, std::size_t k, std::uint64_t seed,
                    const KmeansParams& params = {});

// Node of the recursive clustering hierarchy. Every node keeps its member
// point indices; siblings partition the parent's member set. Leaves hold at
// most alphabet_size members and have no children.
struct ClusterNode {
  std::vector<double> centroid;
  int branch_digit = -1;  // digit under the parent; -1 at the root
  std::vector<std::size_t> members;
  std::vector<std::unique_ptr<ClusterNode>> children;

  bool is_leaf() const { return children.empty(); }
};

// Smallest m >= 1 with alphabet_size^m >= count (m = 1 when count <= 1).
std::size_t max_id_length(std::size_t count, std::size_t alphabet_size);

// Recursive k-means with k = alphabet_size on every member set larger than
// alphabet_size. Children are capped at alphabet_size^(budget-1) members so
// the deepest leaf sits exactly at the max_id_length depth; identical-point
// sets fall back to balanced round-robin splits. Children are ordered by
// size descending, ties by lexicographic centroid, and numbered 0..k-1.
std::unique_ptr<ClusterNode> hierarchical_cluster(const EmbeddingMatrix& points,
                                                  std::size_t alphabet_size,
                                                  std::uint64_t seed);
std::unique_ptr<ClusterNode> hierarchical_cluster(const EmbeddingMatrix& points,
                                                  std::span<const std::size_t> subset,
                                                  std::size_t alphabet_size,
                                                  std::uint64_t seed);

// Depth in edges of the deepest leaf below `node`.
std::size_t tree_depth(const ClusterNode& node);

// Nested JSON dump (centroids and member indices) for debugging.
std::string cluster_tree_json(const ClusterNode& root);

}  // namespace bmidx
