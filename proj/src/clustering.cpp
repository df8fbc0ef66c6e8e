#include "bmidx/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "bmidx/error.hpp"
#include "bmidx/rng.hpp"
#include "json.hpp"

namespace bmidx {

namespace {

// One Lloyd run from a distance-squared weighted farthest-point seeding.
struct LloydRun {
  std::vector<int> labels;
  std::vector<double> centroids;  // k x dim
  std::vector<std::size_t> sizes;
  double objective = 0.0;
  std::vector<double> history;
};

double point_centroid_dist2(const EmbeddingMatrix& points, std::size_t point,
                            const std::vector<double>& centroids, std::size_t c,
                            std::size_t dim) {
  const double* p = points.data.data() + point * dim;
  const double* q = centroids.data() + c * dim;
  double s = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const double d = p[j] - q[j];
    s += d * d;
  }
  return s;
}

std::vector<double> seed_centroids(const EmbeddingMatrix& points,
                                   std::span<const std::size_t> subset, std::size_t k,
                                   std::mt19937_64& rng) {
  const std::size_t dim = points.dim;
  const std::size_t n = subset.size();
  std::vector<double> centroids(k * dim);
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());

  // First centroid uniform; the rest sampled with probability proportional
  // to the squared distance to the nearest centroid picked so far.
  std::size_t first = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
  if (first >= n) first = n - 1;
  std::copy_n(points.data.data() + subset[first] * dim, dim, centroids.begin());

  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = point_centroid_dist2(points, subset[i], centroids, c - 1, dim);
      if (d < dist2[i]) dist2[i] = d;
      total += dist2[i];
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      // All points coincide with a centroid already; any choice works.
      pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
      if (pick >= n) pick = n - 1;
    }
    std::copy_n(points.data.data() + subset[pick] * dim, dim, centroids.begin() + c * dim);
  }
  return centroids;
}

void assign_labels(const EmbeddingMatrix& points, std::span<const std::size_t> subset,
                   std::size_t k, LloydRun& run) {
  const std::size_t dim = points.dim;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    int best = 0;
    double best_d = point_centroid_dist2(points, subset[i], run.centroids, 0, dim);
    for (std::size_t c = 1; c < k; ++c) {
      const double d = point_centroid_dist2(points, subset[i], run.centroids, c, dim);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    run.labels[i] = best;
  }
}

void recompute_centroids(const EmbeddingMatrix& points, std::span<const std::size_t> subset,
                         std::size_t k, LloydRun& run) {
  const std::size_t dim = points.dim;
  std::fill(run.centroids.begin(), run.centroids.end(), 0.0);
  std::fill(run.sizes.begin(), run.sizes.end(), 0);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const std::size_t c = static_cast<std::size_t>(run.labels[i]);
    const double* p = points.data.data() + subset[i] * dim;
    double* q = run.centroids.data() + c * dim;
    for (std::size_t j = 0; j < dim; ++j) q[j] += p[j];
    ++run.sizes[c];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (run.sizes[c] == 0) continue;
    double* q = run.centroids.data() + c * dim;
    const double inv = 1.0 / static_cast<double>(run.sizes[c]);
    for (std::size_t j = 0; j < dim; ++j) q[j] *= inv;
  }
}

// Moves the point farthest from its centroid (among clusters that can spare
// one) into each empty cluster, so that digit assignment is total.
void repair_empty_clusters(const EmbeddingMatrix& points, std::span<const std::size_t> subset,
                           std::size_t k, LloydRun& run) {
  const std::size_t dim = points.dim;
  for (std::size_t c = 0; c < k; ++c) {
    if (run.sizes[c] != 0) continue;
    std::size_t pick = subset.size();
    double worst = -1.0;
    for (std::size_t i = 0; i < subset.size(); ++i) {
      const std::size_t owner = static_cast<std::size_t>(run.labels[i]);
      if (run.sizes[owner] < 2) continue;
      const double d = point_centroid_dist2(points, subset[i], run.centroids, owner, dim);
      if (d > worst) {
        worst = d;
        pick = i;
      }
    }
    if (pick == subset.size()) {
      throw ArgumentError("cannot repair empty cluster: fewer points than clusters");
    }
    --run.sizes[static_cast<std::size_t>(run.labels[pick])];
    run.labels[pick] = static_cast<int>(c);
    ++run.sizes[c];
  }
}

double compute_objective(const EmbeddingMatrix& points, std::span<const std::size_t> subset,
                         LloydRun& run) {
  const std::size_t dim = points.dim;
  double total = 0.0;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    total += point_centroid_dist2(points, subset[i], run.centroids,
                                  static_cast<std::size_t>(run.labels[i]), dim);
  }
  return total;
}

// Single-point moves a la Hartigan: relocating x from cluster A (size a) to
// B (size b) changes the objective by b/(b+1) d(x,cB)^2 - a/(a-1) d(x,cA)^2.
// Applied after Lloyd converges, it escapes many of Lloyd's local minima.
void refine_single_moves(const EmbeddingMatrix& points, std::span<const std::size_t> subset,
                         std::size_t k, LloydRun& run) {
  const std::size_t dim = points.dim;
  for (std::size_t sweep = 0; sweep < 100; ++sweep) {
    bool moved = false;
    for (std::size_t i = 0; i < subset.size(); ++i) {
      const std::size_t a = static_cast<std::size_t>(run.labels[i]);
      const double size_a = static_cast<double>(run.sizes[a]);
      if (run.sizes[a] < 2) continue;  // the source must stay non-empty
      const double d_own = point_centroid_dist2(points, subset[i], run.centroids, a, dim);
      const double loss = size_a / (size_a - 1.0) * d_own;
      std::size_t target = k;
      double best_gain = -1e-12;  // strict improvement only
      for (std::size_t b = 0; b < k; ++b) {
        if (b == a) continue;
        const double size_b = static_cast<double>(run.sizes[b]);
        const double d_other = point_centroid_dist2(points, subset[i], run.centroids, b, dim);
        const double delta = size_b / (size_b + 1.0) * d_other - loss;
        if (delta < best_gain) {
          best_gain = delta;
          target = b;
        }
      }
      if (target == k) continue;
      const double* x = points.data.data() + subset[i] * dim;
      double* ca = run.centroids.data() + a * dim;
      double* cb = run.centroids.data() + target * dim;
      const double size_b = static_cast<double>(run.sizes[target]);
      for (std::size_t j = 0; j < dim; ++j) {
        ca[j] = (size_a * ca[j] - x[j]) / (size_a - 1.0);
        cb[j] = (size_b * cb[j] + x[j]) / (size_b + 1.0);
      }
      --run.sizes[a];
      ++run.sizes[target];
      run.labels[i] = static_cast<int>(target);
      moved = true;
    }
    if (!moved) break;
  }
  // Incremental centroid updates drift; restore exact member means.
  recompute_centroids(points, subset, k, run);
  run.objective = compute_objective(points, subset, run);
}

LloydRun lloyd_once(const EmbeddingMatrix& points, std::span<const std::size_t> subset,
                    std::size_t k, std::uint64_t seed, const KmeansParams& params) {
  std::mt19937_64 rng(seed);
  LloydRun run;
  run.labels.assign(subset.size(), 0);
  run.sizes.assign(k, 0);
  run.centroids = seed_centroids(points, subset, k, rng);

  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
    assign_labels(points, subset, k, run);
    recompute_centroids(points, subset, k, run);
    const bool had_empty =
        std::any_of(run.sizes.begin(), run.sizes.end(), [](std::size_t s) { return s == 0; });
    if (had_empty) {
      repair_empty_clusters(points, subset, k, run);
      recompute_centroids(points, subset, k, run);
    }
    run.objective = compute_objective(points, subset, run);
    run.history.push_back(run.objective);
    if (run.objective == 0.0) break;
    if (prev < std::numeric_limits<double>::infinity() &&
        (prev - run.objective) < params.rel_tol * prev) {
      break;
    }
    prev = run.objective;
  }
  if (run.objective > 0.0) {
    const double before = run.objective;
    refine_single_moves(points, subset, k, run);
    if (run.objective < before) {
      // Moves may re-open Lloyd improvements; one more round of each.
      assign_labels(points, subset, k, run);
      recompute_centroids(points, subset, k, run);
      const bool had_empty = std::any_of(run.sizes.begin(), run.sizes.end(),
                                         [](std::size_t s) { return s == 0; });
      if (had_empty) {
        repair_empty_clusters(points, subset, k, run);
        recompute_centroids(points, subset, k, run);
      }
      refine_single_moves(points, subset, k, run);
      run.history.push_back(run.objective);
    }
  }
  return run;
}

}  // namespace

KmeansResult kmeans(const EmbeddingMatrix& points, std::span<const std::size_t> subset,
                    std::size_t k, std::uint64_t seed, const KmeansParams& params) {
  if (k == 0) throw ArgumentError("kmeans: k must be positive");
  if (k > subset.size()) {
    std::ostringstream msg;
    msg << "kmeans: k=" << k << " exceeds point count " << subset.size();
    throw ArgumentError(msg.str());
  }

  LloydRun best;
  bool have_best = false;
  const std::size_t restarts = std::max<std::size_t>(1, params.restarts);
  for (std::size_t r = 0; r < restarts; ++r) {
    LloydRun run = lloyd_once(points, subset, k, derive_seed(seed, r), params);
    if (!have_best || run.objective < best.objective) {
      best = std::move(run);
      have_best = true;
    }
    if (best.objective == 0.0) break;
  }

  KmeansResult result;
  result.labels = std::move(best.labels);
  result.centroids.rows = k;
  result.centroids.dim = points.dim;
  result.centroids.data = std::move(best.centroids);
  result.objective = best.objective;
  result.objective_history = std::move(best.history);
  return result;
}

KmeansResult kmeans(const EmbeddingMatrix& points, std::size_t k, std::uint64_t seed,
                    const KmeansParams& params) {
  std::vector<std::size_t> all(points.rows);
  std::iota(all.begin(), all.end(), 0);
  return kmeans(points, all, k, seed, params);
}

std::size_t max_id_length(std::size_t count, std::size_t alphabet_size) {
  if (alphabet_size < 2) throw ArgumentError("alphabet size must be at least 2");
  std::size_t m = 1;
  unsigned __int128 cap = alphabet_size;
  while (cap < count) {
    cap *= alphabet_size;
    ++m;
  }
  return m;
}

namespace {

bool all_points_identical(const EmbeddingMatrix& points, std::span<const std::size_t> subset) {
  const std::size_t dim = points.dim;
  const double* first = points.data.data() + subset[0] * dim;
  for (std::size_t i = 1; i < subset.size(); ++i) {
    const double* p = points.data.data() + subset[i] * dim;
    for (std::size_t j = 0; j < dim; ++j) {
      if (p[j] != first[j]) return false;
    }
  }
  return true;
}

std::vector<double> mean_of(const EmbeddingMatrix& points, std::span<const std::size_t> subset) {
  std::vector<double> mean(points.dim, 0.0);
  for (std::size_t i : subset) {
    const double* p = points.data.data() + i * points.dim;
    for (std::size_t j = 0; j < points.dim; ++j) mean[j] += p[j];
  }
  const double inv = 1.0 / static_cast<double>(subset.size());
  for (double& v : mean) v *= inv;
  return mean;
}

// cap-respecting member lists per cluster; overfull clusters hand their
// farthest members to the nearest cluster with room.
std::vector<std::vector<std::size_t>> capped_groups(const EmbeddingMatrix& points,
                                                    std::span<const std::size_t> subset,
                                                    const KmeansResult& km, std::size_t k,
                                                    std::size_t cap) {
  const std::size_t dim = points.dim;
  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    groups[static_cast<std::size_t>(km.labels[i])].push_back(subset[i]);
  }

  for (std::size_t c = 0; c < k; ++c) {
    if (groups[c].size() <= cap) continue;
    // Drop the farthest members first; they are the least attached.
    std::sort(groups[c].begin(), groups[c].end(), [&](std::size_t a, std::size_t b) {
      const double da = point_centroid_dist2(points, a, km.centroids.data, c, dim);
      const double db = point_centroid_dist2(points, b, km.centroids.data, c, dim);
      if (da != db) return da < db;
      return a < b;
    });
    while (groups[c].size() > cap) {
      const std::size_t moved = groups[c].back();
      groups[c].pop_back();
      std::size_t target = k;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t o = 0; o < k; ++o) {
        if (o == c || groups[o].size() >= cap) continue;
        const double d = point_centroid_dist2(points, moved, km.centroids.data, o, dim);
        if (d < best_d) {
          best_d = d;
          target = o;
        }
      }
      if (target == k) throw Error("capacity rebalance failed: no cluster with room");
      groups[target].push_back(moved);
    }
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  return groups;
}

std::vector<std::vector<std::size_t>> round_robin_groups(std::span<const std::size_t> subset,
                                                         std::size_t k) {
  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    groups[i % k].push_back(subset[i]);
  }
  groups.erase(std::remove_if(groups.begin(), groups.end(),
                              [](const auto& g) { return g.empty(); }),
               groups.end());
  return groups;
}

std::unique_ptr<ClusterNode> build_node(const EmbeddingMatrix& points,
                                        std::vector<std::size_t> members,
                                        std::size_t alphabet_size, std::uint64_t seed,
                                        std::size_t depth_budget) {
  auto node = std::make_unique<ClusterNode>();
  node->centroid = mean_of(points, members);
  node->members = std::move(members);
  if (node->members.size() <= alphabet_size) {
    return node;
  }

  // cap keeps every child small enough to finish within the remaining
  // depth budget: child count <= |V|^(budget-1).
  unsigned __int128 cap128 = 1;
  for (std::size_t i = 1; i < depth_budget; ++i) cap128 *= alphabet_size;
  const std::size_t cap = cap128 > node->members.size()
                              ? node->members.size()
                              : static_cast<std::size_t>(cap128);

  std::vector<std::vector<std::size_t>> groups;
  if (all_points_identical(points, node->members)) {
    groups = round_robin_groups(node->members, alphabet_size);
  } else {
    const KmeansResult km = kmeans(points, node->members, alphabet_size, seed);
    groups = capped_groups(points, node->members, km, alphabet_size, cap);
    groups.erase(std::remove_if(groups.begin(), groups.end(),
                                [](const auto& g) { return g.empty(); }),
                 groups.end());
    if (groups.size() < 2) {
      groups = round_robin_groups(node->members, alphabet_size);
    }
  }

  struct Child {
    std::vector<std::size_t> members;
    std::vector<double> centroid;
  };
  std::vector<Child> children;
  children.reserve(groups.size());
  for (auto& g : groups) {
    Child c;
    c.centroid = mean_of(points, g);
    c.members = std::move(g);
    children.push_back(std::move(c));
  }
  std::sort(children.begin(), children.end(), [](const Child& a, const Child& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    return a.centroid < b.centroid;
  });

  for (std::size_t digit = 0; digit < children.size(); ++digit) {
    auto child = build_node(points, std::move(children[digit].members), alphabet_size,
                            derive_seed(seed, digit + 1), depth_budget - 1);
    child->branch_digit = static_cast<int>(digit);
    node->children.push_back(std::move(child));
  }
  return node;
}

void tree_json(const ClusterNode& node, nlohmann::json& out) {
  out["digit"] = node.branch_digit;
  out["centroid"] = node.centroid;
  if (node.is_leaf()) {
    out["members"] = node.members;
  } else {
    out["size"] = node.members.size();
    out["children"] = nlohmann::json::array();
    for (const auto& child : node.children) {
      nlohmann::json c;
      tree_json(*child, c);
      out["children"].push_back(std::move(c));
    }
  }
}

}  // namespace

std::unique_ptr<ClusterNode> hierarchical_cluster(const EmbeddingMatrix& points,
                                                  std::span<const std::size_t> subset,
                                                  std::size_t alphabet_size,
                                                  std::uint64_t seed) {
  if (alphabet_size < 2) throw ArgumentError("alphabet size must be at least 2");
  if (subset.empty()) throw ArgumentError("hierarchical_cluster: no points");
  const std::size_t budget = max_id_length(subset.size(), alphabet_size);
  std::vector<std::size_t> members(subset.begin(), subset.end());
  return build_node(points, std::move(members), alphabet_size, derive_seed(seed, 0), budget);
}

std::unique_ptr<ClusterNode> hierarchical_cluster(const EmbeddingMatrix& points,
                                                  std::size_t alphabet_size,
                                                  std::uint64_t seed) {
  std::vector<std::size_t> all(points.rows);
  std::iota(all.begin(), all.end(), 0);
  return hierarchical_cluster(points, all, alphabet_size, seed);
}

std::size_t tree_depth(const ClusterNode& node) {
  std::size_t deepest = 0;
  for (const auto& child : node.children) {
    deepest = std::max(deepest, 1 + tree_depth(*child));
  }
  return deepest;
}

std::string cluster_tree_json(const ClusterNode& root) {
  nlohmann::json j;
  tree_json(root, j);
  return j.dump();
}

}  // namespace bmidx
