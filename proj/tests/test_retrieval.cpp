#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "bmidx/error.hpp"
#include "bmidx/retrieval.hpp"
#include "bmidx/rng.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bmidx;
using bmidx::testing::matrix_from;

namespace {

IndexAssignment assignment_from(std::vector<std::pair<std::string, IdString>> entries,
                                std::size_t alphabet) {
  IndexAssignment a;
  a.alphabet.size = alphabet;
  for (auto& [doc, id] : entries) {
    a.doc_ids.push_back(doc);
    a.ids.push_back(id);
    a.max_len = std::max(a.max_len, id.size());
  }
  a.rebuild_lookup();
  validate_assignment(a);
  return a;
}

// Four docs at the corners of a wide rectangle, grouped pairwise.
struct FourDocTrie {
  IndexAssignment assignment;
  EmbeddingMatrix reps;
  PrefixTrie trie;

  FourDocTrie()
      : assignment(assignment_from(
            {{"a", {0, 0}}, {"b", {0, 1}}, {"c", {1, 0}}, {"d", {1, 1}}}, 2)),
        reps(matrix_from(4, 2, {-10.0, 1.0, -10.0, -1.0, 10.0, 1.0, 10.0, -1.0})),
        trie(build_trie(assignment, reps)) {}
};

std::size_t count_leaves(const TrieNode& node) {
  if (node.is_leaf()) return 1;
  std::size_t n = 0;
  for (const auto& c : node.children) n += count_leaves(*c);
  return n;
}

EmbeddingMatrix random_reps(std::size_t n, std::size_t dim, std::uint64_t seed) {
  EmbeddingMatrix m = EmbeddingMatrix::zeros(n, dim);
  std::mt19937_64 rng(seed);
  for (double& v : m.data) v = 2.0 * std_normal(rng);
  return m;
}

// Random prefix-free assignment: unique 2-digit head plus a distinct tail.
IndexAssignment random_assignment(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::string, IdString>> entries;
  for (std::size_t i = 0; i < n; ++i) {
    entries.push_back({"doc" + std::to_string(i),
                       {static_cast<int>(rng() % 4), static_cast<int>(rng() % 4),
                        static_cast<int>(i)}});
  }
  return assignment_from(std::move(entries), std::max<std::size_t>(4, n));
}

}  // namespace

TEST_SUITE_BEGIN("retrieval");

TEST_CASE("four docs of depth two build a seven-node trie") {
  const FourDocTrie f;
  CHECK(f.trie.n_nodes == 7);  // root, 2 internal, 4 leaves
  CHECK(count_leaves(*f.trie.root) == 4);
  REQUIRE(f.trie.root->children.size() == 2);
  for (const auto& child : f.trie.root->children) {
    CHECK(child->members.size() == 2);
  }
}

TEST_CASE("root centroid is the global mean of the representatives") {
  const FourDocTrie f;
  CHECK(f.trie.root->centroid[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f.trie.root->centroid[1] == doctest::Approx(0.0).epsilon(1e-12));
  // Left group: mean of the two x = -10 docs.
  CHECK(f.trie.root->children[0]->centroid[0] == doctest::Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("rebuilding from a permuted document list gives the same trie") {
  const FourDocTrie f;
  const IndexAssignment permuted = assignment_from(
      {{"d", {1, 1}}, {"b", {0, 1}}, {"a", {0, 0}}, {"c", {1, 0}}}, 2);
  const EmbeddingMatrix reps_permuted =
      matrix_from(4, 2, {10.0, -1.0, -10.0, -1.0, -10.0, 1.0, 10.0, 1.0});
  const PrefixTrie other = build_trie(permuted, reps_permuted);
  CHECK(other.n_nodes == f.trie.n_nodes);

  // Same centroids at every prefix path.
  const std::vector<IdString> paths{{0}, {1}, {0, 0}, {1, 1}};
  for (const IdString& path : paths) {
    const TrieNode* x = f.trie.root.get();
    const TrieNode* y = other.root.get();
    for (int d : path) {
      x = x->child(d);
      y = y->child(d);
      REQUIRE(x != nullptr);
      REQUIRE(y != nullptr);
    }
    CHECK(x->centroid == y->centroid);
  }
}

TEST_CASE("missing representatives are an argument error") {
  const FourDocTrie f;
  CHECK_THROWS_AS(build_trie(f.assignment, EmbeddingMatrix::zeros(3, 2)), ArgumentError);
}

TEST_CASE("a single child level contributes a factor of exactly one") {
  const auto a = assignment_from({{"a", {0, 0}}, {"b", {0, 1}}}, 2);
  const EmbeddingMatrix reps = matrix_from(2, 1, {-1.0, 1.0});
  const PrefixTrie trie = build_trie(a, reps);
  const std::vector<double> q{0.3};
  // Depth-1 node 0 is the unique child of the root.
  CHECK(prefix_prob(trie, q, IdString{0}, 1.0) == 1.0);
}

TEST_CASE("query at one of two symmetric centroids scores the known softmax factor") {
  const auto a = assignment_from({{"a", {0}}, {"b", {1}}}, 2);
  const EmbeddingMatrix reps = matrix_from(2, 1, {0.0, 2.0});
  const PrefixTrie trie = build_trie(a, reps);
  const std::vector<double> q{0.0};  // exactly at centroid of digit 0
  const double p = prefix_prob(trie, q, IdString{0}, 1.0);
  CHECK(p == doctest::Approx(1.0 / (1.0 + std::exp(-4.0))).epsilon(1e-9));
  CHECK(p == doctest::Approx(0.98201).epsilon(1e-4));
}

TEST_CASE("depth-1 prefix probabilities sum to one") {
  const IndexAssignment a = random_assignment(30, 5);
  const PrefixTrie trie = build_trie(a, random_reps(30, 3, 6));
  const EmbeddingMatrix queries = random_reps(5, 3, 7);
  for (std::size_t qi = 0; qi < queries.rows; ++qi) {
    double total = 0.0;
    for (const auto& child : trie.root->children) {
      total += prefix_prob(trie, queries.row(qi), IdString{child->digit}, 0.7);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("prefix probability satisfies the chain rule") {
  const IndexAssignment a = random_assignment(40, 9);
  const PrefixTrie trie = build_trie(a, random_reps(40, 2, 10));
  const std::vector<double> q{0.4, -1.1};
  // p(node) equals the sum over its children, at every internal node.
  std::vector<std::pair<const TrieNode*, IdString>> stack{{trie.root.get(), {}}};
  while (!stack.empty()) {
    auto [node, path] = stack.back();
    stack.pop_back();
    if (node->is_leaf()) continue;
    const double p_node = path.empty() ? 1.0 : prefix_prob(trie, q, path, 1.0);
    double sum = 0.0;
    for (const auto& child : node->children) {
      IdString child_path = path;
      child_path.push_back(child->digit);
      sum += prefix_prob(trie, q, child_path, 1.0);
      stack.push_back({child.get(), std::move(child_path)});
    }
    CHECK(sum == doctest::Approx(p_node).epsilon(1e-9));
  }
}

TEST_CASE("unknown prefixes are lookup errors") {
  const FourDocTrie f;
  const std::vector<double> q{0.0, 0.0};
  CHECK_THROWS_AS(prefix_prob(f.trie, q, IdString{3}, 1.0), LookupError);
  CHECK_THROWS_AS(prefix_prob(f.trie, q, IdString{0, 0, 1}, 1.0), LookupError);
}

TEST_CASE("beam equal to the leaf count reproduces the exhaustive ranking") {
  const IndexAssignment a = random_assignment(50, 13);
  const PrefixTrie trie = build_trie(a, random_reps(50, 4, 14));
  const EmbeddingMatrix queries = random_reps(50, 4, 15);

  RetrieverConfig config;
  config.tau = 1.0;
  config.beam_width = 50;
  config.top_k = 100;
  for (std::size_t qi = 0; qi < queries.rows; ++qi) {
    const Ranking beam = beam_rank(trie, queries.row(qi), config);
    const Ranking exact = exhaustive_rank(trie, queries.row(qi), 1.0, "", 100);
    REQUIRE(beam.entries.size() == exact.entries.size());
    for (std::size_t i = 0; i < beam.entries.size(); ++i) {
      CHECK(beam.entries[i].doc_id == exact.entries[i].doc_id);
      CHECK(std::abs(beam.entries[i].log_prob - exact.entries[i].log_prob) <= 1e-12);
    }
  }
}

TEST_CASE("query at a leaf centroid of a well-separated corpus ranks that doc first") {
  const FourDocTrie f;
  RetrieverConfig config;
  const Ranking r = beam_rank(f.trie, f.reps.row(2), config);  // doc "c"
  REQUIRE(!r.entries.empty());
  CHECK(r.entries[0].doc_id == "c");
}

TEST_CASE("beam ranking is deterministic") {
  const IndexAssignment a = random_assignment(30, 21);
  const PrefixTrie trie = build_trie(a, random_reps(30, 3, 22));
  const EmbeddingMatrix queries = random_reps(1, 3, 23);
  RetrieverConfig config;
  config.beam_width = 5;
  const Ranking r1 = beam_rank(trie, queries.row(0), config);
  const Ranking r2 = beam_rank(trie, queries.row(0), config);
  REQUIRE(r1.entries.size() == r2.entries.size());
  for (std::size_t i = 0; i < r1.entries.size(); ++i) {
    CHECK(r1.entries[i].doc_id == r2.entries[i].doc_id);
    CHECK(r1.entries[i].log_prob == r2.entries[i].log_prob);
  }
}

TEST_CASE("wider beams never lose top-1 joint probability") {
  const IndexAssignment a = random_assignment(60, 31);
  const PrefixTrie trie = build_trie(a, random_reps(60, 3, 32));
  const EmbeddingMatrix queries = random_reps(20, 3, 33);
  for (std::size_t qi = 0; qi < queries.rows; ++qi) {
    double previous = -std::numeric_limits<double>::infinity();
    for (std::size_t width : {1, 2, 5, 20, 60}) {
      RetrieverConfig config;
      config.beam_width = width;
      const Ranking r = beam_rank(trie, queries.row(qi), config);
      REQUIRE(!r.entries.empty());
      CHECK(r.entries[0].log_prob >= previous - 1e-12);
      previous = r.entries[0].log_prob;
    }
  }
}

TEST_CASE("single document retrieves itself with probability one") {
  const auto a = assignment_from({{"only", {0}}}, 2);
  const PrefixTrie trie = build_trie(a, matrix_from(1, 1, {3.0}));
  const std::vector<double> q{-100.0};
  const Ranking r = exhaustive_rank(trie, q, 1.0);
  REQUIRE(r.entries.size() == 1);
  CHECK(r.entries[0].doc_id == "only");
  CHECK(r.entries[0].log_prob == 0.0);
}

TEST_CASE("joint probabilities over all documents sum to one") {
  const IndexAssignment a = random_assignment(35, 41);
  const PrefixTrie trie = build_trie(a, random_reps(35, 2, 42));
  const EmbeddingMatrix queries = random_reps(4, 2, 43);
  for (std::size_t qi = 0; qi < queries.rows; ++qi) {
    const Ranking r = exhaustive_rank(trie, queries.row(qi), 1.3);
    double total = 0.0;
    for (const RankedDoc& e : r.entries) total += std::exp(e.log_prob);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("rankings serialize as query, rank, doc, log-prob rows") {
  bmidx::testing::TempDir tmp;
  std::vector<Ranking> rankings{{"q1", {{"a", -0.1}, {"b", -2.0}}}};
  const auto path = tmp / "rankings.tsv";
  save_rankings_tsv(rankings, path);
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line.rfind("q1\t1\ta\t", 0) == 0);
  REQUIRE(std::getline(in, line));
  CHECK(line.rfind("q1\t2\tb\t", 0) == 0);
}

TEST_SUITE_END();
