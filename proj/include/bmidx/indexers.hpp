#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bmidx/corpus.hpp"
#include "bmidx/matrix.hpp"

namespace bmidx {

struct Alphabet {
  std::size_t size = 30;  // 30 for random/k-means digits, 32 for LSH symbols
};

using IdString = std::vector<int>;  // digits in [0, |V|)

std::string format_id(const IdString& id);          // "3-0-12"
IdString parse_id(std::string_view text, std::size_t alphabet_size);

enum class IndexMethod { HRI, HKmI, LSHI, BMI };

std::string_view method_name(IndexMethod m);  // random | hkmeans | lsh | bmi
IndexMethod parse_method(std::string_view name);

// Injective, prefix-free map from document id to digit string.
struct IndexAssignment {
  IndexMethod method = IndexMethod::HRI;
  Alphabet alphabet;
  std::uint64_t seed = 0;
  std::size_t max_len = 0;
  std::vector<std::string> doc_ids;  // corpus order
  std::vector<IdString> ids;         // parallel to doc_ids
  std::vector<std::string> fallback_docs;  // BMI docs that fell back to mu_d

  std::size_t size() const { return doc_ids.size(); }
  std::size_t slot(std::string_view doc_id) const;  // LookupError if absent
  const IdString& id_of(std::string_view doc_id) const;

  void rebuild_lookup();

 private:
  std::unordered_map<std::string, std::size_t> slot_;
};

// Checks injectivity, prefix-freeness and the digit range; throws
// ValidationError otherwise.
void validate_assignment(const IndexAssignment& a);

// Digits drawn uniformly (or by `prior` weights) level by level; groups of
// size <= |V| close with distinct final digits.
IndexAssignment index_random(const Corpus& corpus, Alphabet alphabet, std::uint64_t seed,
                             std::span<const double> prior = {});

// Digits follow the recursive k-means hierarchy over document embeddings;
// within a leaf, final digits are ordered by distance to the leaf centroid,
// ties by doc_id.
IndexAssignment index_hkm(const Corpus& corpus, Alphabet alphabet, std::uint64_t seed);

// Random-hyperplane signatures: bit_j = 1 iff a_j . x + b_j > 0.
struct LshHyperplanes {
  std::size_t n_bits = 0;
  std::size_t dim = 0;
  std::vector<double> directions;  // n_bits x dim, row-major
  std::vector<double> offsets;     // n_bits
};

// Directions are standard normal; offsets uniform over [-s_j, s_j] where
// s_j is the standard deviation of the data's projections onto a_j.
LshHyperplanes make_lsh_hyperplanes(const EmbeddingMatrix& points, std::size_t n_bits,
                                    std::uint64_t seed);
std::vector<std::uint8_t> lsh_bits(std::span<const double> vec, const LshHyperplanes& planes);
// Consecutive 5-bit groups, first bit most significant, each in [0, 32).
std::vector<int> lsh_symbols(std::span<const std::uint8_t> bits);
// Default bit count: 5 * ceil(log32 |D|), so the symbol string matches the
// k-means depth scale.
std::size_t default_lsh_bits(std::size_t n_docs);

// Symbol string from the 5-bit groups; documents sharing the full symbol
// string get hierarchical-k-means digits appended until injective.
// n_bits = 0 picks the default; otherwise it must be a multiple of 5.
IndexAssignment index_lsh(const Corpus& corpus, Alphabet alphabet32, std::size_t n_bits,
                          std::uint64_t seed);

// Arithmetic mean of the document's train-split query embeddings restricted
// to `sources`; the maximum-likelihood estimate of the query mean under the
// Gaussian assumption. MissingDataError when no query qualifies.
std::vector<double> query_mean(const Corpus& corpus, std::string_view doc_id,
                               const SourceSet& sources);

// Per-document representative vectors, one row per corpus document.
struct RepSet {
  EmbeddingMatrix reps;
  std::vector<std::string> fallback_docs;  // docs that used mu_d instead
};

// Query means for every document; documents without covering queries fall
// back to their own embedding and are reported in fallback_docs.
RepSet query_mean_reps(const Corpus& corpus, const SourceSet& sources);

// index_hkm pipeline applied to the query-mean vectors.
IndexAssignment index_bmi(const Corpus& corpus, Alphabet alphabet, const SourceSet& sources,
                          std::uint64_t seed);

// TSV with header "#method=<name> alphabet=<|V|> seed=<seed>", one
// "doc_id<TAB>d1-d2-...-dk" line per document.
void save_assignment(const IndexAssignment& a, const std::filesystem::path& path);
IndexAssignment load_assignment(const std::filesystem::path& path);

}  // namespace bmidx
