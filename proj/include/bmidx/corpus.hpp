#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bmidx/matrix.hpp"

namespace bmidx {

enum class QuerySource { RealQ, GenQ, DocSeg };
enum class Split { Train, Test };

std::string_view source_name(QuerySource s);
QuerySource parse_source(std::string_view s);
std::string_view split_name(Split s);
Split parse_split(std::string_view s);

// Subset of {RealQ, GenQ, DocSeg}.
struct SourceSet {
  bool realq = false;
  bool genq = false;
  bool docseg = false;

  static SourceSet all() { return {true, true, true}; }
  static SourceSet parse(std::string_view csv);  // "genq,realq,docseg"
  bool contains(QuerySource s) const;
  bool empty() const { return !realq && !genq && !docseg; }
  std::string to_string() const;
};

struct Document {
  std::string doc_id;
  std::size_t row = 0;  // row in the document embedding matrix
};

struct Query {
  std::string query_id;
  std::string gold_doc_id;
  QuerySource source = QuerySource::GenQ;
  Split split = Split::Train;
  std::size_t row = 0;  // row in the query embedding matrix
};

// Documents plus queries plus their embedding matrices. Immutable after
// load; safe for unrestricted concurrent reads.
struct Corpus {
  std::vector<Document> documents;
  std::vector<Query> queries;
  EmbeddingMatrix doc_embeddings;
  EmbeddingMatrix query_embeddings;

  std::size_t doc_index(std::string_view doc_id) const;  // LookupError if absent
  bool has_doc(std::string_view doc_id) const;

  // Q_d: for every document, the indices of queries whose gold is that
  // document, filtered by source and (optionally) split. Within each
  // document the indices are ordered by query_id so downstream means do
  // not depend on file order.
  std::vector<std::vector<std::size_t>> queries_by_doc(
      const SourceSet& sources, std::optional<Split> split) const;

  std::vector<std::size_t> query_indices(const SourceSet& sources,
                                         std::optional<Split> split) const;

 private:
  friend Corpus assemble_corpus(std::vector<Document>, std::vector<Query>,
                                EmbeddingMatrix, EmbeddingMatrix);
  std::unordered_map<std::string, std::size_t> doc_slot_;
};

// Validates and finalizes an in-memory corpus: unique doc ids, resolvable
// gold ids, in-range rows, matching dims.
Corpus assemble_corpus(std::vector<Document> documents, std::vector<Query> queries,
                       EmbeddingMatrix doc_embeddings, EmbeddingMatrix query_embeddings);

// documents JSONL: {"doc_id": str} per line; queries JSONL:
// {"query_id", "doc_id", "source", "split"} per line. A "row" field is
// honored when present, otherwise the line index is used.
Corpus load_corpus(const std::filesystem::path& doc_path,
                   const std::filesystem::path& query_path,
                   EmbeddingMatrix doc_embeddings, EmbeddingMatrix query_embeddings);

void save_documents_jsonl(const Corpus& corpus, const std::filesystem::path& path);
void save_queries_jsonl(const Corpus& corpus, const std::filesystem::path& path);

}  // namespace bmidx
