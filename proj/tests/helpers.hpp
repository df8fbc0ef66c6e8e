#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "bmidx/corpus.hpp"
#include "bmidx/matrix.hpp"

namespace bmidx::testing {

// Unique scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static int counter = 0;
    const auto ticks =
        std::chrono::steady_clock::now().time_since_epoch().count();
    path = std::filesystem::temp_directory_path() /
           ("bmidx_test_" + std::to_string(ticks) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

inline EmbeddingMatrix matrix_from(std::size_t rows, std::size_t dim,
                                   std::vector<double> values) {
  EmbeddingMatrix m;
  m.rows = rows;
  m.dim = dim;
  m.data = std::move(values);
  return m;
}

// Tiny corpus builder: one embedding row per document at `doc_points`, one
// query row per (doc, query) at `query_points`, queries GenQ/train unless a
// split vector is given.
struct CorpusBuilder {
  std::vector<Document> documents;
  std::vector<Query> queries;
  std::vector<double> doc_values;
  std::vector<double> query_values;
  std::size_t dim = 0;

  CorpusBuilder& doc(const std::string& id, std::vector<double> point) {
    dim = point.size();
    documents.push_back({id, documents.size()});
    doc_values.insert(doc_values.end(), point.begin(), point.end());
    return *this;
  }

  CorpusBuilder& query(const std::string& id, const std::string& gold,
                       std::vector<double> point, QuerySource source = QuerySource::GenQ,
                       Split split = Split::Train) {
    queries.push_back({id, gold, source, split, queries.size()});
    query_values.insert(query_values.end(), point.begin(), point.end());
    return *this;
  }

  Corpus build() {
    EmbeddingMatrix docs = matrix_from(documents.size(), dim, doc_values);
    EmbeddingMatrix qs = matrix_from(queries.size(), dim == 0 ? 1 : dim, query_values);
    if (queries.empty()) qs = EmbeddingMatrix::zeros(0, dim == 0 ? 1 : dim);
    return assemble_corpus(documents, queries, std::move(docs), std::move(qs));
  }
};

}  // namespace bmidx::testing
