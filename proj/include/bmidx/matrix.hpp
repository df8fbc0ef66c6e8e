#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace bmidx {

// Dense row-major matrix of vectors, one row per document or query.
// Stored on disk as little-endian float32 next to a JSON sidecar with the
// shape; held in memory as double (estimators sum many logs).
struct EmbeddingMatrix {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> data;  // rows * dim, row-major

  static EmbeddingMatrix zeros(std::size_t rows, std::size_t dim) {
    return {rows, dim, std::vector<double>(rows * dim, 0.0)};
  }

  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
  std::span<double> row(std::size_t i) {
    return {data.data() + i * dim, dim};
  }
};

// "<name>.f32" -> "<name>.meta.json"
std::filesystem::path meta_path_for(const std::filesystem::path& f32_path);

// Reads a raw little-endian float32 file plus its {"rows", "dim"} sidecar.
// Throws FormatError on size/metadata mismatch, ValidationError on NaN/Inf.
EmbeddingMatrix load_embeddings(const std::filesystem::path& f32_path);

// Writes the f32 file and its sidecar. Values are truncated to float32.
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& f32_path);

// Snaps every value to its float32 representation, so that an in-memory
// matrix equals its saved-then-loaded copy bit for bit.
void snap_to_f32(EmbeddingMatrix& m);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace bmidx
