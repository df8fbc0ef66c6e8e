#include "bmidx/matrix.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bmidx/error.hpp"
#include "json.hpp"

namespace bmidx {

namespace {

std::uint32_t float_to_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof(u));
  return u;
}

float bits_to_float(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, sizeof(f));
  return f;
}

}  // namespace

std::filesystem::path meta_path_for(const std::filesystem::path& f32_path) {
  std::filesystem::path p = f32_path;
  p.replace_extension();
  p += ".meta.json";
  return p;
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& f32_path) {
  const auto meta_path = meta_path_for(f32_path);
  std::ifstream meta_in(meta_path);
  if (!meta_in) {
    throw FormatError("missing metadata sidecar: " + meta_path.string());
  }
  nlohmann::json meta;
  try {
    meta_in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("unparsable metadata sidecar " + meta_path.string() + ": " + e.what());
  }
  if (!meta.contains("rows") || !meta.contains("dim")) {
    throw FormatError("metadata sidecar lacks rows/dim: " + meta_path.string());
  }
  const auto rows = meta.at("rows").get<std::int64_t>();
  const auto dim = meta.at("dim").get<std::int64_t>();
  if (rows < 0 || dim <= 0) {
    throw FormatError("metadata sidecar has invalid shape: " + meta_path.string());
  }

  std::ifstream in(f32_path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot open embedding file: " + f32_path.string());
  }
  in.seekg(0, std::ios::end);
  const auto file_size = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::beg);

  const std::uint64_t expected = static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(dim) * 4u;
  if (file_size != expected) {
    std::ostringstream msg;
    msg << f32_path.string() << ": file holds " << file_size << " bytes but sidecar declares "
        << rows << "x" << dim << " (" << expected << " bytes)";
    throw FormatError(msg.str());
  }

  EmbeddingMatrix m;
  m.rows = static_cast<std::size_t>(rows);
  m.dim = static_cast<std::size_t>(dim);
  m.data.resize(m.rows * m.dim);

  std::vector<unsigned char> buf(expected);
  if (expected > 0) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(expected));
    if (!in) {
      throw FormatError("short read on " + f32_path.string());
    }
  }
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    const std::size_t o = i * 4;
    const std::uint32_t u = static_cast<std::uint32_t>(buf[o]) |
                            (static_cast<std::uint32_t>(buf[o + 1]) << 8) |
                            (static_cast<std::uint32_t>(buf[o + 2]) << 16) |
                            (static_cast<std::uint32_t>(buf[o + 3]) << 24);
    const double v = static_cast<double>(bits_to_float(u));
    if (!std::isfinite(v)) {
      std::ostringstream msg;
      msg << f32_path.string() << ": non-finite value at flat index " << i;
      throw ValidationError(msg.str());
    }
    m.data[i] = v;
  }
  return m;
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& f32_path) {
  if (m.data.size() != m.rows * m.dim) {
    throw ArgumentError("matrix data size does not match rows x dim");
  }
  std::ofstream out(f32_path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError("cannot open for writing: " + f32_path.string());
  }
  std::vector<unsigned char> buf(m.data.size() * 4);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    const std::uint32_t u = float_to_bits(static_cast<float>(m.data[i]));
    const std::size_t o = i * 4;
    buf[o] = static_cast<unsigned char>(u & 0xff);
    buf[o + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
    buf[o + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
    buf[o + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
  }
  if (!buf.empty()) {
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  out.close();

  nlohmann::json meta;
  meta["rows"] = m.rows;
  meta["dim"] = m.dim;
  std::ofstream meta_out(meta_path_for(f32_path), std::ios::trunc);
  if (!meta_out) {
    throw FormatError("cannot open for writing: " + meta_path_for(f32_path).string());
  }
  meta_out << meta.dump() << "\n";
}

void snap_to_f32(EmbeddingMatrix& m) {
  for (double& v : m.data) {
    v = static_cast<double>(static_cast<float>(v));
  }
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace bmidx
