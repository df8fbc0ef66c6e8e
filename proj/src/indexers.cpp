#include "bmidx/indexers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "bmidx/clustering.hpp"
#include "bmidx/error.hpp"
#include "bmidx/rng.hpp"

namespace bmidx {

std::string format_id(const IdString& id) {
  std::string out;
  for (std::size_t i = 0; i < id.size(); ++i) {
    if (i > 0) out += '-';
    out += std::to_string(id[i]);
  }
  return out;
}

IdString parse_id(std::string_view text, std::size_t alphabet_size) {
  IdString id;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find('-', pos);
    const std::string_view token =
        text.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    if (token.empty()) throw FormatError("empty digit in ID string: " + std::string(text));
    int value = 0;
    for (char c : token) {
      if (c < '0' || c > '9') throw FormatError("bad digit in ID string: " + std::string(text));
      value = value * 10 + (c - '0');
    }
    if (static_cast<std::size_t>(value) >= alphabet_size) {
      std::ostringstream msg;
      msg << "digit " << value << " outside alphabet of size " << alphabet_size;
      throw FormatError(msg.str());
    }
    id.push_back(value);
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  if (id.empty()) throw FormatError("empty ID string");
  return id;
}

std::string_view method_name(IndexMethod m) {
  switch (m) {
    case IndexMethod::HRI: return "random";
    case IndexMethod::HKmI: return "hkmeans";
    case IndexMethod::LSHI: return "lsh";
    case IndexMethod::BMI: return "bmi";
  }
  return "random";
}

IndexMethod parse_method(std::string_view name) {
  if (name == "random") return IndexMethod::HRI;
  if (name == "hkmeans") return IndexMethod::HKmI;
  if (name == "lsh") return IndexMethod::LSHI;
  if (name == "bmi") return IndexMethod::BMI;
  throw ArgumentError("unknown indexing method: " + std::string(name));
}

std::size_t IndexAssignment::slot(std::string_view doc_id) const {
  auto it = slot_.find(std::string(doc_id));
  if (it == slot_.end()) throw LookupError("no ID assigned to doc: " + std::string(doc_id));
  return it->second;
}

const IdString& IndexAssignment::id_of(std::string_view doc_id) const {
  return ids[slot(doc_id)];
}

void IndexAssignment::rebuild_lookup() {
  slot_.clear();
  slot_.reserve(doc_ids.size());
  for (std::size_t i = 0; i < doc_ids.size(); ++i) {
    if (!slot_.emplace(doc_ids[i], i).second) {
      throw UniquenessError("duplicate doc_id in assignment: " + doc_ids[i]);
    }
  }
}

void validate_assignment(const IndexAssignment& a) {
  if (a.doc_ids.size() != a.ids.size()) {
    throw ValidationError("assignment doc_ids and ids differ in length");
  }
  for (std::size_t i = 0; i < a.ids.size(); ++i) {
    const IdString& id = a.ids[i];
    if (id.empty()) throw ValidationError("empty ID for doc " + a.doc_ids[i]);
    for (int d : id) {
      if (d < 0 || static_cast<std::size_t>(d) >= a.alphabet.size) {
        std::ostringstream msg;
        msg << "digit " << d << " of doc " << a.doc_ids[i] << " outside alphabet "
            << a.alphabet.size;
        throw ValidationError(msg.str());
      }
    }
  }
  // Sorted adjacent comparison covers both injectivity and prefix-freeness.
  std::vector<std::size_t> order(a.ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&a](std::size_t x, std::size_t y) { return a.ids[x] < a.ids[y]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    const IdString& prev = a.ids[order[i - 1]];
    const IdString& cur = a.ids[order[i]];
    if (prev.size() <= cur.size() && std::equal(prev.begin(), prev.end(), cur.begin())) {
      if (prev.size() == cur.size()) {
        throw ValidationError("duplicate ID for docs " + a.doc_ids[order[i - 1]] + " and " +
                              a.doc_ids[order[i]]);
      }
      throw ValidationError("ID of doc " + a.doc_ids[order[i - 1]] + " is a prefix of doc " +
                            a.doc_ids[order[i]]);
    }
  }
}

namespace {

// Canonical document order: positions into corpus.documents sorted by
// doc_id, so results do not depend on file order.
std::vector<std::size_t> docs_sorted_by_id(const Corpus& corpus) {
  std::vector<std::size_t> order(corpus.documents.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&corpus](std::size_t a, std::size_t b) {
    return corpus.documents[a].doc_id < corpus.documents[b].doc_id;
  });
  return order;
}

EmbeddingMatrix gather_rows(const EmbeddingMatrix& source, const std::vector<std::size_t>& rows) {
  EmbeddingMatrix out = EmbeddingMatrix::zeros(rows.size(), source.dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::copy_n(source.data.data() + rows[r] * source.dim, source.dim,
                out.data.data() + r * source.dim);
  }
  return out;
}

void collect_ids(const EmbeddingMatrix& points, const ClusterNode& node, IdString& path,
                 std::vector<IdString>& out) {
  if (node.is_leaf()) {
    // Final digits ordered by distance to the leaf centroid, ties by
    // canonical (doc_id) order.
    std::vector<std::size_t> order(node.members.begin(), node.members.end());
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double da = squared_distance(points.row(a), node.centroid);
      const double db = squared_distance(points.row(b), node.centroid);
      if (da != db) return da < db;
      return a < b;
    });
    for (std::size_t j = 0; j < order.size(); ++j) {
      IdString id = path;
      id.push_back(static_cast<int>(j));
      out[order[j]] = std::move(id);
    }
    return;
  }
  for (const auto& child : node.children) {
    path.push_back(child->branch_digit);
    collect_ids(points, *child, path, out);
    path.pop_back();
  }
}

// One digit string per row of `points`, via the recursive k-means tree.
std::vector<IdString> ids_from_hierarchy(const EmbeddingMatrix& points, std::size_t alphabet_size,
                                         std::uint64_t seed) {
  const auto tree = hierarchical_cluster(points, alphabet_size, seed);
  std::vector<IdString> out(points.rows);
  IdString path;
  collect_ids(points, *tree, path, out);
  return out;
}

IndexAssignment make_assignment(const Corpus& corpus, IndexMethod method, Alphabet alphabet,
                                std::uint64_t seed, const std::vector<std::size_t>& sorted,
                                const std::vector<IdString>& ids_in_sorted_order,
                                std::vector<std::string> fallback_docs = {}) {
  IndexAssignment a;
  a.method = method;
  a.alphabet = alphabet;
  a.seed = seed;
  a.fallback_docs = std::move(fallback_docs);
  a.doc_ids.resize(corpus.documents.size());
  a.ids.resize(corpus.documents.size());
  for (std::size_t r = 0; r < sorted.size(); ++r) {
    const std::size_t doc = sorted[r];
    a.doc_ids[doc] = corpus.documents[doc].doc_id;
    a.ids[doc] = ids_in_sorted_order[r];
    a.max_len = std::max(a.max_len, a.ids[doc].size());
  }
  a.rebuild_lookup();
  validate_assignment(a);
  return a;
}

std::uint64_t mix_path(std::uint64_t h, int digit) {
  return splitmix64(h ^ (static_cast<std::uint64_t>(digit) + 0x9e3779b97f4a7c15ULL));
}

int draw_digit(std::mt19937_64& rng, std::span<const double> prior, std::size_t alphabet_size) {
  if (prior.empty()) {
    return static_cast<int>(rng() % alphabet_size);
  }
  double total = 0.0;
  for (double w : prior) total += w;
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t v = 0; v < prior.size(); ++v) {
    acc += prior[v];
    if (acc >= target) return static_cast<int>(v);
  }
  return static_cast<int>(prior.size() - 1);
}

}  // namespace

IndexAssignment index_random(const Corpus& corpus, Alphabet alphabet, std::uint64_t seed,
                             std::span<const double> prior) {
  if (alphabet.size < 2) throw ArgumentError("alphabet size must be at least 2");
  if (corpus.documents.empty()) throw ArgumentError("index_random: empty corpus");
  if (!prior.empty()) {
    if (prior.size() != alphabet.size) {
      throw ArgumentError("prior weight vector must match the alphabet size");
    }
    double total = 0.0;
    for (double w : prior) {
      if (w < 0.0) throw ArgumentError("prior weights must be nonnegative");
      total += w;
    }
    if (total <= 0.0) throw ArgumentError("prior weights must not all be zero");
  }

  const auto sorted = docs_sorted_by_id(corpus);
  const std::size_t n = sorted.size();

  // One digit stream per document, keyed by doc_id, so draws do not depend
  // on input order.
  std::vector<std::mt19937_64> doc_rng;
  doc_rng.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    doc_rng.emplace_back(derive_seed(seed, fnv1a64(corpus.documents[sorted[r]].doc_id)));
  }

  std::vector<IdString> ids(n);
  struct Group {
    std::vector<std::size_t> members;  // positions r
    IdString path;
    std::uint64_t path_hash;
  };
  std::vector<Group> stack;
  Group root;
  root.members.resize(n);
  std::iota(root.members.begin(), root.members.end(), 0);
  root.path_hash = derive_seed(seed, "hri-final");
  stack.push_back(std::move(root));

  while (!stack.empty()) {
    Group g = std::move(stack.back());
    stack.pop_back();
    if (g.members.size() <= alphabet.size) {
      // Close the group with distinct digits drawn without replacement.
      std::vector<int> digits(alphabet.size);
      std::iota(digits.begin(), digits.end(), 0);
      std::mt19937_64 rng(g.path_hash);
      for (std::size_t i = digits.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(digits[i - 1], digits[j]);
      }
      for (std::size_t j = 0; j < g.members.size(); ++j) {
        IdString id = g.path;
        id.push_back(digits[j]);
        ids[g.members[j]] = std::move(id);
      }
      continue;
    }
    std::map<int, std::vector<std::size_t>> by_digit;
    for (std::size_t r : g.members) {
      by_digit[draw_digit(doc_rng[r], prior, alphabet.size)].push_back(r);
    }
    for (auto& [digit, members] : by_digit) {
      Group child;
      child.members = std::move(members);
      child.path = g.path;
      child.path.push_back(digit);
      child.path_hash = mix_path(g.path_hash, digit);
      stack.push_back(std::move(child));
    }
  }

  return make_assignment(corpus, IndexMethod::HRI, alphabet, seed, sorted, ids);
}

IndexAssignment index_hkm(const Corpus& corpus, Alphabet alphabet, std::uint64_t seed) {
  if (corpus.documents.empty()) throw ArgumentError("index_hkm: empty corpus");
  const auto sorted = docs_sorted_by_id(corpus);
  std::vector<std::size_t> rows(sorted.size());
  for (std::size_t r = 0; r < sorted.size(); ++r) rows[r] = corpus.documents[sorted[r]].row;
  const EmbeddingMatrix points = gather_rows(corpus.doc_embeddings, rows);
  const auto ids = ids_from_hierarchy(points, alphabet.size, derive_seed(seed, "tree"));
  return make_assignment(corpus, IndexMethod::HKmI, alphabet, seed, sorted, ids);
}

LshHyperplanes make_lsh_hyperplanes(const EmbeddingMatrix& points, std::size_t n_bits,
                                    std::uint64_t seed) {
  if (points.rows == 0) throw ArgumentError("LSH hyperplanes need data for offset scales");
  LshHyperplanes planes;
  planes.n_bits = n_bits;
  planes.dim = points.dim;
  planes.directions.resize(n_bits * points.dim);
  planes.offsets.resize(n_bits);

  std::mt19937_64 dir_rng(derive_seed(seed, "lsh-directions"));
  for (double& v : planes.directions) v = std_normal(dir_rng);

  // Offset fractions are drawn before touching the data so the stream stays
  // independent of it; each is then scaled by the per-direction projection
  // standard deviation.
  std::mt19937_64 off_rng(derive_seed(seed, "lsh-offsets"));
  std::vector<double> fractions(n_bits);
  for (double& u : fractions) u = uniform_in(off_rng, -1.0, 1.0);

  for (std::size_t j = 0; j < n_bits; ++j) {
    const double* a = planes.directions.data() + j * points.dim;
    double mean = 0.0;
    std::vector<double> proj(points.rows);
    for (std::size_t i = 0; i < points.rows; ++i) {
      const double* x = points.data.data() + i * points.dim;
      double dot = 0.0;
      for (std::size_t t = 0; t < points.dim; ++t) dot += a[t] * x[t];
      proj[i] = dot;
      mean += dot;
    }
    mean /= static_cast<double>(points.rows);
    double var = 0.0;
    for (double p : proj) var += (p - mean) * (p - mean);
    var /= static_cast<double>(points.rows);
    planes.offsets[j] = fractions[j] * std::sqrt(var);
  }
  return planes;
}

std::vector<std::uint8_t> lsh_bits(std::span<const double> vec, const LshHyperplanes& planes) {
  std::vector<std::uint8_t> bits(planes.n_bits);
  for (std::size_t j = 0; j < planes.n_bits; ++j) {
    const double* a = planes.directions.data() + j * planes.dim;
    double dot = planes.offsets[j];
    for (std::size_t t = 0; t < planes.dim; ++t) dot += a[t] * vec[t];
    bits[j] = dot > 0.0 ? 1 : 0;
  }
  return bits;
}

std::vector<int> lsh_symbols(std::span<const std::uint8_t> bits) {
  if (bits.size() % 5 != 0) throw ArgumentError("bit count must be a multiple of 5");
  std::vector<int> symbols(bits.size() / 5);
  for (std::size_t g = 0; g < symbols.size(); ++g) {
    int value = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      value = (value << 1) | static_cast<int>(bits[g * 5 + i]);
    }
    symbols[g] = value;
  }
  return symbols;
}

std::size_t default_lsh_bits(std::size_t n_docs) {
  return 5 * max_id_length(n_docs, 32);
}

IndexAssignment index_lsh(const Corpus& corpus, Alphabet alphabet32, std::size_t n_bits,
                          std::uint64_t seed) {
  if (corpus.documents.empty()) throw ArgumentError("index_lsh: empty corpus");
  if (alphabet32.size != 32) throw ArgumentError("LSH symbols need an alphabet of size 32");
  if (n_bits == 0) n_bits = default_lsh_bits(corpus.documents.size());
  if (n_bits % 5 != 0) {
    std::ostringstream msg;
    msg << "LSH bit count must be a multiple of 5, got " << n_bits;
    throw ArgumentError(msg.str());
  }

  const auto sorted = docs_sorted_by_id(corpus);
  std::vector<std::size_t> rows(sorted.size());
  for (std::size_t r = 0; r < sorted.size(); ++r) rows[r] = corpus.documents[sorted[r]].row;
  const EmbeddingMatrix points = gather_rows(corpus.doc_embeddings, rows);

  const LshHyperplanes planes = make_lsh_hyperplanes(points, n_bits, derive_seed(seed, "lsh"));

  std::vector<IdString> ids(points.rows);
  std::map<IdString, std::vector<std::size_t>> collisions;
  for (std::size_t r = 0; r < points.rows; ++r) {
    ids[r] = lsh_symbols(lsh_bits(points.row(r), planes));
    collisions[ids[r]].push_back(r);
  }

  // Colliding documents get a hierarchical-k-means suffix over their
  // embeddings until the assignment is injective.
  for (const auto& [symbols, members] : collisions) {
    if (members.size() < 2) continue;
    const EmbeddingMatrix group_points = gather_rows(points, members);
    std::uint64_t h = derive_seed(seed, "lsh-suffix");
    for (int d : symbols) h = mix_path(h, d);
    const auto suffixes = ids_from_hierarchy(group_points, alphabet32.size, h);
    for (std::size_t m = 0; m < members.size(); ++m) {
      IdString& id = ids[members[m]];
      id.insert(id.end(), suffixes[m].begin(), suffixes[m].end());
    }
  }

  return make_assignment(corpus, IndexMethod::LSHI, alphabet32, seed, sorted, ids);
}

namespace {

std::vector<double> mean_of_queries(const Corpus& corpus, std::span<const std::size_t> query_idx) {
  std::vector<double> mean(corpus.query_embeddings.dim, 0.0);
  for (std::size_t qi : query_idx) {
    const auto row = corpus.query_embeddings.row(corpus.queries[qi].row);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
  }
  const double inv = 1.0 / static_cast<double>(query_idx.size());
  for (double& v : mean) v *= inv;
  return mean;
}

}  // namespace

std::vector<double> query_mean(const Corpus& corpus, std::string_view doc_id,
                               const SourceSet& sources) {
  const std::size_t doc = corpus.doc_index(doc_id);
  const auto groups = corpus.queries_by_doc(sources, Split::Train);
  if (groups[doc].empty()) {
    throw MissingDataError("document " + std::string(doc_id) + " has no train queries in sources " +
                           sources.to_string());
  }
  return mean_of_queries(corpus, groups[doc]);
}

RepSet query_mean_reps(const Corpus& corpus, const SourceSet& sources) {
  RepSet out;
  out.reps = EmbeddingMatrix::zeros(corpus.documents.size(), corpus.doc_embeddings.dim);
  const auto groups = corpus.queries_by_doc(sources, Split::Train);
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    if (groups[i].empty()) {
      // No covering queries: fall back to the document's own embedding.
      const auto row = corpus.doc_embeddings.row(corpus.documents[i].row);
      std::copy(row.begin(), row.end(), out.reps.row(i).begin());
      out.fallback_docs.push_back(corpus.documents[i].doc_id);
      continue;
    }
    const auto mean = mean_of_queries(corpus, groups[i]);
    std::copy(mean.begin(), mean.end(), out.reps.row(i).begin());
  }
  return out;
}

IndexAssignment index_bmi(const Corpus& corpus, Alphabet alphabet, const SourceSet& sources,
                          std::uint64_t seed) {
  if (corpus.documents.empty()) throw ArgumentError("index_bmi: empty corpus");
  if (sources.empty()) throw ArgumentError("index_bmi: no query sources selected");
  RepSet reps = query_mean_reps(corpus, sources);

  const auto sorted = docs_sorted_by_id(corpus);
  const EmbeddingMatrix points = gather_rows(reps.reps, sorted);
  const auto ids = ids_from_hierarchy(points, alphabet.size, derive_seed(seed, "tree"));
  return make_assignment(corpus, IndexMethod::BMI, alphabet, seed, sorted, ids,
                         std::move(reps.fallback_docs));
}

void save_assignment(const IndexAssignment& a, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << "#method=" << method_name(a.method) << " alphabet=" << a.alphabet.size
      << " seed=" << a.seed << "\n";
  for (std::size_t i = 0; i < a.doc_ids.size(); ++i) {
    out << a.doc_ids[i] << '\t' << format_id(a.ids[i]) << "\n";
  }
}

IndexAssignment load_assignment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string header;
  if (!std::getline(in, header) || header.rfind("#method=", 0) != 0) {
    throw FormatError(path.string() + ": missing '#method=...' header");
  }

  IndexAssignment a;
  {
    std::istringstream hs(header.substr(1));
    std::string token;
    while (hs >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) throw FormatError(path.string() + ": bad header token " + token);
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "method") {
        a.method = parse_method(value);
      } else if (key == "alphabet") {
        a.alphabet.size = static_cast<std::size_t>(std::stoull(value));
      } else if (key == "seed") {
        a.seed = std::stoull(value);
      } else {
        throw FormatError(path.string() + ": unknown header key " + key);
      }
    }
  }

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": expected doc_id<TAB>digits";
      throw FormatError(msg.str());
    }
    a.doc_ids.push_back(line.substr(0, tab));
    a.ids.push_back(parse_id(std::string_view(line).substr(tab + 1), a.alphabet.size));
    a.max_len = std::max(a.max_len, a.ids.back().size());
  }
  a.rebuild_lookup();
  validate_assignment(a);
  return a;
}

}  // namespace bmidx
