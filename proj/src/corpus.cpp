#include "bmidx/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "bmidx/error.hpp"
#include "json.hpp"

namespace bmidx {

std::string_view source_name(QuerySource s) {
  switch (s) {
    case QuerySource::RealQ: return "RealQ";
    case QuerySource::GenQ: return "GenQ";
    case QuerySource::DocSeg: return "DocSeg";
  }
  return "GenQ";
}

QuerySource parse_source(std::string_view s) {
  if (s == "RealQ") return QuerySource::RealQ;
  if (s == "GenQ") return QuerySource::GenQ;
  if (s == "DocSeg") return QuerySource::DocSeg;
  throw FormatError("unknown query source: " + std::string(s));
}

std::string_view split_name(Split s) {
  return s == Split::Train ? "train" : "test";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  throw FormatError("unknown split: " + std::string(s));
}

SourceSet SourceSet::parse(std::string_view csv) {
  SourceSet out;
  std::string token;
  std::istringstream in{std::string(csv)};
  while (std::getline(in, token, ',')) {
    std::string t;
    for (char c : token) {
      if (!std::isspace(static_cast<unsigned char>(c))) t += static_cast<char>(std::tolower(c));
    }
    if (t.empty()) continue;
    if (t == "realq") out.realq = true;
    else if (t == "genq") out.genq = true;
    else if (t == "docseg") out.docseg = true;
    else if (t == "all") out = all();
    else throw ArgumentError("unknown query source: " + token);
  }
  return out;
}

bool SourceSet::contains(QuerySource s) const {
  switch (s) {
    case QuerySource::RealQ: return realq;
    case QuerySource::GenQ: return genq;
    case QuerySource::DocSeg: return docseg;
  }
  return false;
}

std::string SourceSet::to_string() const {
  std::string out;
  auto add = [&out](std::string_view name) {
    if (!out.empty()) out += ',';
    out += name;
  };
  if (genq) add("genq");
  if (realq) add("realq");
  if (docseg) add("docseg");
  return out;
}

std::size_t Corpus::doc_index(std::string_view doc_id) const {
  auto it = doc_slot_.find(std::string(doc_id));
  if (it == doc_slot_.end()) {
    throw LookupError("unknown doc_id: " + std::string(doc_id));
  }
  return it->second;
}

bool Corpus::has_doc(std::string_view doc_id) const {
  return doc_slot_.contains(std::string(doc_id));
}

std::vector<std::vector<std::size_t>> Corpus::queries_by_doc(const SourceSet& sources,
                                                             std::optional<Split> split) const {
  std::vector<std::vector<std::size_t>> groups(documents.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const Query& q = queries[qi];
    if (!sources.contains(q.source)) continue;
    if (split && q.split != *split) continue;
    groups[doc_index(q.gold_doc_id)].push_back(qi);
  }
  for (auto& g : groups) {
    std::sort(g.begin(), g.end(), [this](std::size_t a, std::size_t b) {
      return queries[a].query_id < queries[b].query_id;
    });
  }
  return groups;
}

std::vector<std::size_t> Corpus::query_indices(const SourceSet& sources,
                                               std::optional<Split> split) const {
  std::vector<std::size_t> out;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const Query& q = queries[qi];
    if (!sources.contains(q.source)) continue;
    if (split && q.split != *split) continue;
    out.push_back(qi);
  }
  return out;
}

Corpus assemble_corpus(std::vector<Document> documents, std::vector<Query> queries,
                       EmbeddingMatrix doc_embeddings, EmbeddingMatrix query_embeddings) {
  if (doc_embeddings.rows > 0 && query_embeddings.rows > 0 &&
      doc_embeddings.dim != query_embeddings.dim) {
    std::ostringstream msg;
    msg << "document and query matrices disagree on dim: " << doc_embeddings.dim << " vs "
        << query_embeddings.dim;
    throw ValidationError(msg.str());
  }

  Corpus corpus;
  corpus.documents = std::move(documents);
  corpus.queries = std::move(queries);
  corpus.doc_embeddings = std::move(doc_embeddings);
  corpus.query_embeddings = std::move(query_embeddings);

  corpus.doc_slot_.reserve(corpus.documents.size());
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    const Document& d = corpus.documents[i];
    if (!corpus.doc_slot_.emplace(d.doc_id, i).second) {
      throw UniquenessError("duplicate doc_id: " + d.doc_id);
    }
    if (d.row >= corpus.doc_embeddings.rows) {
      std::ostringstream msg;
      msg << "document " << d.doc_id << " points at row " << d.row << " of a "
          << corpus.doc_embeddings.rows << "-row matrix";
      throw BoundsError(msg.str());
    }
  }
  for (const Query& q : corpus.queries) {
    if (!corpus.doc_slot_.contains(q.gold_doc_id)) {
      throw ReferentialError("query " + q.query_id + " references absent doc " + q.gold_doc_id);
    }
    if (q.row >= corpus.query_embeddings.rows) {
      std::ostringstream msg;
      msg << "query " << q.query_id << " points at row " << q.row << " of a "
          << corpus.query_embeddings.rows << "-row matrix";
      throw BoundsError(msg.str());
    }
  }
  return corpus;
}

namespace {

nlohmann::json parse_jsonl_line(const std::string& line, const std::filesystem::path& path,
                                std::size_t line_no) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    std::ostringstream msg;
    msg << path.string() << ":" << line_no << ": " << e.what();
    throw FormatError(msg.str());
  }
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& doc_path,
                   const std::filesystem::path& query_path,
                   EmbeddingMatrix doc_embeddings, EmbeddingMatrix query_embeddings) {
  std::ifstream doc_in(doc_path);
  if (!doc_in) throw FormatError("cannot open " + doc_path.string());
  std::vector<Document> documents;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(doc_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = parse_jsonl_line(line, doc_path, line_no);
    Document d;
    d.doc_id = j.at("doc_id").get<std::string>();
    d.row = j.contains("row") ? j.at("row").get<std::size_t>() : documents.size();
    documents.push_back(std::move(d));
  }

  std::ifstream query_in(query_path);
  if (!query_in) throw FormatError("cannot open " + query_path.string());
  std::vector<Query> queries;
  line_no = 0;
  while (std::getline(query_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = parse_jsonl_line(line, query_path, line_no);
    Query q;
    q.query_id = j.at("query_id").get<std::string>();
    q.gold_doc_id = j.at("doc_id").get<std::string>();
    q.source = parse_source(j.at("source").get<std::string>());
    q.split = parse_split(j.at("split").get<std::string>());
    q.row = j.contains("row") ? j.at("row").get<std::size_t>() : queries.size();
    queries.push_back(std::move(q));
  }

  return assemble_corpus(std::move(documents), std::move(queries), std::move(doc_embeddings),
                         std::move(query_embeddings));
}

void save_documents_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  for (const Document& d : corpus.documents) {
    nlohmann::json j;
    j["doc_id"] = d.doc_id;
    j["row"] = d.row;
    out << j.dump() << "\n";
  }
}

void save_queries_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  for (const Query& q : corpus.queries) {
    nlohmann::json j;
    j["query_id"] = q.query_id;
    j["doc_id"] = q.gold_doc_id;
    j["source"] = std::string(source_name(q.source));
    j["split"] = std::string(split_name(q.split));
    j["row"] = q.row;
    out << j.dump() << "\n";
  }
}

}  // namespace bmidx
