#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "bmidx/indexers.hpp"
#include "bmidx/manifest.hpp"
#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"

using bmidx::testing::TempDir;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(BMIDX_CLI_PATH) + " " + args + " > " + log.string() +
                          " 2> " + log.string() + ".err";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  nlohmann::json j;
  in >> j;
  return j;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

struct CliFixture {
  TempDir tmp;
  fs::path log;
  fs::path corpus;

  CliFixture() : log(tmp / "log.txt"), corpus(tmp / "corpus") {}

  int run(const std::string& args) { return run_cli(args, log); }

  void make_corpus(const std::string& extra = "") {
    REQUIRE(run("synth --docs 40 --queries-per-doc 4 --dim 6 --seed 3 --out " +
                corpus.string() + " " + extra) == 0);
  }
};

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("synth writes the corpus files and reruns bit-identically") {
  CliFixture f;
  f.make_corpus("--decouple");
  for (const char* name : {"docs.jsonl", "queries.jsonl", "doc_vectors.f32",
                           "doc_vectors.meta.json", "query_vectors.f32",
                           "query_vectors.meta.json", "run_manifest.json"}) {
    CHECK(fs::exists(f.corpus / name));
  }

  const auto first = read_json(f.corpus / "run_manifest.json");
  const fs::path again = f.tmp / "corpus2";
  REQUIRE(f.run("synth --docs 40 --queries-per-doc 4 --dim 6 --seed 3 --out " + again.string() +
                " --decouple") == 0);
  const auto second = read_json(again / "run_manifest.json");
  CHECK(first.at("output_digests") == second.at("output_digests"));
  CHECK(first.at("tool_version") == second.at("tool_version"));
}

TEST_CASE("missing required flags are usage errors with exit 2") {
  CliFixture f;
  CHECK(f.run("synth") == 2);
  CHECK(f.run("index --corpus somewhere") == 2);   // no --method
  CHECK(f.run("definitely-not-a-subcommand") == 2);
  CHECK(f.run("verify --suite nonsense") == 2);
}

TEST_CASE("index writes one unique ID line per document") {
  CliFixture f;
  f.make_corpus();
  const fs::path ids = f.tmp / "run" / "ids.tsv";
  REQUIRE(f.run("index --method hkmeans --corpus " + f.corpus.string() + " --seed 5 --out " +
                ids.string()) == 0);
  const bmidx::IndexAssignment a = bmidx::load_assignment(ids);
  CHECK(a.size() == 40);
  CHECK(a.method == bmidx::IndexMethod::HKmI);
  std::set<bmidx::IdString> distinct(a.ids.begin(), a.ids.end());
  CHECK(distinct.size() == 40);

  // Rerunning reproduces the same digest.
  const fs::path ids2 = f.tmp / "run2" / "ids.tsv";
  REQUIRE(f.run("index --method hkmeans --corpus " + f.corpus.string() + " --seed 5 --out " +
                ids2.string()) == 0);
  CHECK(bmidx::file_digest_hex(ids) == bmidx::file_digest_hex(ids2));
}

TEST_CASE("lsh bit counts that are not multiples of five exit 2") {
  CliFixture f;
  f.make_corpus();
  CHECK(f.run("index --method lsh --bits 7 --corpus " + f.corpus.string() + " --out " +
              (f.tmp / "ids.tsv").string()) == 2);
  CHECK(f.run("index --method bogus --corpus " + f.corpus.string()) == 2);
}

TEST_CASE("bmi without covering queries falls back and still exits 0") {
  CliFixture f;
  // Hand-written corpus: doc b has only DocSeg queries.
  fs::create_directories(f.corpus);
  std::ofstream(f.corpus / "docs.jsonl") << R"({"doc_id": "a"})" << "\n"
                                         << R"({"doc_id": "b"})" << "\n"
                                         << R"({"doc_id": "c"})" << "\n";
  std::ofstream(f.corpus / "queries.jsonl")
      << R"({"query_id": "q1", "doc_id": "a", "source": "GenQ", "split": "train"})" << "\n"
      << R"({"query_id": "q2", "doc_id": "b", "source": "DocSeg", "split": "train"})" << "\n"
      << R"({"query_id": "q3", "doc_id": "c", "source": "GenQ", "split": "train"})" << "\n";
  bmidx::EmbeddingMatrix docs = bmidx::EmbeddingMatrix::zeros(3, 2);
  docs.row(1)[0] = 5.0;
  docs.row(2)[1] = -4.0;
  bmidx::save_embeddings(docs, f.corpus / "doc_vectors.f32");
  bmidx::EmbeddingMatrix queries = bmidx::EmbeddingMatrix::zeros(3, 2);
  queries.row(0)[0] = 0.1;
  queries.row(1)[0] = 5.1;
  queries.row(2)[1] = -4.1;
  bmidx::save_embeddings(queries, f.corpus / "query_vectors.f32");

  const fs::path ids = f.tmp / "ids.tsv";
  CHECK(f.run("index --method bmi --sources genq --corpus " + f.corpus.string() + " --out " +
              ids.string()) == 0);
  const auto err = read_lines(fs::path(f.log.string() + ".err"));
  bool mentioned = false;
  for (const auto& line : err) {
    mentioned = mentioned || line.find("fell back") != std::string::npos;
  }
  CHECK(mentioned);
}

TEST_CASE("ib-curve emits one CSV row per prefix length, ending at log2 |D|") {
  CliFixture f;
  f.make_corpus();
  const fs::path ids = f.tmp / "ids.tsv";
  REQUIRE(f.run("index --method hkmeans --corpus " + f.corpus.string() + " --seed 5 --out " +
                ids.string()) == 0);
  const fs::path csv = f.tmp / "curve.csv";
  REQUIRE(f.run("ib-curve --corpus " + f.corpus.string() + " --ids " + ids.string() +
                " --prefix-lens 1,2,3,4 --out " + csv.string()) == 0);
  const auto lines = read_lines(csv);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == "l,i_dt_bits,i_dq_given_t_bits,clamped_queries");

  // Last row (highest I(D;T)) reaches log2(40) because l >= max ID length.
  std::istringstream last(lines.back());
  std::string cell;
  std::getline(last, cell, ',');
  std::getline(last, cell, ',');
  CHECK(std::stod(cell) == doctest::Approx(std::log2(40.0)).epsilon(1e-9));

  CHECK(f.run("ib-curve --corpus " + f.corpus.string() + " --ids " + ids.string() +
              " --prefix-lens 0,1 --out " + csv.string()) == 2);
}

TEST_CASE("eval scores a trivially easy corpus perfectly") {
  CliFixture f;
  // Tiny query noise: every test query sits on its document's vector.
  REQUIRE(f.run("synth --docs 30 --queries-per-doc 3 --dim 5 --seed 11 --query-sigma 1e-4 "
                "--out " + f.corpus.string()) == 0);
  const fs::path ids = f.tmp / "ids.tsv";
  REQUIRE(f.run("index --method hkmeans --corpus " + f.corpus.string() + " --seed 2 --out " +
                ids.string()) == 0);
  const fs::path out = f.tmp / "eval";
  REQUIRE(f.run("eval --corpus " + f.corpus.string() + " --ids " + ids.string() + " --out-dir " +
                out.string()) == 0);
  const auto metrics = read_json(out / "metrics.json");
  CHECK(metrics.at("recall").at("1").get<double>() == 100.0);
  CHECK(metrics.at("mrr100").get<double>() == 1.0);
  CHECK(metrics.at("n_queries").get<std::size_t>() == 30);
  CHECK(fs::exists(out / "rankings.tsv"));
  CHECK(fs::exists(out / "run_manifest.json"));
}

TEST_CASE("wider beams never reduce recall at 100") {
  CliFixture f;
  f.make_corpus("--decouple --query-sigma 0.5");
  const fs::path ids = f.tmp / "ids.tsv";
  REQUIRE(f.run("index --method hkmeans --corpus " + f.corpus.string() + " --seed 7 --out " +
                ids.string()) == 0);
  const fs::path narrow = f.tmp / "narrow";
  const fs::path wide = f.tmp / "wide";
  REQUIRE(f.run("eval --corpus " + f.corpus.string() + " --ids " + ids.string() +
                " --beam-width 1 --out-dir " + narrow.string()) == 0);
  REQUIRE(f.run("eval --corpus " + f.corpus.string() + " --ids " + ids.string() +
                " --beam-width 100 --out-dir " + wide.string()) == 0);
  const double rec_narrow = read_json(narrow / "metrics.json").at("recall").at("100");
  const double rec_wide = read_json(wide / "metrics.json").at("recall").at("100");
  CHECK(rec_wide >= rec_narrow);
}

TEST_CASE("results are identical for any thread count") {
  CliFixture f;
  f.make_corpus("--decouple");
  const fs::path ids = f.tmp / "ids.tsv";
  REQUIRE(f.run("index --method bmi --corpus " + f.corpus.string() + " --seed 7 --out " +
                ids.string()) == 0);

  const fs::path serial = f.tmp / "serial";
  const fs::path parallel = f.tmp / "parallel";
  REQUIRE(f.run("eval --corpus " + f.corpus.string() + " --ids " + ids.string() +
                " --threads 1 --out-dir " + serial.string()) == 0);
  REQUIRE(f.run("eval --corpus " + f.corpus.string() + " --ids " + ids.string() +
                " --threads 4 --out-dir " + parallel.string()) == 0);
  CHECK(bmidx::file_digest_hex(serial / "rankings.tsv") ==
        bmidx::file_digest_hex(parallel / "rankings.tsv"));
  CHECK(bmidx::file_digest_hex(serial / "metrics.json") ==
        bmidx::file_digest_hex(parallel / "metrics.json"));

  const fs::path curve1 = f.tmp / "curve1.csv";
  const fs::path curve4 = f.tmp / "curve4.csv";
  REQUIRE(f.run("ib-curve --corpus " + f.corpus.string() + " --ids " + ids.string() +
                " --threads 1 --out " + curve1.string()) == 0);
  REQUIRE(f.run("ib-curve --corpus " + f.corpus.string() + " --ids " + ids.string() +
                " --threads 4 --out " + curve4.string()) == 0);
  CHECK(bmidx::file_digest_hex(curve1) == bmidx::file_digest_hex(curve4));
}

TEST_CASE("verify suites pass and report per-trial lines") {
  CliFixture f;
  REQUIRE(f.run("verify --suite mi-identity --trials 20 --seed 5") == 0);
  const auto lines = read_lines(f.log);
  std::size_t trial_lines = 0;
  for (const auto& line : lines) {
    trial_lines += line.rfind("mi-identity trial", 0) == 0 ? 1 : 0;
  }
  CHECK(trial_lines == 20);
  CHECK(f.run("verify --suite partition-oracle --trials 10 --seed 1") == 0);
  CHECK(f.run("verify --suite mle-gradient --trials 5 --seed 2") == 0);
}

TEST_SUITE_END();
