#include "bmidx/manifest.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "bmidx/error.hpp"
#include "json.hpp"

namespace bmidx {

std::string file_digest_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open for digest: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  std::ostringstream out;
  out << std::hex << std::setfill('0') << std::setw(16) << h;
  return out.str();
}

void RunManifest::add_input(const std::filesystem::path& path) {
  input_digests[path.filename().string()] = file_digest_hex(path);
}

void RunManifest::add_output(const std::filesystem::path& path) {
  output_digests[path.filename().string()] = file_digest_hex(path);
}

void RunManifest::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["tool_version"] = tool_version;
  j["subcommand"] = subcommand;
  j["seed"] = seed;
  j["flags"] = flags;
  j["input_digests"] = input_digests;
  j["output_digests"] = output_digests;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace bmidx
