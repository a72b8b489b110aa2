#include "ltood/cli/manifest.hpp"

#include <openssl/sha.h>

#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

#include "ltood/error.hpp"

namespace ltood::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string hex(const unsigned char* d, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string s(2 * n, '0');
  for (std::size_t i = 0; i < n; ++i) {
    s[2 * i] = digits[d[i] >> 4];
    s[2 * i + 1] = digits[d[i] & 15];
  }
  return s;
}

std::string sha1_hex(std::string_view bytes) {
  unsigned char md[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), md);
  return hex(md, SHA_DIGEST_LENGTH);
}

}  // namespace

std::string git_blob_sha1(std::string_view content) {
  std::string buf = "blob " + std::to_string(content.size());
  buf.push_back('\0');
  buf.append(content);
  return sha1_hex(buf);
}

std::string file_blob_sha1(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return git_blob_sha1(content);
}

std::string combined_hash(const std::map<std::string, std::string>& entries) {
  std::string buf;
  for (const auto& [name, h] : entries) buf += h + ' ' + name + '\n';
  return sha1_hex(buf);
}

std::map<std::string, std::string> hash_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == kManifestName) continue;
    out[rel] = file_blob_sha1(e.path());
  }
  return out;
}

json to_json(const ExperimentManifest& m) {
  return {{"format", "ltood-manifest"},
          {"version", 1},
          {"command", m.command},
          {"args", m.args},
          {"working_dir", m.working_dir},
          {"output_dir", m.output_dir},
          {"seeds", m.seeds},
          {"label", m.label},
          {"config", m.config},
          {"datasets", m.datasets},
          {"inputs", m.inputs},
          {"inputs_hash", m.inputs_hash},
          {"outputs", m.outputs}};
}

ExperimentManifest manifest_from_json(const json& j) {
  if (j.value("format", "") != "ltood-manifest") {
    throw ParseError("not an ltood command manifest");
  }
  ExperimentManifest m;
  m.command = j.at("command").get<std::string>();
  m.args = j.at("args").get<std::vector<std::string>>();
  m.working_dir = j.at("working_dir").get<std::string>();
  m.output_dir = j.at("output_dir").get<std::string>();
  m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  m.label = j.value("label", "");
  m.config = j.at("config");
  m.datasets = j.at("datasets");
  m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  m.inputs_hash = j.at("inputs_hash").get<std::string>();
  m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  return m;
}

void write_manifest(const fs::path& dir, const ExperimentManifest& m) {
  const fs::path p = dir / kManifestName;
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << to_json(m).dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed: " + p.string());
}

ExperimentManifest read_manifest(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read manifest " + path.string());
  try {
    return manifest_from_json(json::parse(is));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace ltood::cli
