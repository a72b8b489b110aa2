#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace ltood::cli {

// SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_sha1(std::string_view content);
std::string file_blob_sha1(const std::filesystem::path& path);
// SHA-1 over the sorted "<hash> <name>\n" lines, a stand-in for a tree id.
std::string combined_hash(const std::map<std::string, std::string>& entries);

// Every regular file below `dir`, keyed by its generic relative path.
// The top-level command manifest is skipped.
std::map<std::string, std::string> hash_tree(const std::filesystem::path& dir);

inline constexpr const char* kManifestName = "manifest.json";

// Everything needed to re-run a command and check its outputs.
struct ExperimentManifest {
  std::string command;
  std::vector<std::string> args;  // argv after the subcommand, minus --out
  std::string working_dir;        // relative input paths resolve against this
  std::string output_dir;
  std::vector<std::uint64_t> seeds;
  nlohmann::json config = nullptr;
  nlohmann::json datasets = nlohmann::json::array();
  std::map<std::string, std::string> inputs;   // path -> blob hash
  std::string inputs_hash;
  std::map<std::string, std::string> outputs;  // relative path -> blob hash
  std::string label;
};

nlohmann::json to_json(const ExperimentManifest& m);
ExperimentManifest manifest_from_json(const nlohmann::json& j);

void write_manifest(const std::filesystem::path& dir, const ExperimentManifest& m);
ExperimentManifest read_manifest(const std::filesystem::path& path);

}  // namespace ltood::cli
