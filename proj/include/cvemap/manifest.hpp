#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cvemap {

// Hex digest of a file's bytes; "absent" when the file cannot be read.
std::string file_digest_hex(const std::string& path);

// One per pipeline command; holds enough to reproduce the run.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;       // flag -> value snapshot
  std::map<std::string, std::string> input_hashes; // path -> digest
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string started_at;  // ISO-8601 UTC
  double elapsed_seconds = 0;

  void add_input(const std::string& path);
  std::string to_json_text() const;
  void write(const std::string& path) const;
};

}  // namespace cvemap
