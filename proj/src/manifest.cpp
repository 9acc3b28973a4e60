#include "cvemap/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cvemap/errors.hpp"
#include "cvemap/rng.hpp"
#include "json.hpp"

namespace cvemap {

using nlohmann::json;

std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "absent";
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

void RunManifest::add_input(const std::string& path) {
  input_hashes[path] = file_digest_hex(path);
}

std::string RunManifest::to_json_text() const {
  const json j = {{"command", command},
                  {"config", config},
                  {"input_hashes", input_hashes},
                  {"outputs", outputs},
                  {"seed", seed},
                  {"started_at", started_at},
                  {"elapsed_seconds", elapsed_seconds}};
  return j.dump(2);
}

void RunManifest::write(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw LoadError("cannot write manifest " + path);
  out << to_json_text() << "\n";
}

}  // namespace cvemap
