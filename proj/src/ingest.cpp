#include "cvemap/ingest.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <zlib.h>

#include "cvemap/errors.hpp"
#include "internal_http.hpp"
#include "json.hpp"

namespace cvemap {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(RecordSource s) {
  switch (s) {
    case RecordSource::nvd_feed: return "nvd_feed";
    case RecordSource::local_file: return "local_file";
    case RecordSource::manual: return "manual";
  }
  return "manual";
}

RecordSource record_source_from_string(const std::string& s) {
  if (s == "nvd_feed") return RecordSource::nvd_feed;
  if (s == "local_file") return RecordSource::local_file;
  if (s == "manual") return RecordSource::manual;
  throw ValidationError("unknown record source: " + s);
}

bool is_valid_cve_id(const std::string& id) {
  static const std::regex re(R"(^CVE-\d{4}-\d{4,}$)");
  return std::regex_match(id, re);
}

std::vector<CveRecord> parse_nvd_json(const std::string& payload,
                                      IngestStats* stats) {
  json feed;
  try {
    feed = json::parse(payload);
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed feed document: ") + e.what());
  }
  IngestStats local;
  IngestStats& st = stats ? *stats : local;

  std::vector<CveRecord> out;
  if (!feed.contains("vulnerabilities")) {
    st.warnings.push_back("feed has no vulnerabilities array");
    return out;
  }
  const json& vulns = feed.at("vulnerabilities");
  if (!vulns.is_array())
    throw LoadError("feed field vulnerabilities is not an array");

  for (const auto& entry : vulns) {
    if (!entry.contains("cve") || !entry.at("cve").is_object()) {
      ++st.skipped_missing;
      st.warnings.push_back("entry without a cve object skipped");
      continue;
    }
    const json& cve = entry.at("cve");
    const std::string id = cve.value("id", std::string());
    if (!is_valid_cve_id(id)) {
      ++st.skipped_missing;
      st.warnings.push_back("entry with missing or malformed id skipped" +
                            (id.empty() ? std::string() : " (" + id + ")"));
      continue;
    }
    std::string description;
    bool saw_any_description = false;
    if (cve.contains("descriptions") && cve.at("descriptions").is_array()) {
      for (const auto& d : cve.at("descriptions")) {
        if (!d.is_object()) continue;
        saw_any_description = true;
        if (d.value("lang", std::string()) == "en") {
          description = d.value("value", std::string());
          if (!description.empty()) break;
        }
      }
    }
    if (description.empty()) {
      if (saw_any_description) {
        ++st.skipped_language;
        st.warnings.push_back(id + " has no English description, skipped");
      } else {
        ++st.skipped_missing;
        st.warnings.push_back(id + " has no description, skipped");
      }
      continue;
    }
    CveRecord rec;
    rec.cve_id = id;
    rec.description = description;
    rec.published = cve.value("published", std::string());
    rec.source = RecordSource::nvd_feed;
    out.push_back(std::move(rec));
    ++st.parsed;
  }
  return out;
}

DocumentStore::DocumentStore(const std::string& root) : root_(root) {
  for (const auto& dir :
       {docs_dir(), svos_dir(), datasets_dir(), artifacts_dir(),
        predictions_dir(), manifests_dir()})
    fs::create_directories(dir);
  load();
}

std::string DocumentStore::docs_dir() const {
  return (fs::path(root_) / "docs").string();
}
std::string DocumentStore::svos_dir() const {
  return (fs::path(root_) / "svos").string();
}
std::string DocumentStore::datasets_dir() const {
  return (fs::path(root_) / "datasets").string();
}
std::string DocumentStore::artifacts_dir() const {
  return (fs::path(root_) / "artifacts").string();
}
std::string DocumentStore::predictions_dir() const {
  return (fs::path(root_) / "predictions").string();
}
std::string DocumentStore::manifests_dir() const {
  return (fs::path(root_) / "manifests").string();
}

void DocumentStore::load() {
  const fs::path file = fs::path(docs_dir()) / "records.jsonl";
  std::ifstream in(file);
  if (!in) return;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw LoadError(file.string() + ":" + std::to_string(lineno) + ": " +
                      e.what());
    }
    CveRecord rec;
    rec.cve_id = j.value("cve_id", std::string());
    rec.description = j.value("description", std::string());
    rec.published = j.value("published", std::string());
    rec.source =
        record_source_from_string(j.value("source", std::string("manual")));
    if (rec.cve_id.empty() || rec.description.empty())
      throw LoadError(file.string() + ":" + std::to_string(lineno) +
                      ": record needs cve_id and description");
    docs_[rec.cve_id] = std::move(rec);
  }
}

void DocumentStore::flush() const {
  const fs::path file = fs::path(docs_dir()) / "records.jsonl";
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw LoadError("cannot write " + file.string());
  for (const auto& [id, rec] : docs_) {
    const json j = {{"cve_id", rec.cve_id},
                    {"description", rec.description},
                    {"published", rec.published},
                    {"source", to_string(rec.source)}};
    out << j.dump() << "\n";
  }
}

bool DocumentStore::upsert(const CveRecord& rec) {
  // Feed records carry real CVE ids; local documents (CTI reports) may use
  // any stable identifier such as a filename.
  if (rec.source == RecordSource::nvd_feed && !is_valid_cve_id(rec.cve_id))
    throw ValidationError("malformed cve id: " + rec.cve_id);
  if (rec.cve_id.empty()) throw ValidationError("record has an empty id");
  if (rec.description.empty())
    throw ValidationError(rec.cve_id + " has an empty description");
  auto it = docs_.find(rec.cve_id);
  if (it != docs_.end() && it->second == rec) return false;
  docs_[rec.cve_id] = rec;
  flush();
  return true;
}

std::optional<CveRecord> DocumentStore::get(const std::string& cve_id) const {
  auto it = docs_.find(cve_id);
  if (it == docs_.end()) return std::nullopt;
  return it->second;
}

std::vector<CveRecord> DocumentStore::all() const {
  std::vector<CveRecord> out;
  out.reserve(docs_.size());
  for (const auto& [id, rec] : docs_) out.push_back(rec);
  return out;
}

std::vector<std::pair<std::string, std::string>> DocumentStore::documents()
    const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(docs_.size());
  for (const auto& [id, rec] : docs_) out.emplace_back(id, rec.description);
  return out;
}

bool looks_gzip(const std::string& payload) {
  return payload.size() >= 2 && static_cast<unsigned char>(payload[0]) == 0x1f &&
         static_cast<unsigned char>(payload[1]) == 0x8b;
}

std::string gunzip(const std::string& payload) {
  z_stream strm{};
  if (inflateInit2(&strm, 16 + MAX_WBITS) != Z_OK)
    throw LoadError("cannot initialize gzip decompression");
  std::string out;
  out.reserve(payload.size() * 4);
  std::vector<unsigned char> buf(1 << 16);
  strm.next_in =
      reinterpret_cast<Bytef*>(const_cast<char*>(payload.data()));
  strm.avail_in = static_cast<uInt>(payload.size());
  int rc = Z_OK;
  do {
    strm.next_out = buf.data();
    strm.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&strm);
      throw LoadError("gzip payload is corrupt");
    }
    out.append(reinterpret_cast<char*>(buf.data()),
               buf.size() - strm.avail_out);
  } while (rc != Z_STREAM_END && strm.avail_in > 0);
  inflateEnd(&strm);
  if (rc != Z_STREAM_END) throw LoadError("gzip payload is truncated");
  return out;
}

FetchSummary fetch_feed(const std::string& url_or_path, DocumentStore& store,
                        const FetchOptions& opts) {
  std::string payload;
  if (url_or_path.rfind("http://", 0) == 0) {
    payload = detail::http_get_with_retries(url_or_path, opts.retries,
                                            opts.backoff_ms);
  } else if (url_or_path.rfind("https://", 0) == 0) {
    throw TransportError(
        "https feeds are not supported; download the file and pass its path");
  } else {
    std::ifstream in(url_or_path, std::ios::binary);
    if (!in) throw LoadError("cannot open feed file " + url_or_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    payload = ss.str();
  }
  if (looks_gzip(payload)) payload = gunzip(payload);

  FetchSummary summary;
  const auto records = parse_nvd_json(payload, &summary.stats);
  summary.parsed = static_cast<int>(records.size());
  for (const auto& rec : records)
    if (store.upsert(rec)) ++summary.upserted;
  return summary;
}

TextCorpus load_text_corpus(const std::string& dir_or_jsonl) {
  TextCorpus corpus;
  const fs::path path(dir_or_jsonl);
  if (!fs::exists(path)) throw LoadError("no such path: " + dir_or_jsonl);

  auto add_doc = [&](const std::string& id, const std::string& text) {
    for (auto& [existing_id, existing_text] : corpus.docs) {
      if (existing_id == id) {
        existing_text = text;
        corpus.warnings.push_back("duplicate doc id " + id +
                                  ": later record wins");
        return;
      }
    }
    corpus.docs.emplace_back(id, text);
  };

  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      std::ifstream in(file, std::ios::binary);
      if (!in) {
        corpus.errors.push_back("cannot read " + file.string());
        continue;
      }
      std::ostringstream ss;
      ss << in.rdbuf();
      add_doc(file.filename().string(), ss.str());
    }
    return corpus;
  }

  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + dir_or_jsonl);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      corpus.errors.push_back(dir_or_jsonl + ":" + std::to_string(lineno) +
                              ": " + e.what());
      continue;
    }
    std::string id;
    for (const char* key : {"doc_id", "id", "cve_id"})
      if (j.contains(key) && j.at(key).is_string()) {
        id = j.at(key).get<std::string>();
        break;
      }
    std::string text;
    for (const char* key : {"text", "description", "content"})
      if (j.contains(key) && j.at(key).is_string()) {
        text = j.at(key).get<std::string>();
        break;
      }
    if (id.empty() || text.empty()) {
      corpus.errors.push_back(dir_or_jsonl + ":" + std::to_string(lineno) +
                              ": record needs an id and a text field");
      continue;
    }
    add_doc(id, text);
  }
  return corpus;
}

}  // namespace cvemap
