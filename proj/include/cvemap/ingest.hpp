#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cvemap {

enum class RecordSource { nvd_feed, local_file, manual };

const char* to_string(RecordSource s);
RecordSource record_source_from_string(const std::string& s);

struct CveRecord {
  std::string cve_id;       // CVE-\d{4}-\d{4,}
  std::string description;  // English description, non-empty
  std::string published;    // ISO-8601, may be empty for local documents
  RecordSource source = RecordSource::manual;

  bool operator==(const CveRecord& other) const = default;
};

struct IngestStats {
  int parsed = 0;
  int skipped_language = 0;
  int skipped_missing = 0;
  std::vector<std::string> warnings;
};

// NVD 2.0 feed document -> records. Non-English-only entries and entries
// without a usable description are skipped and counted.
std::vector<CveRecord> parse_nvd_json(const std::string& payload,
                                      IngestStats* stats = nullptr);

bool is_valid_cve_id(const std::string& id);

// On-disk layout under root: docs/, svos/, datasets/, artifacts/,
// predictions/. Records live in docs/records.jsonl, kept id-sorted so a
// re-run that changes nothing leaves the file byte-identical.
class DocumentStore {
public:
  explicit DocumentStore(const std::string& root);

  const std::string& root() const { return root_; }
  std::string docs_dir() const;
  std::string svos_dir() const;
  std::string datasets_dir() const;
  std::string artifacts_dir() const;
  std::string predictions_dir() const;
  std::string manifests_dir() const;

  // True when the record was new or replaced an existing one with different
  // content; re-upserting an identical record is a no-op.
  bool upsert(const CveRecord& rec);
  std::optional<CveRecord> get(const std::string& cve_id) const;
  std::vector<CveRecord> all() const;
  std::size_t size() const { return docs_.size(); }

  // (doc_id, text) view over every stored record, id-ascending.
  std::vector<std::pair<std::string, std::string>> documents() const;

private:
  void load();
  void flush() const;

  std::string root_;
  std::map<std::string, CveRecord> docs_;
};

struct FetchOptions {
  int retries = 3;
  int backoff_ms = 200;
};

struct FetchSummary {
  int parsed = 0;
  int upserted = 0;
  IngestStats stats;
};

// url-or-path: http://... is fetched with retry/backoff; anything else is
// read as a local file. Gzip payloads are inflated before parsing.
FetchSummary fetch_feed(const std::string& url_or_path, DocumentStore& store,
                        const FetchOptions& opts = {});

bool looks_gzip(const std::string& payload);
std::string gunzip(const std::string& payload);

struct TextCorpus {
  std::vector<std::pair<std::string, std::string>> docs;
  std::vector<std::string> warnings;
  std::vector<std::string> errors;  // unreadable files; the batch continues
};

// Directory of text files (doc_id = filename) or a JSONL file with
// {doc_id|id|cve_id, text|description|content} per line. Duplicate ids keep
// the later record with a warning.
TextCorpus load_text_corpus(const std::string& dir_or_jsonl);

}  // namespace cvemap
