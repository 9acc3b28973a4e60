#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cvemap/dataset.hpp"
#include "cvemap/errors.hpp"
#include "cvemap/evalkit.hpp"
#include "cvemap/extractor.hpp"
#include "cvemap/ingest.hpp"
#include "cvemap/manifest.hpp"
#include "cvemap/model.hpp"
#include "cvemap/srl.hpp"
#include "cvemap/taxonomy.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cvemap;

namespace {

int g_log_level = 2;  // 0 error, 1 warn, 2 info, 3 debug

void log_at(int level, const char* tag, const std::string& msg) {
  if (level <= g_log_level) std::cerr << "[" << tag << "] " << msg << "\n";
}
void log_error(const std::string& m) { log_at(0, "error", m); }
void log_warn(const std::string& m) { log_at(1, "warn", m); }
void log_info(const std::string& m) { log_at(2, "info", m); }
void log_debug(const std::string& m) { log_at(3, "debug", m); }

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Global {
  std::string store;
  std::uint64_t seed = 13;
  bool json_out = false;
  std::string log_level = "info";
  bool seed_given = false;
};

Taxonomy load_taxonomy_opt(const std::string& path) {
  return path.empty() ? Taxonomy::built_in_default() : Taxonomy::load(path);
}

Lexicon load_lexicon_opt(const std::string& path) {
  return path.empty() ? Lexicon::built_in_default() : Lexicon::load(path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_json_file(const std::string& path, const json& j) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw LoadError("cannot write " + path);
  out << j.dump(2) << "\n";
}

// Manifest location: under the store when one is configured, otherwise next
// to the command's primary output.
std::string manifest_path(const Global& g, const std::string& command,
                          const std::string& primary_output) {
  if (!g.store.empty())
    return (fs::path(g.store) / "manifests" / (command + ".json")).string();
  if (!primary_output.empty()) return primary_output + ".manifest.json";
  return {};
}

RunManifest begin_manifest(const std::string& command, const Global& g) {
  RunManifest m;
  m.command = command;
  m.seed = g.seed;
  m.started_at = now_iso8601();
  return m;
}

void finish_manifest(RunManifest& m, const Global& g,
                     const std::chrono::steady_clock::time_point& t0,
                     const std::string& primary_output) {
  m.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  const std::string path = manifest_path(g, m.command, primary_output);
  if (path.empty()) {
    log_debug("no store or output path; manifest skipped");
    return;
  }
  m.write(path);
  log_info("manifest written to " + path);
}

json metrics_to_json(const MetricReport& m) {
  json pc = json::object();
  for (const auto& [id, cm] : m.per_class)
    pc[std::to_string(id)] = {
        {"p", cm.p}, {"r", cm.r}, {"f1", cm.f1}, {"support", cm.support}};
  return {{"accuracy", m.accuracy},   {"micro_p", m.micro_p},
          {"micro_r", m.micro_r},     {"micro_f1", m.micro_f1},
          {"macro_p", m.macro_p},     {"macro_r", m.macro_r},
          {"macro_f1", m.macro_f1},   {"per_class", pc},
          {"excluded_classes", m.excluded_classes}};
}

void print_metrics(const MetricReport& m, const Taxonomy& t) {
  std::cout << std::fixed << std::setprecision(4);
  std::cout << "accuracy  " << m.accuracy << "\n";
  std::cout << "micro     p " << m.micro_p << "  r " << m.micro_r << "  f1 "
            << m.micro_f1 << "\n";
  std::cout << "macro     p " << m.macro_p << "  r " << m.macro_r << "  f1 "
            << m.macro_f1 << "\n";
  std::cout << "class  support  p       r       f1      name\n";
  for (const auto& [id, cm] : m.per_class) {
    if (cm.support == 0) continue;
    std::cout << std::setw(5) << id << "  " << std::setw(7) << cm.support
              << "  " << cm.p << "  " << cm.r << "  " << cm.f1 << "  "
              << t.functionality(id).name << "\n";
  }
  if (!m.excluded_classes.empty()) {
    std::cout << "excluded from macro (zero support):";
    for (int id : m.excluded_classes) std::cout << " " << id;
    std::cout << "\n";
  }
  std::cout.unsetf(std::ios::fixed);
}

json confusion_to_json(const ConfusionMatrix& cm) {
  json rows = json::array();
  for (const auto& row : cm) {
    json r = json::array();
    for (int v : row) r.push_back(v);
    rows.push_back(r);
  }
  return rows;
}

void print_confusion(const ConfusionMatrix& cm) {
  std::cout << "confusion (rows gold, cols predicted):\n     ";
  for (int c = 1; c <= kNumClasses; ++c) std::cout << std::setw(4) << c;
  std::cout << "\n";
  for (int g = 0; g < kNumClasses; ++g) {
    std::cout << std::setw(4) << (g + 1) << " ";
    for (int p = 0; p < kNumClasses; ++p)
      std::cout << std::setw(4) << cm[g][p];
    std::cout << "\n";
  }
}

ModelConfig model_config_from_file(const std::string& path) {
  ModelConfig cfg;
  if (path.empty()) return cfg;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw LoadError("bad model config " + path + ": " + e.what());
  }
  cfg.encoder_ref = j.value("encoder_ref", cfg.encoder_ref);
  cfg.num_classes = j.value("num_classes", cfg.num_classes);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
  cfg.optimizer = j.value("optimizer", cfg.optimizer);
  if (j.contains("loss")) cfg.loss = loss_from_string(j.at("loss"));
  cfg.max_tokens = j.value("max_tokens", cfg.max_tokens);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.dim = j.value("dim", cfg.dim);
  cfg.layers = j.value("layers", cfg.layers);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.ffn = j.value("ffn", cfg.ffn);
  cfg.vocab_cap = j.value("vocab_cap", cfg.vocab_cap);
  return cfg;
}

// ---- subcommand option bags ----

struct TaxonomyOpts {
  std::string file;
};

struct IngestNvdOpts {
  std::string feed;
  int retries = 3;
  int backoff_ms = 200;
};

struct IngestTextOpts {
  std::string dir;
  std::string jsonl;
};

struct ExtractOpts {
  std::string input;
  std::string out;
  std::string lexicon;
  std::string taxonomy;
  std::string backend = "rule";
  int jobs = 1;
  bool write_side = false;
};

struct BuildDatasetOpts {
  std::string svos;
  std::string manual;
  std::string ts2;
  std::string input;
  std::string out_dir;
  std::string taxonomy;
  int tau1 = 600, tau2 = 600, tau3 = 600;
  double train_fraction = 0.75;
};

struct TrainOpts {
  std::string data;
  std::string config;
  std::string taxonomy;
  std::string out;
};

struct EvaluateOpts {
  std::string artifact;
  std::string data;
  std::string pairs;
  std::string split = "ts1";
  std::string taxonomy;
  std::string out;
  bool confusion = false;
};

struct PredictOpts {
  std::string artifact;
  std::string context_file;
  std::string content;
  std::string taxonomy;
  std::string out;
  int top_k = 0;
};

struct TopkEvalOpts {
  std::string input;
  std::string out;
};

struct BaselineOpts {
  std::string items;
  std::string transcript;
  std::string endpoint;
  std::string model = "gpt-3.5-turbo";
  std::string credential_env = "LLM_API_KEY";
  std::string out;
  int pause_ms = 0;
  bool record = false;
  bool lenient = false;
};

// ---- subcommand runners ----

int run_taxonomy(const Global& g, const TaxonomyOpts& o) {
  const Taxonomy t = load_taxonomy_opt(o.file);
  for (const auto& w : t.warnings()) log_warn(w);

  json derived = json::array();
  for (int a = 1; a <= kNumClasses; ++a)
    for (int b = 1; b <= kNumClasses; ++b) {
      if (a == b) continue;
      if (auto rel = t.relation(a, b))
        derived.push_back(
            {{"source", a}, {"target", b}, {"kind", to_string(*rel)}});
    }

  if (g.json_out) {
    json out = json::parse(t.to_json_text());
    out["resolved_relations"] = derived;
    std::cout << out.dump(2) << "\n";
    return 0;
  }

  std::cout << "id  group   techniques        name\n";
  for (const auto& [id, f] : t.functionalities()) {
    std::string tech;
    for (const auto& s : f.technique_ids) tech += (tech.empty() ? "" : ",") + s;
    if (tech.empty()) tech = "-";
    std::cout << std::setw(2) << id << "  "
              << (f.group == Group::impact ? "impact" : "action") << "  "
              << std::setw(16) << std::left << tech << std::right << "  "
              << f.name << "\n";
  }
  std::cout << "base relations:\n";
  for (const auto& r : t.base_relations())
    std::cout << "  " << to_string(r.kind) << "(" << r.source_id << ", "
              << r.target_id << ")\n";
  std::cout << "resolved pairs (including derived):\n";
  for (const auto& d : derived)
    std::cout << "  " << d.at("kind").get<std::string>() << "("
              << d.at("source").get<int>() << ", " << d.at("target").get<int>()
              << ")\n";
  return 0;
}

int run_ingest_nvd(const Global& g, const IngestNvdOpts& o) {
  if (g.store.empty()) throw ValidationError("ingest needs --store");
  const auto t0 = std::chrono::steady_clock::now();
  DocumentStore store(g.store);
  FetchOptions fo;
  fo.retries = o.retries;
  fo.backoff_ms = o.backoff_ms;
  const FetchSummary s = fetch_feed(o.feed, store, fo);
  for (const auto& w : s.stats.warnings) log_warn(w);
  log_info("parsed " + std::to_string(s.parsed) + " records, upserted " +
           std::to_string(s.upserted) + ", skipped " +
           std::to_string(s.stats.skipped_language) + " non-English and " +
           std::to_string(s.stats.skipped_missing) + " incomplete");
  if (g.json_out)
    std::cout << json{{"parsed", s.parsed},
                      {"upserted", s.upserted},
                      {"skipped_language", s.stats.skipped_language},
                      {"skipped_missing", s.stats.skipped_missing},
                      {"store_size", store.size()}}
                     .dump(2)
              << "\n";
  else
    std::cout << "store " << g.store << " now holds " << store.size()
              << " documents\n";

  RunManifest m = begin_manifest("ingest-nvd", g);
  m.config = {{"feed", o.feed},
              {"retries", std::to_string(o.retries)},
              {"backoff_ms", std::to_string(o.backoff_ms)}};
  if (o.feed.rfind("http://", 0) != 0) m.add_input(o.feed);
  m.outputs = {(fs::path(store.docs_dir()) / "records.jsonl").string()};
  finish_manifest(m, g, t0, m.outputs.front());
  return 0;
}

int run_ingest_text(const Global& g, const IngestTextOpts& o) {
  if (g.store.empty()) throw ValidationError("ingest needs --store");
  if (o.dir.empty() == o.jsonl.empty())
    throw ValidationError("ingest text needs exactly one of --dir or --jsonl");
  const auto t0 = std::chrono::steady_clock::now();
  const std::string source = o.dir.empty() ? o.jsonl : o.dir;
  DocumentStore store(g.store);
  const TextCorpus corpus = load_text_corpus(source);
  for (const auto& w : corpus.warnings) log_warn(w);
  for (const auto& e : corpus.errors) log_warn(e);
  int upserted = 0;
  for (const auto& [id, text] : corpus.docs) {
    CveRecord rec;
    rec.cve_id = id;
    rec.description = text;
    rec.source = RecordSource::local_file;
    if (store.upsert(rec)) ++upserted;
  }
  log_info("loaded " + std::to_string(corpus.docs.size()) + " documents, " +
           std::to_string(upserted) + " new or changed");
  if (g.json_out)
    std::cout << json{{"documents", corpus.docs.size()},
                      {"upserted", upserted},
                      {"errors", corpus.errors.size()},
                      {"store_size", store.size()}}
                     .dump(2)
              << "\n";
  else
    std::cout << "store " << g.store << " now holds " << store.size()
              << " documents\n";

  RunManifest m = begin_manifest("ingest-text", g);
  m.config = {{"source", source}};
  if (!fs::is_directory(source)) m.add_input(source);
  m.outputs = {(fs::path(store.docs_dir()) / "records.jsonl").string()};
  finish_manifest(m, g, t0, m.outputs.front());
  return 0;
}

int run_extract(const Global& g, const ExtractOpts& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::pair<std::string, std::string>> docs;
  if (!o.input.empty()) {
    const TextCorpus corpus = load_text_corpus(o.input);
    for (const auto& w : corpus.warnings) log_warn(w);
    for (const auto& e : corpus.errors) log_warn(e);
    docs = corpus.docs;
  } else if (!g.store.empty()) {
    DocumentStore store(g.store);
    docs = store.documents();
  } else {
    throw ValidationError("extract needs --input or --store");
  }

  const Taxonomy t = load_taxonomy_opt(o.taxonomy);
  const Lexicon lex = load_lexicon_opt(o.lexicon);
  std::unique_ptr<SrlBackend> backend;
  if (o.backend == "rule")
    backend = make_rule_backend(lex);
  else if (o.backend.rfind("http://", 0) == 0)
    backend = std::make_unique<HttpBackend>(o.backend, lex.all_verbs());
  else
    throw ValidationError("unknown backend: " + o.backend +
                          " (want rule or http://...)");

  ExtractOptions eo;
  eo.write_side_disambiguation = o.write_side;
  eo.jobs = o.jobs;
  if (o.jobs > 1 && !backend->concurrent_safe())
    log_warn("backend " + backend->name() +
             " is not concurrent-safe; running single-threaded");

  const ExtractionResult result = extract_corpus(docs, *backend, lex, t, eo);
  for (const auto& e : result.errors) log_warn(e.doc_id + ": " + e.message);

  std::string out = o.out;
  if (out.empty())
    out = g.store.empty() ? "svos.jsonl"
                          : (fs::path(g.store) / "svos" / "svos.jsonl").string();
  {
    const fs::path p(out);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
  }
  write_svos_jsonl(result.svos, out);

  std::map<int, int> per_class;
  for (const auto& s : result.svos) ++per_class[s.functionality_id];
  if (g.json_out) {
    json pc = json::object();
    for (const auto& [id, n] : per_class) pc[std::to_string(id)] = n;
    std::cout << json{{"documents", docs.size()},
                      {"svos", result.svos.size()},
                      {"errors", result.errors.size()},
                      {"per_class", pc},
                      {"out", out}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << "extracted " << result.svos.size() << " SVOs from "
              << docs.size() << " documents into " << out << "\n";
    for (const auto& [id, n] : per_class)
      std::cout << "  " << std::setw(2) << id << " "
                << t.functionality(id).name << ": " << n << "\n";
    if (!result.errors.empty())
      std::cout << "  " << result.errors.size() << " documents failed\n";
  }

  RunManifest m = begin_manifest("extract", g);
  m.config = {{"backend", o.backend},
              {"jobs", std::to_string(o.jobs)},
              {"write_side", o.write_side ? "true" : "false"},
              {"lexicon", o.lexicon},
              {"taxonomy", o.taxonomy},
              {"input", o.input}};
  if (!o.input.empty() && !fs::is_directory(o.input)) m.add_input(o.input);
  if (!o.lexicon.empty()) m.add_input(o.lexicon);
  if (!o.taxonomy.empty()) m.add_input(o.taxonomy);
  if (!g.store.empty())
    m.add_input((fs::path(g.store) / "docs" / "records.jsonl").string());
  m.outputs = {out};
  finish_manifest(m, g, t0, out);
  return 0;
}

std::map<int, std::vector<std::string>> read_manual_positives(
    const std::string& path) {
  std::map<int, std::vector<std::string>> out;
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw LoadError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("label_id") || !j.contains("text"))
      throw LoadError(path + ":" + std::to_string(lineno) +
                      ": record needs label_id and text");
    out[j.at("label_id").get<int>()].push_back(
        j.at("text").get<std::string>());
  }
  return out;
}

int run_build_dataset(const Global& g, const BuildDatasetOpts& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string svos_path = o.svos;
  if (svos_path.empty()) {
    if (g.store.empty())
      throw ValidationError("build-dataset needs --svos or --store");
    svos_path = (fs::path(g.store) / "svos" / "svos.jsonl").string();
  }
  const std::vector<Svo> svos = read_svos_jsonl(svos_path);

  std::map<std::string, std::string> doc_map;
  if (!o.input.empty()) {
    for (const auto& [id, text] : load_text_corpus(o.input).docs)
      doc_map[id] = text;
  } else if (!g.store.empty()) {
    DocumentStore store(g.store);
    for (const auto& [id, text] : store.documents()) doc_map[id] = text;
  }

  PairingConfig cfg;
  cfg.tau1 = o.tau1;
  cfg.tau2 = o.tau2;
  cfg.tau3 = o.tau3;
  cfg.seed = g.seed;
  cfg.train_fraction = o.train_fraction;

  std::vector<std::string> coverage, errors, warnings;
  std::vector<LabeledPair> pairs = build_stage1(svos, cfg, &coverage);
  const std::size_t n1 = pairs.size();
  std::size_t n2 = 0;
  if (!o.manual.empty()) {
    const auto manual = read_manual_positives(o.manual);
    auto stage2 = build_stage2(svos, manual, cfg, &coverage);
    n2 = stage2.size();
    pairs.insert(pairs.end(), std::make_move_iterator(stage2.begin()),
                 std::make_move_iterator(stage2.end()));
  }
  std::size_t n3 = 0;
  if (!doc_map.empty()) {
    auto stage3 = build_stage3(svos, doc_map, cfg, &coverage, &errors);
    n3 = stage3.size();
    pairs.insert(pairs.end(), std::make_move_iterator(stage3.begin()),
                 std::make_move_iterator(stage3.end()));
  }
  for (const auto& c : coverage) log_warn(c);
  for (const auto& e : errors) log_warn(e);

  const DatasetSplit splits = split(pairs, cfg, &warnings);
  for (const auto& w : warnings) log_warn(w);

  std::string out_dir = o.out_dir;
  if (out_dir.empty())
    out_dir = g.store.empty()
                  ? "dataset"
                  : (fs::path(g.store) / "datasets" / "default").string();
  fs::create_directories(out_dir);
  const Taxonomy t = load_taxonomy_opt(o.taxonomy);
  const std::string train_path = (fs::path(out_dir) / "train.jsonl").string();
  const std::string ts1_path = (fs::path(out_dir) / "ts1.jsonl").string();
  write_pairs_jsonl(splits.train, train_path, &t);
  write_pairs_jsonl(splits.ts1, ts1_path, &t);
  std::string ts2_path;
  if (!o.ts2.empty()) {
    const auto ts2 = read_pairs_jsonl(o.ts2);
    ts2_path = (fs::path(out_dir) / "ts2.jsonl").string();
    write_pairs_jsonl(ts2, ts2_path, &t);
  }

  if (g.json_out)
    std::cout << json{{"stage1", n1},
                      {"stage2", n2},
                      {"stage3", n3},
                      {"train", splits.train.size()},
                      {"ts1", splits.ts1.size()},
                      {"out_dir", out_dir}}
                     .dump(2)
              << "\n";
  else
    std::cout << "pairs: stage1 " << n1 << ", stage2 " << n2 << ", stage3 "
              << n3 << " -> train " << splits.train.size() << ", ts1 "
              << splits.ts1.size() << " in " << out_dir << "\n";

  RunManifest m = begin_manifest("build-dataset", g);
  m.config = {{"svos", svos_path},
              {"manual", o.manual},
              {"ts2", o.ts2},
              {"tau1", std::to_string(o.tau1)},
              {"tau2", std::to_string(o.tau2)},
              {"tau3", std::to_string(o.tau3)},
              {"train_fraction", std::to_string(o.train_fraction)}};
  m.add_input(svos_path);
  if (!o.manual.empty()) m.add_input(o.manual);
  if (!o.ts2.empty()) m.add_input(o.ts2);
  m.outputs = {train_path, ts1_path};
  if (!ts2_path.empty()) m.outputs.push_back(ts2_path);
  finish_manifest(m, g, t0, train_path);
  return 0;
}

int run_train(const Global& g, const TrainOpts& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Taxonomy t = load_taxonomy_opt(o.taxonomy);
  ModelConfig cfg = model_config_from_file(o.config);
  if (g.seed_given) cfg.seed = g.seed;

  DatasetSplit ds;
  const fs::path data(o.data);
  ds.train = read_pairs_jsonl((data / "train.jsonl").string());
  if (fs::exists(data / "ts1.jsonl"))
    ds.ts1 = read_pairs_jsonl((data / "ts1.jsonl").string());
  if (fs::exists(data / "ts2.jsonl"))
    ds.ts2 = read_pairs_jsonl((data / "ts2.jsonl").string());

  std::string out = o.out;
  if (out.empty())
    out = g.store.empty()
              ? "artifact"
              : (fs::path(g.store) / "artifacts" / "default").string();

  log_info("training on " + std::to_string(ds.train.size()) + " pairs (" +
           std::to_string(ds.ts1.size()) + " held out)");
  const Model model = Model::train(ds, cfg, t);
  model.save(out);

  const TrainLog& log = model.train_log();
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
    std::ostringstream ss;
    ss << "epoch " << (e + 1) << " loss " << std::setprecision(6)
       << log.epoch_loss[e];
    if (e < log.ts1_metrics.size())
      ss << "  ts1 accuracy " << std::setprecision(4)
         << log.ts1_metrics[e].accuracy;
    std::cout << ss.str() << "\n";
  }
  if (!log.ts1_metrics.empty()) print_metrics(log.ts1_metrics.back(), t);
  std::cout << "artifact saved to " << out << "\n";

  RunManifest m = begin_manifest("train", g);
  m.config = {{"data", o.data},
              {"config", o.config},
              {"loss", to_string(model.config().loss)},
              {"epochs", std::to_string(model.config().epochs)},
              {"learning_rate", std::to_string(model.config().learning_rate)}};
  m.add_input((data / "train.jsonl").string());
  if (fs::exists(data / "ts1.jsonl")) m.add_input((data / "ts1.jsonl").string());
  if (!o.config.empty()) m.add_input(o.config);
  for (const char* f :
       {"config.json", "weights.bin", "tokenizer.json", "taxonomy.hash",
        "metrics.json"})
    m.outputs.push_back((fs::path(out) / f).string());
  finish_manifest(m, g, t0, (fs::path(out) / "config.json").string());
  return 0;
}

int run_evaluate(const Global& g, const EvaluateOpts& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Taxonomy t = load_taxonomy_opt(o.taxonomy);
  const Model model = Model::load(o.artifact, t);

  std::string pairs_path = o.pairs;
  if (pairs_path.empty()) {
    if (o.data.empty())
      throw ValidationError("evaluate needs --pairs or --data");
    pairs_path = (fs::path(o.data) / (o.split + ".jsonl")).string();
  }
  const std::vector<LabeledPair> pairs = read_pairs_jsonl(pairs_path);
  if (pairs.empty()) throw ValidationError(pairs_path + " holds no pairs");

  std::vector<Prediction> preds;
  std::vector<int> golds;
  preds.reserve(pairs.size());
  for (const auto& p : pairs) {
    preds.push_back(model.predict(p.content, p.context));
    golds.push_back(p.label_id);
  }
  const MetricReport report = compute_metrics(preds, golds);
  const ConfusionMatrix cm = confusion_matrix(preds, golds);
  const DependencyConfusionSummary dep = dependency_confusion(cm, t);

  const json dep_json = {
      {"total", dep.total},
      {"off_diagonal", dep.off_diagonal},
      {"related_off_diagonal", dep.related_off_diagonal},
      {"unrelated_off_diagonal", dep.unrelated_off_diagonal},
      {"related_fraction", dep.related_fraction},
      {"unrelated_fraction", dep.unrelated_fraction}};
  if (g.json_out) {
    std::cout << json{{"metrics", metrics_to_json(report)},
                      {"confusion", confusion_to_json(cm)},
                      {"dependency", dep_json}}
                     .dump(2)
              << "\n";
  } else {
    print_metrics(report, t);
    if (o.confusion) print_confusion(cm);
    std::cout << "off-diagonal errors between taxonomy-related classes: "
              << dep.related_off_diagonal << "/" << dep.off_diagonal << "\n";
  }

  std::string out = o.out;
  if (out.empty())
    out = (fs::path(o.artifact) / ("eval-" + o.split + ".json")).string();
  write_json_file(out, {{"pairs", pairs_path},
                        {"metrics", metrics_to_json(report)},
                        {"confusion", confusion_to_json(cm)},
                        {"dependency", dep_json}});
  log_info("report written to " + out);

  RunManifest m = begin_manifest("evaluate", g);
  m.config = {{"artifact", o.artifact},
              {"pairs", pairs_path},
              {"split", o.split}};
  m.add_input(pairs_path);
  m.add_input((fs::path(o.artifact) / "weights.bin").string());
  m.outputs = {out};
  finish_manifest(m, g, t0, out);
  return 0;
}

int run_predict(const Global& g, const PredictOpts& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Taxonomy t = load_taxonomy_opt(o.taxonomy);
  const Model model = Model::load(o.artifact, t);
  std::string context = read_file(o.context_file);
  while (!context.empty() && (context.back() == '\n' || context.back() == '\r'))
    context.pop_back();

  const Prediction pred = model.predict(o.content, context);
  const int k = o.top_k > 0 ? std::min(o.top_k, kNumClasses) : 1;
  json ranked = json::array();
  for (int i = 0; i < k; ++i) {
    const int id = pred.ranked_ids[i];
    ranked.push_back({{"functionality_id", id},
                      {"name", t.functionality(id).name},
                      {"score", pred.scores[id - 1]},
                      {"techniques", t.techniques_for(id)}});
  }
  const json result = {{"argmax_id", pred.argmax_id},
                       {"argmax_name", t.functionality(pred.argmax_id).name},
                       {"techniques", pred.techniques},
                       {"ranked", ranked},
                       {"content", o.content},
                       {"context_file", o.context_file}};
  if (g.json_out) {
    std::cout << result.dump(2) << "\n";
  } else {
    std::cout << std::fixed << std::setprecision(4);
    for (int i = 0; i < k; ++i) {
      const int id = pred.ranked_ids[i];
      std::string tech;
      for (const auto& s : t.techniques_for(id))
        tech += (tech.empty() ? "" : ",") + s;
      std::cout << (i + 1) << ". [" << id << "] " << t.functionality(id).name
                << "  score " << pred.scores[id - 1]
                << (tech.empty() ? "" : "  -> " + tech) << "\n";
    }
    std::cout.unsetf(std::ios::fixed);
  }

  std::string out = o.out;
  if (out.empty() && !g.store.empty())
    out = (fs::path(g.store) / "predictions" / "prediction.json").string();
  if (!out.empty()) {
    write_json_file(out, result);
    log_info("prediction written to " + out);
    RunManifest m = begin_manifest("predict", g);
    m.config = {{"artifact", o.artifact},
                {"context_file", o.context_file},
                {"top_k", std::to_string(o.top_k)}};
    m.add_input(o.context_file);
    m.add_input((fs::path(o.artifact) / "weights.bin").string());
    m.outputs = {out};
    finish_manifest(m, g, t0, out);
  }
  return 0;
}

int run_topk_eval(const Global& g, const TopkEvalOpts& o) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<double>> scores;
  std::vector<std::set<int>> golds;
  std::ifstream in(o.input);
  if (!in) throw LoadError("cannot open " + o.input);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw LoadError(o.input + ":" + std::to_string(lineno) + ": " +
                      e.what());
    }
    if (!j.contains("scores") || !j.contains("gold"))
      throw LoadError(o.input + ":" + std::to_string(lineno) +
                      ": record needs scores and gold");
    scores.push_back(j.at("scores").get<std::vector<double>>());
    const auto ids = j.at("gold").get<std::vector<int>>();
    golds.emplace_back(ids.begin(), ids.end());
  }

  const TopKReport report = topk_protocol(scores, golds);
  json cumulative = json::object();
  for (const auto& [extra, rate] : report.cumulative_rates)
    cumulative[std::to_string(extra)] = rate;
  const json out_json = {{"items", report.per_item.size()},
                         {"hit_rate_exact", report.hit_rate_exact},
                         {"cumulative_rates", cumulative},
                         {"hit_rate_at_5", report.hit_rate_at_5}};
  if (g.json_out) {
    std::cout << out_json.dump(2) << "\n";
  } else {
    std::cout << std::fixed << std::setprecision(4);
    std::cout << report.per_item.size() << " items\n";
    std::cout << "hit rate (exact top-m): " << report.hit_rate_exact << "\n";
    for (const auto& [extra, rate] : report.cumulative_rates)
      std::cout << "covered within m+" << extra << ": " << rate << "\n";
    std::cout << "covered within top 5: " << report.hit_rate_at_5 << "\n";
    std::cout.unsetf(std::ios::fixed);
  }

  std::string out = o.out.empty() ? o.input + ".report.json" : o.out;
  write_json_file(out, out_json);
  RunManifest m = begin_manifest("topk-eval", g);
  m.config = {{"input", o.input}};
  m.add_input(o.input);
  m.outputs = {out};
  finish_manifest(m, g, t0, out);
  return 0;
}

int run_baseline(const Global& g, const BaselineOpts& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<BaselineItem> items = read_baseline_items_jsonl(o.items);
  std::unique_ptr<LlmClient> client;
  if (o.record) {
    if (o.endpoint.empty())
      throw ValidationError("--record needs --endpoint");
    client = std::make_unique<RecordingClient>(
        make_http_llm_client(o.endpoint, o.model, o.credential_env,
                             o.pause_ms),
        o.transcript);
  } else {
    client = std::make_unique<ReplayClient>(o.transcript);
  }

  const auto [records, summary] = llm_baseline_eval(*client, items, o.lenient);

  json rows = json::array();
  for (const auto& r : records)
    rows.push_back({{"cve_id", r.cve_id},
                    {"predicted", r.predicted_technique},
                    {"gold", r.gold_techniques},
                    {"correct", r.correct},
                    {"unparsed", r.unparsed},
                    {"error", r.error}});
  const json out_json = {{"client", client->name()},
                         {"lenient", o.lenient},
                         {"records", rows},
                         {"summary",
                          {{"total", summary.total},
                           {"correct", summary.correct},
                           {"unparsed", summary.unparsed},
                           {"errored", summary.errored},
                           {"accuracy", summary.accuracy}}}};
  if (g.json_out) {
    std::cout << out_json.dump(2) << "\n";
  } else {
    for (const auto& r : records) {
      std::string gold;
      for (const auto& s : r.gold_techniques)
        gold += (gold.empty() ? "" : ",") + s;
      std::cout << (r.correct ? "  ok   " : (r.error.empty() ? "  miss " : "  err  "))
                << r.cve_id << "  predicted "
                << (r.predicted_technique.empty() ? "-" : r.predicted_technique)
                << "  gold " << gold << "\n";
    }
    std::cout << summary.correct << "/" << summary.total << " correct ("
              << std::fixed << std::setprecision(1)
              << summary.accuracy * 100.0 << "%), " << summary.unparsed
              << " unparsed, " << summary.errored << " transport errors\n";
    std::cout.unsetf(std::ios::fixed);
  }

  std::string out = o.out.empty() ? o.items + ".baseline.json" : o.out;
  write_json_file(out, out_json);
  RunManifest m = begin_manifest("baseline", g);
  m.config = {{"items", o.items},
              {"transcript", o.transcript},
              {"lenient", o.lenient ? "true" : "false"},
              {"record", o.record ? "true" : "false"}};
  m.add_input(o.items);
  m.add_input(o.transcript);
  m.outputs = {out};
  finish_manifest(m, g, t0, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "cvemap: extract threat actions from CVE/CTI text, map them to "
      "functionality classes and ATT&CK techniques"};
  app.require_subcommand(1);

  Global g;
  app.add_option("--store", g.store, "Document store root directory");
  auto* seed_opt =
      app.add_option("--seed", g.seed, "Seed for all stochastic steps");
  app.add_flag("--json", g.json_out, "Machine-readable JSON output");
  app.add_option("--log-level", g.log_level,
                 "Log verbosity: error, warn, info, debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  TaxonomyOpts taxo;
  auto* cmd_taxonomy =
      app.add_subcommand("taxonomy", "Show or validate the class taxonomy");
  cmd_taxonomy->add_option("--file", taxo.file,
                           "Taxonomy JSON (default: built-in)");

  auto* cmd_ingest =
      app.add_subcommand("ingest", "Load documents into the store");
  cmd_ingest->require_subcommand(1);
  IngestNvdOpts nvd;
  auto* cmd_nvd = cmd_ingest->add_subcommand("nvd", "Ingest an NVD JSON feed");
  cmd_nvd->add_option("--feed", nvd.feed, "Feed url (http://) or file path")
      ->required();
  cmd_nvd->add_option("--retries", nvd.retries, "Fetch retries");
  cmd_nvd->add_option("--backoff-ms", nvd.backoff_ms,
                      "Initial retry backoff in milliseconds");
  IngestTextOpts text;
  auto* cmd_text =
      cmd_ingest->add_subcommand("text", "Ingest free-form report text");
  cmd_text->add_option("--dir", text.dir, "Directory of text files");
  cmd_text->add_option("--jsonl", text.jsonl,
                       "JSONL file with {doc_id, text} records");

  ExtractOpts ex;
  auto* cmd_extract =
      app.add_subcommand("extract", "Extract SVO threat actions");
  cmd_extract->add_option("--input", ex.input,
                          "Text directory or JSONL (default: store docs)");
  cmd_extract->add_option("--out", ex.out, "Output SVO JSONL path");
  cmd_extract->add_option("--lexicon", ex.lexicon,
                          "Lexicon JSON (default: built-in)");
  cmd_extract->add_option("--taxonomy", ex.taxonomy,
                          "Taxonomy JSON (default: built-in)");
  cmd_extract->add_option("--backend", ex.backend,
                          "SRL backend: rule or http://host:port/path");
  cmd_extract->add_option("--jobs", ex.jobs, "Parallel extraction workers");
  cmd_extract->add_flag("--write-side", ex.write_side,
                        "Also disambiguate write-side memory conflicts");

  BuildDatasetOpts bd;
  auto* cmd_build = app.add_subcommand(
      "build-dataset", "Pair SVOs into a weakly labeled dataset");
  cmd_build->add_option("--svos", bd.svos, "SVO JSONL (default: store svos)");
  cmd_build->add_option("--manual", bd.manual,
                        "Manual positives JSONL {label_id, text}");
  cmd_build->add_option("--ts2", bd.ts2,
                        "Externally labeled pairs JSONL copied to ts2");
  cmd_build->add_option("--input", bd.input,
                        "Context documents (default: store docs)");
  cmd_build->add_option("--out-dir", bd.out_dir, "Dataset output directory");
  cmd_build->add_option("--taxonomy", bd.taxonomy,
                        "Taxonomy JSON (default: built-in)");
  cmd_build->add_option("--tau1", bd.tau1, "Stage-1 per-class pair cap");
  cmd_build->add_option("--tau2", bd.tau2, "Stage-2 per-class pair cap");
  cmd_build->add_option("--tau3", bd.tau3, "Stage-3 per-class pair cap");
  cmd_build->add_option("--train-fraction", bd.train_fraction,
                        "Training share of the stratified split");

  TrainOpts tr;
  auto* cmd_train = app.add_subcommand("train", "Train the classifier");
  cmd_train->add_option("--data", tr.data, "Dataset directory")->required();
  cmd_train->add_option("--config", tr.config, "Model config JSON");
  cmd_train->add_option("--taxonomy", tr.taxonomy,
                        "Taxonomy JSON (default: built-in)");
  cmd_train->add_option("--out", tr.out, "Artifact output directory");

  EvaluateOpts ev;
  auto* cmd_eval =
      app.add_subcommand("evaluate", "Score an artifact on labeled pairs");
  cmd_eval->add_option("--artifact", ev.artifact, "Artifact directory")
      ->required();
  cmd_eval->add_option("--data", ev.data, "Dataset directory");
  cmd_eval->add_option("--pairs", ev.pairs, "Explicit pairs JSONL");
  cmd_eval->add_option("--split", ev.split, "Split name: train, ts1, ts2");
  cmd_eval->add_option("--taxonomy", ev.taxonomy,
                       "Taxonomy JSON (default: built-in)");
  cmd_eval->add_option("--out", ev.out, "Report JSON path");
  cmd_eval->add_flag("--confusion", ev.confusion,
                     "Print the confusion matrix");

  PredictOpts pr;
  auto* cmd_predict =
      app.add_subcommand("predict", "Classify one document or action");
  cmd_predict->add_option("--artifact", pr.artifact, "Artifact directory")
      ->required();
  cmd_predict->add_option("--context-file", pr.context_file,
                          "File with the document text")
      ->required();
  cmd_predict->add_option("--content", pr.content,
                          "Optional threat-action text (first input)");
  cmd_predict->add_option("--taxonomy", pr.taxonomy,
                          "Taxonomy JSON (default: built-in)");
  cmd_predict->add_option("--top-k", pr.top_k, "Show the k best classes");
  cmd_predict->add_option("--out", pr.out, "Write the prediction JSON here");

  TopkEvalOpts tk;
  auto* cmd_topk = app.add_subcommand(
      "topk-eval", "Run the multi-label window protocol on scored items");
  cmd_topk->add_option("--input", tk.input, "JSONL with {scores, gold}")
      ->required();
  cmd_topk->add_option("--out", tk.out, "Report JSON path");

  BaselineOpts bl;
  auto* cmd_baseline = app.add_subcommand(
      "baseline", "Score an external LLM on technique prediction");
  cmd_baseline->add_option("--items", bl.items, "Items JSONL")->required();
  cmd_baseline
      ->add_option("--transcript", bl.transcript,
                   "Transcript JSONL (replayed, or appended with --record)")
      ->required();
  cmd_baseline->add_flag("--record", bl.record,
                         "Query a live endpoint and record the transcript");
  cmd_baseline->add_option("--endpoint", bl.endpoint,
                           "Chat-completion endpoint (http://...)");
  cmd_baseline->add_option("--model", bl.model, "Model name for the request");
  cmd_baseline->add_option("--credential-env", bl.credential_env,
                           "Environment variable holding the API key");
  cmd_baseline->add_option("--pause-ms", bl.pause_ms,
                           "Pause between live requests");
  cmd_baseline->add_flag("--lenient", bl.lenient,
                         "Accept dotted-prefix parent/child technique matches");
  cmd_baseline->add_option("--out", bl.out, "Report path (.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  g.seed_given = seed_opt->count() > 0;
  if (g.log_level == "error") g_log_level = 0;
  else if (g.log_level == "warn") g_log_level = 1;
  else if (g.log_level == "info") g_log_level = 2;
  else g_log_level = 3;

  try {
    if (app.got_subcommand(cmd_taxonomy)) return run_taxonomy(g, taxo);
    if (app.got_subcommand(cmd_ingest)) {
      if (cmd_ingest->got_subcommand(cmd_nvd)) return run_ingest_nvd(g, nvd);
      return run_ingest_text(g, text);
    }
    if (app.got_subcommand(cmd_extract)) return run_extract(g, ex);
    if (app.got_subcommand(cmd_build)) return run_build_dataset(g, bd);
    if (app.got_subcommand(cmd_train)) return run_train(g, tr);
    if (app.got_subcommand(cmd_eval)) return run_evaluate(g, ev);
    if (app.got_subcommand(cmd_predict)) return run_predict(g, pr);
    if (app.got_subcommand(cmd_topk)) return run_topk_eval(g, tk);
    if (app.got_subcommand(cmd_baseline)) return run_baseline(g, bl);
  } catch (const std::exception& e) {
    log_error(e.what());
    return 1;
  }
  return 0;
}
