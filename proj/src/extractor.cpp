#include "cvemap/extractor.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>
#include <tuple>

#include "cvemap/errors.hpp"
#include "json.hpp"

namespace cvemap {

using nlohmann::json;

namespace {

std::optional<std::string> first_matching_term(
    const std::string& span, const std::set<std::string>& terms) {
  if (span.empty() || terms.empty()) return std::nullopt;
  const auto toks = tokenize(span);
  for (const auto& term : terms)
    if (contains_term(toks, term)) return term;
  return std::nullopt;
}

bool any_term(const std::vector<Token>& toks,
              const std::set<std::string>& terms) {
  for (const auto& term : terms)
    if (contains_term(toks, term)) return true;
  return false;
}

const ClassLexicon& class_lex(const Lexicon& lex, int f) {
  auto it = lex.per_class.find(f);
  if (it == lex.per_class.end())
    throw ValidationError("lexicon has no entry for class " +
                          std::to_string(f));
  return it->second;
}

struct SvoKey {
  int sentence_index;
  std::string subject, verb, object;
  bool operator<(const SvoKey& o) const {
    return std::tie(sentence_index, subject, verb, object) <
           std::tie(o.sentence_index, o.subject, o.verb, o.object);
  }
};

SvoKey key_of(const Svo& s) {
  return {s.sentence_ref.sentence_index, s.subject, s.verb, s.object};
}

// Collapses an SVO emitted under both `controlled` and `impact` into one
// record whose class the document decides.
void resolve_conflict_pair(std::vector<Svo>& svos, std::vector<bool>& drop,
                           const std::vector<Token>& doc_toks,
                           const Lexicon& lex, int controlled, int impact) {
  const auto impact_it = lex.per_class.find(impact);
  const bool doc_causal =
      impact_it != lex.per_class.end() &&
      any_term(doc_toks, impact_it->second.causal_objects);
  const int resolved = doc_causal ? impact : controlled;

  std::map<SvoKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < svos.size(); ++i)
    if (!svos[i].causal && (svos[i].functionality_id == controlled ||
                            svos[i].functionality_id == impact))
      groups[key_of(svos[i])].push_back(i);

  for (const auto& [key, idxs] : groups) {
    bool has_controlled = false, has_impact = false;
    for (auto i : idxs) {
      if (svos[i].functionality_id == controlled) has_controlled = true;
      if (svos[i].functionality_id == impact) has_impact = true;
    }
    if (!has_controlled || !has_impact) continue;
    for (auto i : idxs)
      if (svos[i].functionality_id != resolved) drop[i] = true;
  }
}

}  // namespace

std::string Svo::text() const {
  std::string out = subject;
  if (!out.empty() && !verb_surface.empty()) out += ' ';
  out += verb_surface;
  if (!object.empty()) {
    if (!out.empty()) out += ' ';
    out += object;
  }
  return out;
}

std::vector<std::string> Lexicon::all_verbs() const {
  std::set<std::string> verbs(causal_verbs);
  for (const auto& [id, cl] : per_class)
    verbs.insert(cl.verbs.begin(), cl.verbs.end());
  return {verbs.begin(), verbs.end()};
}

void Lexicon::validate(const Taxonomy& t) const {
  for (const auto& [id, cl] : per_class) {
    (void)cl;
    if (!t.functionalities().count(id))
      throw ValidationError("lexicon class " + std::to_string(id) +
                            " is not in the taxonomy");
  }
}

std::vector<Svo> match_action_svos(const std::vector<SrlFrame>& frames,
                                   const Lexicon& lex, int f) {
  const ClassLexicon& cl = class_lex(lex, f);
  std::vector<Svo> out;
  for (const auto& frame : frames) {
    if (!cl.verbs.count(frame.verb_lemma)) continue;
    const std::string* arg0 = frame.arg("ARG0");
    const std::string* arg1 = frame.arg("ARG1");
    if (!arg0 || !arg1) continue;
    auto subj = first_matching_term(*arg0, lex.subjects);
    if (!subj) continue;
    auto obj = first_matching_term(*arg1, cl.objects);
    if (!obj) continue;
    Svo s;
    s.subject = *arg0;
    s.verb = frame.verb_lemma;
    s.verb_surface = frame.verb;
    s.object = *arg1;
    s.functionality_id = f;
    s.causal = false;
    s.sentence_ref = {frame.doc_id, frame.sentence_index};
    s.subject_term = *subj;
    s.verb_term = frame.verb_lemma;
    s.object_term = *obj;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Svo> match_causal_svos(const std::vector<SrlFrame>& frames,
                                   const Lexicon& lex, int f) {
  const ClassLexicon& cl = class_lex(lex, f);
  std::vector<Svo> out;
  for (const auto& frame : frames) {
    if (!lex.causal_verbs.count(frame.verb_lemma)) continue;
    const std::string* arg1 = frame.arg("ARG1");
    if (!arg1) continue;
    auto obj = first_matching_term(*arg1, cl.causal_objects);
    if (!obj) continue;

    const std::string* arg0 = frame.arg("ARG0");
    std::string subject;
    std::optional<std::string> subj =
        arg0 ? first_matching_term(*arg0, lex.subjects) : std::nullopt;
    if (subj) {
      subject = *arg0;
    } else {
      // Fault-clause subject: borrow the actor from a sibling frame.
      for (const auto& other : frames) {
        const std::string* oa = other.arg("ARG0");
        if (!oa) continue;
        if (auto m = first_matching_term(*oa, lex.subjects)) {
          subj = m;
          subject = *oa;
          break;
        }
      }
      if (!subj) continue;
    }

    Svo s;
    s.subject = subject;
    s.verb = frame.verb_lemma;
    s.verb_surface = frame.verb;
    s.object = *arg1;
    s.functionality_id = f;
    s.causal = true;
    s.sentence_ref = {frame.doc_id, frame.sentence_index};
    s.subject_term = *subj;
    s.verb_term = frame.verb_lemma;
    s.object_term = *obj;
    out.push_back(std::move(s));
  }
  return out;
}

int disambiguate_memory_read(const Svo& svo, const std::string& doc_text,
                             const Lexicon& lex) {
  (void)svo;
  const auto it = lex.per_class.find(14);
  if (it != lex.per_class.end() &&
      any_term(tokenize(doc_text), it->second.causal_objects))
    return 14;
  return 12;
}

std::unique_ptr<SrlBackend> make_rule_backend(const Lexicon& lex) {
  return std::make_unique<RuleBasedBackend>(lex.all_verbs());
}

namespace {

struct DocResult {
  std::vector<Svo> svos;
  std::vector<ExtractionError> errors;
};

DocResult extract_one_doc(const std::string& doc_id, const std::string& text,
                          SrlBackend& backend, const Lexicon& lex,
                          const ExtractOptions& opts) {
  DocResult out;
  try {
    const auto sentences = split_sentences(text, doc_id);
    const auto doc_toks = tokenize(text);
    std::vector<Svo> doc_svos;

    for (const auto& sentence : sentences) {
      const auto frames = backend.parse_sentence(sentence);
      std::vector<Svo> sent_svos;
      for (const auto& [f, cl] : lex.per_class) {
        (void)cl;
        for (auto& s : match_action_svos(frames, lex, f))
          sent_svos.push_back(std::move(s));
        for (auto& s : match_causal_svos(frames, lex, f))
          sent_svos.push_back(std::move(s));
      }

      std::vector<bool> drop(sent_svos.size(), false);
      resolve_conflict_pair(sent_svos, drop, doc_toks, lex, 12, 14);
      if (opts.write_side_disambiguation)
        resolve_conflict_pair(sent_svos, drop, doc_toks, lex, 16, 6);

      // A causal SVO restating an action already captured non-causally in
      // the same sentence adds no new record.
      for (std::size_t i = 0; i < sent_svos.size(); ++i) {
        if (!sent_svos[i].causal || drop[i]) continue;
        for (std::size_t k = 0; k < sent_svos.size(); ++k) {
          if (k == i || drop[k] || sent_svos[k].causal) continue;
          if (sent_svos[k].functionality_id ==
              sent_svos[i].functionality_id) {
            drop[i] = true;
            break;
          }
        }
      }

      for (std::size_t i = 0; i < sent_svos.size(); ++i)
        if (!drop[i]) doc_svos.push_back(std::move(sent_svos[i]));
    }

    for (auto& s : doc_svos) {
      const auto it = lex.per_class.find(s.functionality_id);
      s.context_causal = it != lex.per_class.end() &&
                         !it->second.causal_objects.empty() &&
                         any_term(doc_toks, it->second.causal_objects);
      out.svos.push_back(std::move(s));
    }
  } catch (const std::exception& e) {
    out.errors.push_back({doc_id, e.what()});
  }
  return out;
}

}  // namespace

ExtractionResult extract_corpus(
    const std::vector<std::pair<std::string, std::string>>& docs,
    SrlBackend& backend, const Lexicon& lex, const Taxonomy& t,
    const ExtractOptions& opts) {
  lex.validate(t);

  const int jobs =
      backend.concurrent_safe() ? std::max(1, opts.jobs) : 1;
  std::vector<DocResult> per_doc(docs.size());

  if (jobs <= 1 || docs.size() < 2) {
    for (std::size_t i = 0; i < docs.size(); ++i)
      per_doc[i] = extract_one_doc(docs[i].first, docs[i].second, backend, lex,
                                   opts);
  } else {
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= docs.size()) return;
        per_doc[i] = extract_one_doc(docs[i].first, docs[i].second, backend,
                                     lex, opts);
      }
    };
    std::vector<std::thread> pool;
    const int n = std::min<int>(jobs, static_cast<int>(docs.size()));
    pool.reserve(n);
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExtractionResult result;
  for (auto& dr : per_doc) {
    for (auto& s : dr.svos) result.svos.push_back(std::move(s));
    for (auto& e : dr.errors) result.errors.push_back(std::move(e));
  }
  return result;
}

namespace {

json svo_to_json(const Svo& s) {
  json j;
  j["subject"] = s.subject;
  j["verb"] = s.verb;
  j["verb_surface"] = s.verb_surface;
  j["object"] = s.object;
  j["functionality_id"] = s.functionality_id;
  j["causal"] = s.causal;
  j["doc_id"] = s.sentence_ref.doc_id;
  j["sentence_index"] = s.sentence_ref.sentence_index;
  j["matched_terms"] = {{"subject", s.subject_term},
                        {"verb", s.verb_term},
                        {"object", s.object_term}};
  j["context_causal"] = s.context_causal;
  return j;
}

Svo svo_from_json(const json& j) {
  Svo s;
  s.subject = j.at("subject").get<std::string>();
  s.verb = j.at("verb").get<std::string>();
  s.verb_surface = j.value("verb_surface", s.verb);
  s.object = j.at("object").get<std::string>();
  s.functionality_id = j.at("functionality_id").get<int>();
  s.causal = j.value("causal", false);
  s.sentence_ref.doc_id = j.value("doc_id", "");
  s.sentence_ref.sentence_index = j.value("sentence_index", 0);
  if (j.contains("matched_terms")) {
    const auto& m = j.at("matched_terms");
    s.subject_term = m.value("subject", "");
    s.verb_term = m.value("verb", "");
    s.object_term = m.value("object", "");
  }
  s.context_causal = j.value("context_causal", false);
  return s;
}

}  // namespace

void write_svos_jsonl(const std::vector<Svo>& svos, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open for writing: " + path);
  for (const auto& s : svos) out << svo_to_json(s).dump() << '\n';
}

std::vector<Svo> read_svos_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open: " + path);
  std::vector<Svo> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(svo_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw LoadError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

Lexicon Lexicon::built_in_default() {
  Lexicon lex;
  lex.subjects = {"attacker", "adversary", "hacker", "unauthorized user",
                  "unauthenticated user"};
  lex.causal_verbs = {"cause", "lead", "result"};

  auto& c = lex.per_class;
  c[1] = {{"create", "add"}, {"account", "user account", "role"}, {}};
  c[2] = {{"create", "upload"}, {"file", "attachment"}, {}};
  c[3] = {{"delete", "remove", "erase", "clear"},
          {"file", "folder", "directory", "log"},
          {}};
  c[4] = {{"disable", "bypass", "deactivate", "compromise"},
          {"protection", "protection mechanism", "firewall", "antivirus",
           "security feature", "authentication", "defense"},
          {}};
  c[5] = {{"install", "place", "deliver"},
          {"application", "app", "extension", "dll", "software", "package"},
          {}};
  c[6] = {{"write", "modify", "corrupt", "overwrite"},
          {"memory", "kernel memory", "memory location", "memory address",
           "buffer"},
          {"buffer overflow", "heap overflow", "stack overflow",
           "memory corruption", "out-of-bounds write", "out-of-bound write"}};
  c[7] = {{"reset", "change"}, {"password"}, {}};
  c[8] = {{"change", "modify", "set"}, {"permission", "ownership", "owner"}, {}};
  c[9] = {{"modify", "change", "alter", "edit"},
          {"configuration", "setting", "config"},
          {}};
  c[10] = {{"obtain", "access", "retrieve", "disclose", "gain"},
           {"sensitive information", "sensitive data", "personal information",
            "confidential information"},
           {}};
  c[11] = {{"obtain", "access", "retrieve", "steal", "gain"},
           {"credential", "password", "hash", "token", "secret"},
           {}};
  c[12] = {{"read", "access"},
           {"memory", "kernel memory", "memory location", "memory address",
            "buffer"},
           {}};
  c[13] = {{"read", "view", "open", "access"},
           {"file", "folder", "directory", "document"},
           {}};
  c[14] = {{"read", "access"},
           {"memory", "kernel memory", "memory location", "memory address",
            "buffer"},
           {"denial of service", "buffer over-read", "buffer overread",
            "out-of-bounds read", "out-of-bound read", "segmentation fault",
            "memory crash"}};
  c[15] = {{"restart", "reboot"},
           {"system", "device", "server", "service", "machine"},
           {"crash", "reboot", "restart", "shutdown", "system hang"}};
  c[16] = {{"write", "overwrite", "append"},
           {"file", "configuration file", "existing file"},
           {}};
  return lex;
}

Lexicon Lexicon::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw LoadError(std::string("lexicon parse failure: ") + e.what());
  }
  Lexicon lex;
  for (const auto& s : j.value("subjects", json::array()))
    lex.subjects.insert(s.get<std::string>());
  for (const auto& v : j.value("causal_verbs", json::array()))
    lex.causal_verbs.insert(v.get<std::string>());
  if (lex.subjects.empty())
    throw LoadError("lexicon must define at least one subject");
  if (!j.contains("classes") || !j.at("classes").is_object())
    throw LoadError("lexicon must contain a 'classes' object");
  for (const auto& [key, jc] : j.at("classes").items()) {
    int id = 0;
    try {
      id = std::stoi(key);
    } catch (...) {
      throw LoadError("lexicon class key is not an integer: " + key);
    }
    ClassLexicon cl;
    for (const auto& v : jc.value("verbs", json::array()))
      cl.verbs.insert(to_lower(v.get<std::string>()));
    for (const auto& o : jc.value("objects", json::array()))
      cl.objects.insert(to_lower(o.get<std::string>()));
    for (const auto& o : jc.value("causal_objects", json::array()))
      cl.causal_objects.insert(to_lower(o.get<std::string>()));
    lex.per_class[id] = std::move(cl);
  }
  return lex;
}

Lexicon Lexicon::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open lexicon file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string Lexicon::to_json_text() const {
  json j;
  j["subjects"] = subjects;
  j["causal_verbs"] = causal_verbs;
  j["classes"] = json::object();
  for (const auto& [id, cl] : per_class) {
    json jc;
    jc["verbs"] = cl.verbs;
    jc["objects"] = cl.objects;
    jc["causal_objects"] = cl.causal_objects;
    j["classes"][std::to_string(id)] = jc;
  }
  return j.dump(2);
}

}  // namespace cvemap
