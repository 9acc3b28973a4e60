#include <regex>

#include "cvemap/errors.hpp"
#include "cvemap/srl.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cvemap {

using nlohmann::json;

namespace {

const std::unordered_set<std::string>& allowed_labels() {
  static const std::unordered_set<std::string> s = {
      "ARG0", "ARG1", "ARG2", "ARGM-TMP", "ARGM-LOC",
      "ARGM-DIR", "ARGM-MNR", "ARGM-PRP",
  };
  return s;
}

std::string join_words(const std::vector<std::string>& words,
                       const std::vector<std::size_t>& idxs) {
  std::string out;
  for (std::size_t i = 0; i < idxs.size(); ++i) {
    if (i) out += ' ';
    out += words[idxs[i]];
  }
  return out;
}

// Word/BIO-tag schema: {"words": [...], "verbs": [{"verb":..., "tags":[...]}]}
std::vector<SrlFrame> decode_bio(const json& j, const Sentence& s,
                                 const Lemmatizer& lem) {
  std::vector<SrlFrame> out;
  std::vector<std::string> words;
  for (const auto& w : j.at("words")) words.push_back(w.get<std::string>());
  for (const auto& jv : j.at("verbs")) {
    SrlFrame frame;
    frame.doc_id = s.doc_id;
    frame.sentence_index = s.index;
    std::map<std::string, std::vector<std::size_t>> spans;
    const auto& tags = jv.at("tags");
    for (std::size_t i = 0; i < tags.size() && i < words.size(); ++i) {
      const std::string tag = tags[i].get<std::string>();
      if (tag.size() < 3 || tag == "O") continue;
      const std::string label = tag.substr(2);
      spans[label].push_back(i);
    }
    if (auto it = spans.find("V"); it != spans.end())
      frame.verb = join_words(words, it->second);
    else
      frame.verb = jv.value("verb", "");
    if (frame.verb.empty()) continue;
    frame.verb_lemma = lem.lemma(tokenize(frame.verb).empty()
                                     ? frame.verb
                                     : tokenize(frame.verb).front().lower);
    for (const auto& [label, idxs] : spans)
      if (allowed_labels().count(label))
        frame.arguments[label] = join_words(words, idxs);
    out.push_back(std::move(frame));
  }
  return out;
}

// Native frame schema: {"frames": [{"verb":..., "lemma":..., "arguments":{}}]}
std::vector<SrlFrame> decode_frames(const json& j, const Sentence& s,
                                    const Lemmatizer& lem) {
  std::vector<SrlFrame> out;
  for (const auto& jf : j.at("frames")) {
    SrlFrame frame;
    frame.doc_id = s.doc_id;
    frame.sentence_index = s.index;
    frame.verb = jf.value("verb", "");
    if (frame.verb.empty()) continue;
    if (jf.contains("lemma"))
      frame.verb_lemma = jf.at("lemma").get<std::string>();
    else
      frame.verb_lemma = lem.lemma(to_lower(frame.verb));
    const json args = jf.value("arguments", json::object());
    for (const auto& [label, span] : args.items())
      if (allowed_labels().count(label))
        frame.arguments[label] = span.get<std::string>();
    out.push_back(std::move(frame));
  }
  return out;
}

}  // namespace

HttpBackend::HttpBackend(const std::string& endpoint,
                         const std::vector<std::string>& verb_lemmas)
    : endpoint_(endpoint) {
  for (const auto& v : verb_lemmas) lemmatizer_.add_vocab(v);
  for (const auto& v : builtin_structure_verbs()) lemmatizer_.add_vocab(v);

  static const std::regex re(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(endpoint_, m, re))
    throw ValidationError("labeling endpoint must look like http://host:port/path, got: " +
                          endpoint_);
  host_ = m[1];
  port_ = m[2].matched ? std::stoi(m[2]) : 80;
  path_ = m[3].matched ? m[3].str() : "/";
}

HttpBackend::~HttpBackend() = default;

std::vector<SrlFrame> HttpBackend::parse_sentence(const Sentence& s) {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(30, 0);

  json req;
  req["sentence"] = s.text;
  auto res = client.Post(path_.c_str(), req.dump(), "application/json");
  if (!res)
    throw TransportError("labeling endpoint unreachable: " + endpoint_);
  if (res->status != 200)
    throw TransportError("labeling endpoint returned status " +
                         std::to_string(res->status));
  json j;
  try {
    j = json::parse(res->body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("labeling response is not valid JSON: ") +
                         e.what());
  }
  if (j.contains("frames")) return decode_frames(j, s, lemmatizer_);
  if (j.contains("verbs") && j.contains("words"))
    return decode_bio(j, s, lemmatizer_);
  throw TransportError("labeling response has neither 'frames' nor 'verbs'/'words'");
}

}  // namespace cvemap
