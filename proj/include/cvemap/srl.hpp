#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cvemap/text.hpp"

namespace cvemap {

struct Sentence {
  std::string doc_id;
  int index = 0;
  std::string text;
};

// One predicate-argument frame. `verb` is the surface form, `verb_lemma` its
// normalized copy. Argument keys: ARG0, ARG1, ARG2, ARGM-TMP, ARGM-LOC,
// ARGM-DIR, ARGM-MNR, ARGM-PRP. Spans are substrings of the sentence.
struct SrlFrame {
  std::string verb;
  std::string verb_lemma;
  std::map<std::string, std::string> arguments;
  std::string doc_id;
  int sentence_index = 0;

  const std::string* arg(const std::string& label) const {
    auto it = arguments.find(label);
    return it == arguments.end() ? nullptr : &it->second;
  }
};

std::vector<Sentence> split_sentences(const std::string& document,
                                      const std::string& doc_id);

class SrlBackend {
public:
  virtual ~SrlBackend() = default;
  virtual std::vector<SrlFrame> parse_sentence(const Sentence& s) = 0;
  virtual bool concurrent_safe() const = 0;
  virtual std::string name() const = 0;
};

// Deterministic pattern-based labeler. Predicates are tokens whose lemma is
// in the registered verb vocabulary; arguments are recovered from clause
// structure around each predicate. Handles "to <verb>" / "into <gerund>"
// complement clauses (the inner frame inherits the outer object as its
// subject) and verb coordination (the next conjunct inherits the subject).
class RuleBasedBackend : public SrlBackend {
public:
  explicit RuleBasedBackend(const std::vector<std::string>& verb_lemmas);

  std::vector<SrlFrame> parse_sentence(const Sentence& s) override;
  bool concurrent_safe() const override { return true; }
  std::string name() const override { return "rule-based"; }

  const Lemmatizer& lemmatizer() const { return lemmatizer_; }

private:
  Lemmatizer lemmatizer_;
};

// Adapter for an external labeling service. POSTs one sentence per request
// and accepts either the native frame schema or the word/BIO-tag schema.
class HttpBackend : public SrlBackend {
public:
  // endpoint: http://host:port/path
  explicit HttpBackend(const std::string& endpoint,
                       const std::vector<std::string>& verb_lemmas = {});
  ~HttpBackend() override;

  std::vector<SrlFrame> parse_sentence(const Sentence& s) override;
  bool concurrent_safe() const override { return false; }
  std::string name() const override { return "http:" + endpoint_; }

private:
  std::string endpoint_;
  std::string host_;
  std::string path_;
  int port_ = 80;
  Lemmatizer lemmatizer_;
};

// Verbs every rule-based instance understands in addition to the lexicon's:
// linking/enabling verbs needed to recover clause structure.
const std::vector<std::string>& builtin_structure_verbs();

}  // namespace cvemap
