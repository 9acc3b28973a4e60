#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cvemap/srl.hpp"
#include "cvemap/taxonomy.hpp"

namespace cvemap {

struct ClassLexicon {
  std::set<std::string> verbs;
  std::set<std::string> objects;
  std::set<std::string> causal_objects;
};

// Per-class subject/verb/object dictionaries plus the causal-link verbs.
// Subjects are global; causal objects are per class and drive both causal
// matching and the memory-read document rule.
struct Lexicon {
  std::set<std::string> subjects;
  std::set<std::string> causal_verbs;
  std::map<int, ClassLexicon> per_class;

  static Lexicon built_in_default();
  static Lexicon load(const std::string& path);
  static Lexicon from_json_text(const std::string& text);
  std::string to_json_text() const;

  // Every per-class key must name a taxonomy class.
  void validate(const Taxonomy& t) const;

  // Union of class verbs and causal verbs, sorted; feeds backend vocabulary.
  std::vector<std::string> all_verbs() const;
};

struct SvoRef {
  std::string doc_id;
  int sentence_index = 0;
};

struct Svo {
  std::string subject;
  std::string verb;  // lemma
  std::string verb_surface;
  std::string object;
  int functionality_id = 0;
  bool causal = false;
  SvoRef sentence_ref;
  std::string subject_term;
  std::string verb_term;
  std::string object_term;
  // True when the source document contains a causal object configured for
  // this SVO's class; consumed by the stage-1 pairing gate.
  bool context_causal = false;

  std::string text() const;
};

struct ExtractOptions {
  // Apply the document rule to write-side conflicts (classes 16 vs 6) the
  // same way it always applies to read-side conflicts (12 vs 14).
  bool write_side_disambiguation = false;
  // Document-parallel workers; forced to 1 when the backend is not
  // concurrent-safe. Output order is independent of the worker count.
  int jobs = 1;
};

struct ExtractionError {
  std::string doc_id;
  std::string message;
};

struct ExtractionResult {
  std::vector<Svo> svos;
  std::vector<ExtractionError> errors;
};

// One Svo per frame whose verb lemma, subject span, and object span all pass
// the class-f dictionaries; case-insensitive token-boundary matching.
std::vector<Svo> match_action_svos(const std::vector<SrlFrame>& frames,
                                   const Lexicon& lex, int f);

// Causal pattern: verb lemma in the causal set, object span holds a class-f
// causal object. The subject gate passes on the frame's own subject or, for
// fault-clause subjects, on any frame in the list with a matching subject.
std::vector<Svo> match_causal_svos(const std::vector<SrlFrame>& frames,
                                   const Lexicon& lex, int f);

// For an SVO matching both the controlled-read and uncontrolled-read
// classes: 14 when the document mentions a class-14 causal object, else 12.
int disambiguate_memory_read(const Svo& svo, const std::string& doc_text,
                             const Lexicon& lex);

std::unique_ptr<SrlBackend> make_rule_backend(const Lexicon& lex);

// Full pipeline: sentence split -> frames -> per-class action + causal
// matching -> conflict resolution. Output order is document order, sentence
// order, class id order. Backend failures are collected per document.
ExtractionResult extract_corpus(
    const std::vector<std::pair<std::string, std::string>>& docs,
    SrlBackend& backend, const Lexicon& lex, const Taxonomy& t,
    const ExtractOptions& opts = {});

void write_svos_jsonl(const std::vector<Svo>& svos, const std::string& path);
std::vector<Svo> read_svos_jsonl(const std::string& path);

}  // namespace cvemap
