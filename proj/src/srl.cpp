#include "cvemap/srl.hpp"

#include <cctype>
#include <optional>
#include <unordered_set>

#include "cvemap/errors.hpp"

namespace cvemap {

namespace {

const std::unordered_set<std::string>& boundary_words() {
  static const std::unordered_set<std::string> s = {
      "that", "which", "who", "whom", "whose", "when",     "while",
      "because", "although", "though", "if",   "unless",   "since",
      "but", "and", "or", "then", "than", "so", "whereas",
  };
  return s;
}

const std::unordered_set<std::string>& aux_words() {
  static const std::unordered_set<std::string> s = {
      "can", "could", "may", "might", "will", "would", "shall", "should",
      "must", "do", "does", "did", "not", "cannot", "also", "then",
      "possibly", "potentially", "remotely", "easily", "successfully",
      "subsequently", "later", "often", "sometimes", "still", "first",
  };
  return s;
}

// Tokens that mark the previous word as a noun, so it is not a predicate.
const std::unordered_set<std::string>& determiner_words() {
  static const std::unordered_set<std::string> s = {
      "a", "an", "the", "this", "these", "those", "its", "their", "your",
      "our", "his", "her", "my", "as", "of", "any", "each", "every",
      "some", "no", "such", "one",
  };
  return s;
}

// Qualifiers that may precede the actor noun across a comma, e.g.
// "unauthenticated, remote attacker".
const std::unordered_set<std::string>& actor_qualifiers() {
  static const std::unordered_set<std::string> s = {
      "remote", "local", "unauthenticated", "unauthorized", "authenticated",
      "malicious", "anonymous", "external", "internal", "privileged",
      "unprivileged", "physical", "adjacent",
  };
  return s;
}

const std::unordered_set<std::string>& manner_prepositions() {
  static const std::unordered_set<std::string> s = {"via", "by", "using",
                                                    "through", "during"};
  return s;
}

const std::unordered_set<std::string>& location_prepositions() {
  static const std::unordered_set<std::string> s = {"on", "in", "at",
                                                    "within"};
  return s;
}

bool has_digit(const std::string& s) {
  for (unsigned char c : s)
    if (std::isdigit(c)) return true;
  return false;
}

struct Range {
  std::size_t first = 0;
  std::size_t last = 0;  // exclusive
  bool empty() const { return first >= last; }
};

// Shared sentence-scoped parsing state.
struct Parse {
  const Sentence* sent = nullptr;
  std::vector<Token> toks;
  std::vector<bool> clause_gap;  // gap before token i holds , ; : ( )
  std::vector<bool> used;        // token already emitted as a predicate
  const Lemmatizer* lemmas = nullptr;
  std::vector<SrlFrame>* out = nullptr;

  std::string span(const Range& r) const {
    return r.empty() ? std::string()
                     : span_text(sent->text, toks, r.first, r.last);
  }

  bool is_verb(std::size_t i) const {
    return lemmas->in_vocab(lemmas->lemma(toks[i].lower));
  }

  bool is_predicate(std::size_t i) const {
    if (!is_verb(i)) return false;
    if (i > 0 && determiner_words().count(toks[i - 1].lower)) return false;
    return true;
  }
};

Range arg0_left_of(const Parse& p, std::size_t vi) {
  if (vi == 0) return {};
  std::size_t j = vi - 1;
  while (aux_words().count(p.toks[j].lower)) {
    if (j == 0) return {};
    --j;
  }
  if (boundary_words().count(p.toks[j].lower) || p.is_predicate(j)) return {};
  std::size_t start = j;
  while (start > 0) {
    const std::size_t prev = start - 1;
    if (p.is_predicate(prev) || boundary_words().count(p.toks[prev].lower) ||
        aux_words().count(p.toks[prev].lower))
      break;
    if (p.clause_gap[start] && !actor_qualifiers().count(p.toks[prev].lower))
      break;
    start = prev;
  }
  return {start, j + 1};
}

// Emits the frame for the predicate at vi plus any complement-clause and
// coordinated frames it governs. Returns the index just past the last token
// this chain consumed.
std::size_t emit_frame(Parse& p, std::size_t vi, Range arg0) {
  const std::size_t n = p.toks.size();
  p.used[vi] = true;

  SrlFrame frame;
  frame.verb = span_text(p.sent->text, p.toks, vi, vi + 1);
  frame.verb_lemma = p.lemmas->lemma(p.toks[vi].lower);
  frame.doc_id = p.sent->doc_id;
  frame.sentence_index = p.sent->index;
  if (!arg0.empty()) frame.arguments["ARG0"] = p.span(arg0);

  // Scan the object span.
  std::size_t j = vi + 1;
  std::optional<std::size_t> sub_verb;   // complement-clause predicate
  std::optional<std::size_t> manner_at;  // trailing via/by/using phrase
  while (j < n) {
    const std::string& w = p.toks[j].lower;
    if (boundary_words().count(w)) break;
    if (p.is_predicate(j)) break;
    if (w == "to" && j + 1 < n && !p.used[j + 1] && p.is_verb(j + 1)) {
      sub_verb = j + 1;
      break;
    }
    if (w == "into" && j + 1 < n && !p.used[j + 1] && p.is_verb(j + 1) &&
        p.toks[j + 1].lower.size() > 4 &&
        p.toks[j + 1].lower.compare(p.toks[j + 1].lower.size() - 3, 3,
                                    "ing") == 0) {
      sub_verb = j + 1;
      break;
    }
    if (manner_prepositions().count(w)) {
      manner_at = j;
      break;
    }
    ++j;
  }

  Range arg1{vi + 1, j};

  // A trailing locational phrase naming a platform/width qualifier (any
  // token with a digit) is split off as ARGM-LOC.
  if (!arg1.empty()) {
    std::size_t loc = arg1.last;
    for (std::size_t k = arg1.last; k-- > arg1.first + 1;) {
      if (!location_prepositions().count(p.toks[k].lower)) continue;
      bool digits = false;
      for (std::size_t q = k + 1; q < arg1.last; ++q)
        if (has_digit(p.toks[q].lower)) digits = true;
      if (digits) {
        loc = k;
        break;
      }
    }
    if (loc < arg1.last) {
      frame.arguments["ARGM-LOC"] = p.span({loc, arg1.last});
      arg1.last = loc;
    }
  }
  if (!arg1.empty()) frame.arguments["ARG1"] = p.span(arg1);

  std::size_t consumed = j;

  if (manner_at) {
    std::size_t m = *manner_at + 1;
    while (m < n && !boundary_words().count(p.toks[m].lower) &&
           !p.clause_gap[m] && !p.is_predicate(m))
      ++m;
    frame.arguments["ARGM-MNR"] = p.span({*manner_at, m});
    consumed = m;
  }

  p.out->push_back(frame);
  const std::size_t self = p.out->size() - 1;

  if (sub_verb) {
    // Complement clause: its subject is the outer object when present,
    // otherwise the outer subject.
    const Range inner_arg0 = arg1.empty() ? arg0 : arg1;
    const std::size_t sub_start = *sub_verb;
    consumed = emit_frame(p, sub_start, inner_arg0);
    (*p.out)[self].arguments["ARG2"] =
        span_text(p.sent->text, p.toks, sub_start, consumed);
  }

  // Coordination: "and/or [adverb] <verb>" continues with the same subject.
  std::size_t e = consumed;
  if (e < n && (p.toks[e].lower == "and" || p.toks[e].lower == "or")) {
    std::size_t k = e + 1;
    while (k < n && aux_words().count(p.toks[k].lower)) ++k;
    if (k < n && !p.used[k] && p.is_verb(k))
      consumed = emit_frame(p, k, arg0);
  } else if (e < n && p.clause_gap[e] && !p.used[e] && p.is_verb(e)) {
    // "read, write files" style comma lists.
    consumed = emit_frame(p, e, arg0);
  }

  return consumed;
}

}  // namespace

std::vector<Sentence> split_sentences(const std::string& document,
                                      const std::string& doc_id) {
  std::vector<Sentence> out;
  int idx = 0;
  for (auto& text : cvemap::split_sentences(document)) {
    Sentence s;
    s.doc_id = doc_id;
    s.index = idx++;
    s.text = std::move(text);
    out.push_back(std::move(s));
  }
  return out;
}

const std::vector<std::string>& builtin_structure_verbs() {
  static const std::vector<std::string> v = {
      "allow", "trick", "enable", "permit", "perform", "use", "exploit",
      "execute", "send", "contain", "attempt", "conduct", "leverage",
      "inject", "gain",
  };
  return v;
}

RuleBasedBackend::RuleBasedBackend(const std::vector<std::string>& verb_lemmas) {
  for (const auto& v : verb_lemmas) lemmatizer_.add_vocab(v);
  for (const auto& v : builtin_structure_verbs()) lemmatizer_.add_vocab(v);
}

std::vector<SrlFrame> RuleBasedBackend::parse_sentence(const Sentence& s) {
  std::vector<SrlFrame> out;
  Parse p;
  p.sent = &s;
  p.toks = tokenize(s.text);
  p.lemmas = &lemmatizer_;
  p.out = &out;
  const std::size_t n = p.toks.size();
  p.used.assign(n, false);
  p.clause_gap.assign(n, false);
  for (std::size_t i = 1; i < n; ++i) {
    const std::string gap =
        s.text.substr(p.toks[i - 1].end, p.toks[i].start - p.toks[i - 1].end);
    for (char c : gap)
      if (c == ',' || c == ';' || c == ':' || c == '(' || c == ')')
        p.clause_gap[i] = true;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (p.used[i] || !p.is_predicate(i)) continue;
    emit_frame(p, i, arg0_left_of(p, i));
  }
  return out;
}

}  // namespace cvemap
