#include "cvemap/text.hpp"

#include <algorithm>
#include <cctype>

namespace cvemap {

namespace {

bool is_token_char(unsigned char c) {
  return std::isalnum(c) || c == '_' || c == '\'' || c == '-';
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> abbr = {
      "e.g", "i.e", "etc", "vs", "cf", "al", "inc", "ltd", "no", "ver",
  };
  return abbr;
}

const std::unordered_map<std::string, std::string>& irregular_verbs() {
  static const std::unordered_map<std::string, std::string> m = {
      {"led", "lead"},         {"leads", "lead"},
      {"read", "read"},        {"wrote", "write"},
      {"written", "write"},    {"overwrote", "overwrite"},
      {"overwritten", "overwrite"},
      {"sent", "send"},        {"ran", "run"},
      {"gave", "give"},        {"given", "give"},
      {"took", "take"},        {"taken", "take"},
      {"made", "make"},        {"got", "get"},
      {"gotten", "get"},       {"stole", "steal"},
      {"stolen", "steal"},     {"found", "find"},
      {"held", "hold"},        {"kept", "keep"},
      {"left", "leave"},       {"lost", "lose"},
      {"put", "put"},          {"set", "set"},
      {"reset", "reset"},      {"saw", "see"},
      {"seen", "see"},         {"did", "do"},
      {"done", "do"},          {"came", "come"},
      {"went", "go"},          {"gone", "go"},
      {"built", "build"},      {"brought", "bring"},
      {"caught", "catch"},     {"chose", "choose"},
      {"chosen", "choose"},    {"drew", "draw"},
      {"drawn", "draw"},       {"hid", "hide"},
      {"hidden", "hide"},      {"rose", "rise"},
      {"risen", "rise"},       {"arose", "arise"},
      {"arisen", "arise"},     {"became", "become"},
      {"began", "begin"},      {"begun", "begin"},
      {"broke", "break"},      {"broken", "break"},
  };
  return m;
}

bool doubled_final_consonant(const std::string& s) {
  if (s.size() < 2) return false;
  const char a = s[s.size() - 1];
  if (a != s[s.size() - 2]) return false;
  return a != 'a' && a != 'e' && a != 'i' && a != 'o' && a != 'u';
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_token_char(static_cast<unsigned char>(s[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_token_char(static_cast<unsigned char>(s[j]))) ++j;
    Token t;
    t.lower = to_lower(s.substr(i, j - i));
    t.start = i;
    t.end = j;
    out.push_back(std::move(t));
    i = j;
  }
  return out;
}

std::string span_text(std::string_view source, const std::vector<Token>& toks,
                      std::size_t first, std::size_t last) {
  if (first >= last || last > toks.size()) return {};
  const std::size_t a = toks[first].start;
  const std::size_t b = toks[last - 1].end;
  return std::string(source.substr(a, b - a));
}

bool token_matches_term_token(const std::string& tok, const std::string& term_tok) {
  if (tok == term_tok) return true;
  const std::size_t n = term_tok.size();
  if (tok.size() == n + 1 && tok.compare(0, n, term_tok) == 0 && tok[n] == 's')
    return true;
  if (tok.size() == n + 2 && tok.compare(0, n, term_tok) == 0 &&
      tok[n] == 'e' && tok[n + 1] == 's')
    return true;
  if (n >= 2 && term_tok.back() == 'y' && tok.size() == n + 2 &&
      tok.compare(0, n - 1, term_tok, 0, n - 1) == 0 &&
      tok.compare(n - 1, 3, "ies") == 0)
    return true;
  return false;
}

std::size_t find_term(const std::vector<Token>& toks, const std::string& term,
                      std::size_t from) {
  const std::vector<std::string> parts = split_ws(to_lower(term));
  if (parts.empty() || toks.size() < parts.size()) return std::string::npos;
  for (std::size_t i = from; i + parts.size() <= toks.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (!token_matches_term_token(toks[i + k].lower, parts[k])) {
        ok = false;
        break;
      }
    }
    if (ok) return i;
  }
  return std::string::npos;
}

bool contains_term(const std::vector<Token>& toks, const std::string& term) {
  return find_term(toks, term) != std::string::npos;
}

bool contains_term(std::string_view text, const std::string& term) {
  return contains_term(tokenize(text), term);
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    // Version numbers and decimals: digit on both sides.
    if (c == '.' && i > 0 && i + 1 < n &&
        std::isdigit(static_cast<unsigned char>(text[i - 1])) &&
        std::isdigit(static_cast<unsigned char>(text[i + 1])))
      continue;
    // Abbreviation guard: look back at the word before the dot.
    if (c == '.') {
      std::size_t w = i;
      while (w > begin && (std::isalnum(static_cast<unsigned char>(text[w - 1])) ||
                           text[w - 1] == '.'))
        --w;
      const std::string word = to_lower(std::string_view(text).substr(w, i - w));
      if (abbreviations().count(word)) continue;
      if (word.size() == 1 && std::isalpha(static_cast<unsigned char>(word[0])))
        continue;
    }
    // End of text counts as a boundary.
    std::size_t j = i + 1;
    while (j < n && (text[j] == '.' || text[j] == '!' || text[j] == '?' ||
                     text[j] == '"' || text[j] == ')'))
      ++j;
    if (j < n) {
      if (!std::isspace(static_cast<unsigned char>(text[j]))) continue;
      std::size_t k = j;
      while (k < n && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
      if (k < n && std::islower(static_cast<unsigned char>(text[k]))) continue;
      std::string sent = text.substr(begin, j - begin);
      while (!sent.empty() && std::isspace(static_cast<unsigned char>(sent.front())))
        sent.erase(sent.begin());
      while (!sent.empty() && std::isspace(static_cast<unsigned char>(sent.back())))
        sent.pop_back();
      if (!sent.empty()) out.push_back(std::move(sent));
      begin = k;
      i = k == 0 ? 0 : k - 1;
    } else {
      i = j - 1;
    }
  }
  if (begin < n) {
    std::string sent = text.substr(begin);
    while (!sent.empty() && std::isspace(static_cast<unsigned char>(sent.front())))
      sent.erase(sent.begin());
    while (!sent.empty() && std::isspace(static_cast<unsigned char>(sent.back())))
      sent.pop_back();
    if (!sent.empty()) out.push_back(std::move(sent));
  }
  return out;
}

void Lemmatizer::add_vocab(const std::string& lemma) {
  vocab_.insert(to_lower(lemma));
}

bool Lemmatizer::in_vocab(const std::string& word) const {
  return vocab_.count(word) != 0;
}

std::string Lemmatizer::lemma(const std::string& word) const {
  const std::string w = to_lower(word);
  if (vocab_.count(w)) return w;
  const auto& irr = irregular_verbs();
  if (auto it = irr.find(w); it != irr.end() && vocab_.count(it->second))
    return it->second;

  std::vector<std::string> candidates;
  const std::size_t n = w.size();
  if (n > 4 && w.compare(n - 3, 3, "ies") == 0)
    candidates.push_back(w.substr(0, n - 3) + "y");
  if (n > 4 && w.compare(n - 3, 3, "ied") == 0)
    candidates.push_back(w.substr(0, n - 3) + "y");
  if (n > 3 && w.compare(n - 2, 2, "es") == 0)
    candidates.push_back(w.substr(0, n - 2));
  if (n > 3 && w.back() == 's' && w[n - 2] != 's')
    candidates.push_back(w.substr(0, n - 1));
  if (n > 4 && w.compare(n - 3, 3, "ing") == 0) {
    const std::string base = w.substr(0, n - 3);
    candidates.push_back(base);
    candidates.push_back(base + "e");
    if (doubled_final_consonant(base))
      candidates.push_back(base.substr(0, base.size() - 1));
  }
  if (n > 3 && w.compare(n - 2, 2, "ed") == 0) {
    const std::string base = w.substr(0, n - 2);
    candidates.push_back(base);
    candidates.push_back(base + "e");
    if (doubled_final_consonant(base))
      candidates.push_back(base.substr(0, base.size() - 1));
  }
  for (const auto& c : candidates)
    if (vocab_.count(c)) return c;
  return w;
}

}  // namespace cvemap
