#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace cvemap {

// A token with byte offsets into the source string. `lower` is the ASCII
// lowercased surface form.
struct Token {
  std::string lower;
  std::size_t start = 0;
  std::size_t end = 0;
};

std::string to_lower(std::string_view s);

// Maximal runs of [A-Za-z0-9_'-]. Dots and other punctuation separate tokens.
std::vector<Token> tokenize(std::string_view s);

// Surface text spanned by tokens [first, last) with original casing and the
// characters between them.
std::string span_text(std::string_view source, const std::vector<Token>& toks,
                      std::size_t first, std::size_t last);

// Plural-tolerant equality between a document token and a term token, both
// lowercase: exact, +s, +es, or y->ies.
bool token_matches_term_token(const std::string& tok, const std::string& term_tok);

// First index in toks where the multi-token term matches at consecutive
// token boundaries, or npos. `term` is split on whitespace.
std::size_t find_term(const std::vector<Token>& toks, const std::string& term,
                      std::size_t from = 0);

// Token-boundary, case-insensitive, plural-tolerant containment.
bool contains_term(std::string_view text, const std::string& term);
bool contains_term(const std::vector<Token>& toks, const std::string& term);

// Splits prose into sentences at ./!/? boundaries, guarding version numbers
// and common abbreviations.
std::vector<std::string> split_sentences(const std::string& text);

// Vocabulary-guided suffix lemmatizer. A word maps to a lemma only when the
// candidate is in the registered vocabulary; otherwise the lowercased word is
// returned unchanged.
class Lemmatizer {
public:
  void add_vocab(const std::string& lemma);
  bool in_vocab(const std::string& word) const;

  // `word` may be any casing; the result is lowercase.
  std::string lemma(const std::string& word) const;

private:
  std::unordered_set<std::string> vocab_;
};

}  // namespace cvemap
