#pragma once

#include <map>
#include <string>
#include <vector>

namespace cvemap {

// Word-level vocabulary with reserved ids for the structural tokens.
class Vocab {
public:
  static constexpr int kPad = 0;
  static constexpr int kCls = 1;
  static constexpr int kSep = 2;
  static constexpr int kUnk = 3;
  static constexpr int kReserved = 4;

  // Most frequent words from the given texts, capped at max_words.
  static Vocab build(const std::vector<std::string>& texts,
                     std::size_t max_words);

  int id_of(const std::string& word) const;
  int size() const { return static_cast<int>(words_.size()) + kReserved; }

  // Words in id order (reserved ids excluded).
  const std::vector<std::string>& words() const { return words_; }
  static Vocab from_words(std::vector<std::string> words);

private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

// [CLS] content [SEP] context [SEP], lowercased word ids. `content_len`
// counts the content tokens only.
struct EncodedPair {
  std::vector<int> token_ids;
  int content_len = 0;
};

// The context tail is truncated first; content tokens are only cut once the
// context is already empty. Throws on empty context.
EncodedPair encode_pair(const Vocab& vocab, const std::string& content,
                        const std::string& context, int max_tokens);

// Pads every sequence with [PAD] to the batch maximum; returns that maximum.
std::size_t pad_batch(std::vector<EncodedPair>& batch);

}  // namespace cvemap
