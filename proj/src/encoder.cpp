#include "cvemap/encoder.hpp"

#include <algorithm>

#include "cvemap/errors.hpp"
#include "cvemap/text.hpp"

namespace cvemap {

Vocab Vocab::build(const std::vector<std::string>& texts,
                   std::size_t max_words) {
  std::map<std::string, std::size_t> freq;
  for (const auto& t : texts)
    for (const auto& tok : tokenize(t)) ++freq[tok.lower];

  std::vector<std::pair<std::string, std::size_t>> items(freq.begin(),
                                                         freq.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (items.size() > max_words) items.resize(max_words);

  std::vector<std::string> words;
  words.reserve(items.size());
  for (auto& [w, n] : items) {
    (void)n;
    words.push_back(w);
  }
  return from_words(std::move(words));
}

Vocab Vocab::from_words(std::vector<std::string> words) {
  Vocab v;
  v.words_ = std::move(words);
  for (std::size_t i = 0; i < v.words_.size(); ++i)
    v.index_[v.words_[i]] = static_cast<int>(i) + kReserved;
  return v;
}

int Vocab::id_of(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

EncodedPair encode_pair(const Vocab& vocab, const std::string& content,
                        const std::string& context, int max_tokens) {
  if (context.empty())
    throw ValidationError("context must be non-empty for encoding");
  if (max_tokens < 4)
    throw ValidationError("max_tokens must be at least 4");

  std::vector<int> content_ids;
  for (const auto& tok : tokenize(content))
    content_ids.push_back(vocab.id_of(tok.lower));
  std::vector<int> context_ids;
  for (const auto& tok : tokenize(context))
    context_ids.push_back(vocab.id_of(tok.lower));

  const std::size_t budget = static_cast<std::size_t>(max_tokens) - 3;
  if (content_ids.size() > budget) content_ids.resize(budget);
  const std::size_t context_budget = budget - content_ids.size();
  if (context_ids.size() > context_budget)
    context_ids.resize(context_budget);

  EncodedPair out;
  out.content_len = static_cast<int>(content_ids.size());
  out.token_ids.reserve(content_ids.size() + context_ids.size() + 3);
  out.token_ids.push_back(Vocab::kCls);
  out.token_ids.insert(out.token_ids.end(), content_ids.begin(),
                       content_ids.end());
  out.token_ids.push_back(Vocab::kSep);
  out.token_ids.insert(out.token_ids.end(), context_ids.begin(),
                       context_ids.end());
  out.token_ids.push_back(Vocab::kSep);
  return out;
}

std::size_t pad_batch(std::vector<EncodedPair>& batch) {
  std::size_t m = 0;
  for (const auto& e : batch) m = std::max(m, e.token_ids.size());
  for (auto& e : batch) e.token_ids.resize(m, Vocab::kPad);
  return m;
}

}  // namespace cvemap
