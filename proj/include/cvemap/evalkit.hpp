#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cvemap/prediction.hpp"
#include "cvemap/taxonomy.hpp"

namespace cvemap {

struct ClassMetrics {
  double p = 0, r = 0, f1 = 0;
  int support = 0;
};

struct MetricReport {
  double accuracy = 0;
  double micro_p = 0, micro_r = 0, micro_f1 = 0;
  double macro_p = 0, macro_r = 0, macro_f1 = 0;
  std::map<int, ClassMetrics> per_class;
  // Zero-support classes, excluded from the macro averages.
  std::vector<int> excluded_classes;
};

MetricReport compute_metrics(const std::vector<Prediction>& preds,
                             const std::vector<int>& golds);
MetricReport compute_metrics_ids(const std::vector<int>& pred_ids,
                                 const std::vector<int>& golds);

// [gold-1][pred-1] counts.
using ConfusionMatrix = std::array<std::array<int, kNumClasses>, kNumClasses>;

ConfusionMatrix confusion_matrix(const std::vector<Prediction>& preds,
                                 const std::vector<int>& golds);
ConfusionMatrix confusion_matrix_ids(const std::vector<int>& pred_ids,
                                     const std::vector<int>& golds);

// How much off-diagonal mass lies between class pairs the taxonomy links.
struct DependencyConfusionSummary {
  int total = 0;
  int off_diagonal = 0;
  int related_off_diagonal = 0;
  int unrelated_off_diagonal = 0;
  double related_fraction = 0;
  double unrelated_fraction = 0;
};

DependencyConfusionSummary dependency_confusion(const ConfusionMatrix& m,
                                                const Taxonomy& t);

struct TopKItem {
  int m = 0;          // gold-set size
  int m_prime = 0;    // extra ranks needed beyond m
  int covered_at = 0; // final window size m + m_prime
};

struct TopKReport {
  std::vector<TopKItem> per_item;
  double hit_rate_exact = 0;
  std::map<int, double> cumulative_rates;  // extra -> fraction with m' <= extra
  double hit_rate_at_5 = 0;
};

// Per item: if the top-m ranked ids equal the gold set the item is an exact
// hit; otherwise the window grows one rank at a time until every gold id is
// covered.
TopKReport topk_protocol(const std::vector<std::vector<double>>& score_vectors,
                         const std::vector<std::set<int>>& gold_sets);

// ---- external-LLM technique-prediction baseline ----

struct BaselineItem {
  std::string cve_id;
  std::string description;
  std::vector<std::string> gold_techniques;
};

struct BaselineRecord {
  std::string cve_id;
  std::string description;
  std::vector<std::string> gold_techniques;
  std::string predicted_technique;
  bool correct = false;
  bool unparsed = false;
  std::string error;  // transport failure note, empty on success
};

struct BaselineSummary {
  int total = 0;
  int correct = 0;
  int unparsed = 0;
  int errored = 0;
  double accuracy = 0;
};

class LlmClient {
public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string name() const = 0;
};

// Replays cached {prompt, response} transcript lines; unknown prompts raise
// a transport error so replay runs stay hermetic.
class ReplayClient : public LlmClient {
public:
  explicit ReplayClient(const std::string& transcript_path);
  std::string complete(const std::string& prompt) override;
  std::string name() const override { return "replay"; }
  std::size_t size() const { return responses_.size(); }

private:
  std::map<std::string, std::string> responses_;
};

// Wraps a live client and appends every exchange to a transcript file.
class RecordingClient : public LlmClient {
public:
  RecordingClient(std::unique_ptr<LlmClient> inner,
                  const std::string& transcript_path);
  std::string complete(const std::string& prompt) override;
  std::string name() const override;

private:
  std::unique_ptr<LlmClient> inner_;
  std::string path_;
};

// POSTs a chat-completion request; credential read from the environment
// variable named by credential_env. Requests are serialized with a
// configurable pause between calls.
std::unique_ptr<LlmClient> make_http_llm_client(
    const std::string& endpoint, const std::string& model,
    const std::string& credential_env = "LLM_API_KEY",
    int pause_ms = 0);

std::string baseline_prompt(const std::string& description);

// First technique id in the text: T + 4 digits, optional .3-digit suffix.
std::optional<std::string> parse_technique_id(const std::string& response);

// Strict: exact id equality. Lenient additionally accepts parent/child ids
// related by a dotted prefix.
bool technique_match(const std::string& predicted,
                     const std::vector<std::string>& golds,
                     bool lenient_prefix);

std::pair<std::vector<BaselineRecord>, BaselineSummary> llm_baseline_eval(
    LlmClient& client, const std::vector<BaselineItem>& items,
    bool lenient_prefix = false);

std::vector<BaselineItem> read_baseline_items_jsonl(const std::string& path);

}  // namespace cvemap
