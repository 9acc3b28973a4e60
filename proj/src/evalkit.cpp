#include "cvemap/evalkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <regex>
#include <sstream>

#include "cvemap/errors.hpp"
#include "json.hpp"

namespace cvemap {

using nlohmann::json;

namespace {

double f1_of(double p, double r) {
  if (p == r) return p;
  if (p + r == 0) return 0;
  return 2 * p * r / (p + r);
}

void check_ids(const std::vector<int>& ids, const char* what) {
  for (int id : ids)
    if (id < 1 || id > kNumClasses)
      throw ValidationError(std::string(what) + " id " + std::to_string(id) +
                            " outside [1, " + std::to_string(kNumClasses) +
                            "]");
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

MetricReport compute_metrics_ids(const std::vector<int>& pred_ids,
                                 const std::vector<int>& golds) {
  if (pred_ids.size() != golds.size())
    throw ValidationError("prediction and gold counts differ");
  if (pred_ids.empty()) throw ValidationError("no items to score");
  check_ids(pred_ids, "prediction");
  check_ids(golds, "gold");

  const int n = static_cast<int>(golds.size());
  int tp[kNumClasses] = {0}, fp[kNumClasses] = {0}, fn[kNumClasses] = {0};
  int support[kNumClasses] = {0};
  for (int i = 0; i < n; ++i) {
    ++support[golds[i] - 1];
    if (pred_ids[i] == golds[i]) {
      ++tp[golds[i] - 1];
    } else {
      ++fp[pred_ids[i] - 1];
      ++fn[golds[i] - 1];
    }
  }

  MetricReport m;
  int tp_sum = 0, fp_sum = 0, fn_sum = 0;
  double macro_p = 0, macro_r = 0, macro_f1 = 0;
  int macro_n = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    ClassMetrics cm;
    cm.support = support[c];
    const int pd = tp[c] + fp[c], rd = tp[c] + fn[c];
    cm.p = pd ? static_cast<double>(tp[c]) / pd : 0.0;
    cm.r = rd ? static_cast<double>(tp[c]) / rd : 0.0;
    cm.f1 = f1_of(cm.p, cm.r);
    m.per_class[c + 1] = cm;
    tp_sum += tp[c];
    fp_sum += fp[c];
    fn_sum += fn[c];
    if (support[c] > 0) {
      macro_p += cm.p;
      macro_r += cm.r;
      macro_f1 += cm.f1;
      ++macro_n;
    } else {
      m.excluded_classes.push_back(c + 1);
    }
  }

  m.accuracy = static_cast<double>(tp_sum) / n;
  m.micro_p = (tp_sum + fp_sum) ? static_cast<double>(tp_sum) / (tp_sum + fp_sum)
                                : 0.0;
  m.micro_r = (tp_sum + fn_sum) ? static_cast<double>(tp_sum) / (tp_sum + fn_sum)
                                : 0.0;
  m.micro_f1 = f1_of(m.micro_p, m.micro_r);
  if (macro_n > 0) {
    m.macro_p = macro_p / macro_n;
    m.macro_r = macro_r / macro_n;
    m.macro_f1 = macro_f1 / macro_n;
  }
  return m;
}

MetricReport compute_metrics(const std::vector<Prediction>& preds,
                             const std::vector<int>& golds) {
  std::vector<int> ids;
  ids.reserve(preds.size());
  for (const auto& p : preds) ids.push_back(p.argmax_id);
  return compute_metrics_ids(ids, golds);
}

ConfusionMatrix confusion_matrix_ids(const std::vector<int>& pred_ids,
                                     const std::vector<int>& golds) {
  if (pred_ids.size() != golds.size())
    throw ValidationError("prediction and gold counts differ");
  check_ids(pred_ids, "prediction");
  check_ids(golds, "gold");
  ConfusionMatrix m{};
  for (auto& row : m) row.fill(0);
  for (std::size_t i = 0; i < golds.size(); ++i)
    ++m[golds[i] - 1][pred_ids[i] - 1];
  return m;
}

ConfusionMatrix confusion_matrix(const std::vector<Prediction>& preds,
                                 const std::vector<int>& golds) {
  std::vector<int> ids;
  ids.reserve(preds.size());
  for (const auto& p : preds) ids.push_back(p.argmax_id);
  return confusion_matrix_ids(ids, golds);
}

DependencyConfusionSummary dependency_confusion(const ConfusionMatrix& m,
                                                const Taxonomy& t) {
  DependencyConfusionSummary s;
  for (int g = 0; g < kNumClasses; ++g)
    for (int p = 0; p < kNumClasses; ++p) {
      s.total += m[g][p];
      if (g == p) continue;
      s.off_diagonal += m[g][p];
      if (t.related(g + 1, p + 1))
        s.related_off_diagonal += m[g][p];
      else
        s.unrelated_off_diagonal += m[g][p];
    }
  if (s.off_diagonal > 0) {
    s.related_fraction =
        static_cast<double>(s.related_off_diagonal) / s.off_diagonal;
    s.unrelated_fraction =
        static_cast<double>(s.unrelated_off_diagonal) / s.off_diagonal;
  }
  return s;
}

TopKReport topk_protocol(const std::vector<std::vector<double>>& score_vectors,
                         const std::vector<std::set<int>>& gold_sets) {
  if (score_vectors.size() != gold_sets.size())
    throw ValidationError("score and gold counts differ");
  if (score_vectors.empty()) throw ValidationError("no items to score");

  TopKReport report;
  report.per_item.reserve(score_vectors.size());
  int exact = 0, at5 = 0, max_extra = 0;
  for (std::size_t i = 0; i < score_vectors.size(); ++i) {
    const auto& scores = score_vectors[i];
    const auto& gold = gold_sets[i];
    if (static_cast<int>(scores.size()) != kNumClasses)
      throw ValidationError("score vector " + std::to_string(i) + " has " +
                            std::to_string(scores.size()) + " entries, want " +
                            std::to_string(kNumClasses));
    if (gold.empty())
      throw ValidationError("gold set " + std::to_string(i) + " is empty");
    for (int id : gold)
      if (id < 1 || id > kNumClasses)
        throw ValidationError("gold set " + std::to_string(i) +
                              " holds id outside [1, " +
                              std::to_string(kNumClasses) + "]");

    const std::vector<int> ranked = rank_ids(scores);
    TopKItem item;
    item.m = static_cast<int>(gold.size());
    int covered = 0;
    for (int pos = 0; pos < kNumClasses; ++pos)
      if (gold.count(ranked[pos])) covered = pos + 1;
    item.covered_at = covered;
    item.m_prime = covered - item.m;
    report.per_item.push_back(item);
    if (item.m_prime == 0) ++exact;
    if (item.covered_at <= 5) ++at5;
    max_extra = std::max(max_extra, item.m_prime);
  }

  const double n = static_cast<double>(report.per_item.size());
  report.hit_rate_exact = exact / n;
  report.hit_rate_at_5 = at5 / n;
  for (int extra = 0; extra <= max_extra; ++extra) {
    int count = 0;
    for (const auto& item : report.per_item)
      if (item.m_prime <= extra) ++count;
    report.cumulative_rates[extra] = count / n;
  }
  return report;
}

// ---- baseline harness ----

ReplayClient::ReplayClient(const std::string& transcript_path) {
  std::ifstream in(transcript_path);
  if (!in) throw LoadError("cannot open transcript " + transcript_path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw LoadError(transcript_path + ":" + std::to_string(lineno) + ": " +
                      e.what());
    }
    if (!j.contains("prompt") || !j.contains("response"))
      throw LoadError(transcript_path + ":" + std::to_string(lineno) +
                      ": transcript line needs prompt and response");
    responses_[j.at("prompt").get<std::string>()] =
        j.at("response").get<std::string>();
  }
}

std::string ReplayClient::complete(const std::string& prompt) {
  auto it = responses_.find(prompt);
  if (it == responses_.end())
    throw TransportError("no cached response for prompt: " +
                         prompt.substr(0, 80));
  return it->second;
}

RecordingClient::RecordingClient(std::unique_ptr<LlmClient> inner,
                                 const std::string& transcript_path)
    : inner_(std::move(inner)), path_(transcript_path) {
  if (!inner_) throw ValidationError("recording client needs an inner client");
}

std::string RecordingClient::complete(const std::string& prompt) {
  const std::string response = inner_->complete(prompt);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw LoadError("cannot append to transcript " + path_);
  const json j = {
      {"prompt", prompt}, {"response", response}, {"timestamp", now_iso8601()}};
  out << j.dump() << "\n";
  return response;
}

std::string RecordingClient::name() const {
  return "recording(" + inner_->name() + ")";
}

std::string baseline_prompt(const std::string& description) {
  return "Find the associated MITRE ATT&CK technique for " + description;
}

std::optional<std::string> parse_technique_id(const std::string& response) {
  static const std::regex pattern(R"(T\d{4}(\.\d{3})?(?!\d))");
  std::smatch m;
  if (std::regex_search(response, m, pattern)) return m.str(0);
  return std::nullopt;
}

bool technique_match(const std::string& predicted,
                     const std::vector<std::string>& golds,
                     bool lenient_prefix) {
  for (const auto& gold : golds) {
    if (predicted == gold) return true;
    if (lenient_prefix &&
        (predicted.rfind(gold + ".", 0) == 0 ||
         gold.rfind(predicted + ".", 0) == 0))
      return true;
  }
  return false;
}

std::pair<std::vector<BaselineRecord>, BaselineSummary> llm_baseline_eval(
    LlmClient& client, const std::vector<BaselineItem>& items,
    bool lenient_prefix) {
  if (items.empty()) throw ValidationError("no baseline items");
  std::vector<BaselineRecord> records;
  records.reserve(items.size());
  BaselineSummary summary;
  summary.total = static_cast<int>(items.size());
  for (const auto& item : items) {
    BaselineRecord rec;
    rec.cve_id = item.cve_id;
    rec.description = item.description;
    rec.gold_techniques = item.gold_techniques;
    try {
      const std::string response =
          client.complete(baseline_prompt(item.description));
      const auto parsed = parse_technique_id(response);
      if (!parsed) {
        rec.unparsed = true;
        ++summary.unparsed;
      } else {
        rec.predicted_technique = *parsed;
        rec.correct =
            technique_match(*parsed, item.gold_techniques, lenient_prefix);
        if (rec.correct) ++summary.correct;
      }
    } catch (const TransportError& e) {
      rec.error = e.what();
      ++summary.errored;
    }
    records.push_back(std::move(rec));
  }
  summary.accuracy = static_cast<double>(summary.correct) / summary.total;
  return {std::move(records), summary};
}

std::vector<BaselineItem> read_baseline_items_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path);
  std::vector<BaselineItem> items;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw LoadError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    BaselineItem item;
    if (!j.contains("cve_id") || !j.at("cve_id").is_string())
      throw LoadError(path + ":" + std::to_string(lineno) +
                      ": missing cve_id");
    item.cve_id = j.at("cve_id").get<std::string>();
    item.description = j.value("description", std::string());
    if (j.contains("gold_techniques"))
      item.gold_techniques =
          j.at("gold_techniques").get<std::vector<std::string>>();
    if (item.gold_techniques.empty())
      throw LoadError(path + ":" + std::to_string(lineno) + ": " +
                      item.cve_id + " has no gold techniques");
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace cvemap
