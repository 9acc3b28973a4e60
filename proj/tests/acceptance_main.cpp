// Release gate: every criterion prints one line and the process exits with
// the number of failures. Runs against the bundled data directory only.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "cvemap/dataset.hpp"
#include "cvemap/errors.hpp"
#include "cvemap/evalkit.hpp"
#include "cvemap/extractor.hpp"
#include "cvemap/model.hpp"
#include "cvemap/rng.hpp"
#include "cvemap/taxonomy.hpp"
#include "json.hpp"
#include "support.hpp"
#include "synthetic.hpp"

using namespace cvemap;
using nlohmann::json;

namespace {

int g_failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", n,
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

template <typename Fn>
void criterion(int n, Fn&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(n, false, std::string("exception: ") + e.what());
  }
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

// ---- criterion 1: extraction fidelity on the bundled example corpus ----

std::vector<std::pair<std::string, std::string>> load_example_docs() {
  std::ifstream in(testsupport::data_path("fixtures/extraction_examples.jsonl"));
  if (!in) throw LoadError("cannot open extraction_examples.jsonl");
  std::vector<std::pair<std::string, std::string>> docs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    docs.emplace_back(j.at("doc_id").get<std::string>(),
                      j.at("text").get<std::string>());
  }
  return docs;
}

void check_extraction_fidelity() {
  const auto docs = load_example_docs();
  const auto lex = Lexicon::built_in_default();
  const auto tax = Taxonomy::built_in_default();

  using Row = std::tuple<std::string, std::string, int, bool, bool>;
  const auto t0 = Clock::now();
  std::vector<std::vector<Row>> runs;
  for (int run = 0; run < 5; ++run) {
    auto backend = make_rule_backend(lex);
    const auto r = extract_corpus(docs, *backend, lex, tax);
    if (!r.errors.empty()) {
      report(1, false, "rule backend reported extraction errors");
      return;
    }
    std::vector<Row> rows;
    for (const auto& s : r.svos)
      rows.emplace_back(s.sentence_ref.doc_id, s.text(), s.functionality_id,
                        s.causal, s.context_causal);
    runs.push_back(std::move(rows));
  }
  const double elapsed = seconds_since(t0);

  bool ok = elapsed < 10.0;
  for (int run = 1; run < 5; ++run) ok = ok && runs[run] == runs[0];

  const std::vector<std::pair<std::string, int>> single = {
      {"remote attackers create new accounts", 1},
      {"unauthenticated users create accounts with arbitrary roles", 1},
      {"remote attacker read arbitrary files", 13},
      {"attackers view arbitrary files on the system", 13},
      {"remote attackers modify permission field", 8},
      {"unauthenticated user changes the ownership of the files", 8},
      {"unauthenticated, remote attacker install additional jee applications",
       5},
      {"attacker place a malicious dll file", 5},
  };

  std::map<std::string, std::multiset<std::pair<std::string, int>>> by_doc;
  for (const auto& row : runs[0])
    by_doc[std::get<0>(row)].insert({std::get<1>(row), std::get<2>(row)});

  ok = ok && runs[0].size() == 10;
  std::set<int> single_classes;
  for (std::size_t i = 0; i < single.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "example-%02d", static_cast<int>(i) + 1);
    const auto it = by_doc.find(id);
    const std::multiset<std::pair<std::string, int>> want = {single[i]};
    ok = ok && it != by_doc.end() && it->second == want;
    single_classes.insert(single[i].second);
  }
  ok = ok && single_classes.size() == 4;

  const std::multiset<std::pair<std::string, int>> impact_want = {
      {"attackers read arbitrary kernel memory", 14},
      {"attackers read kernel memory", 14},
  };
  const auto impact = by_doc.find("example-09");
  ok = ok && impact != by_doc.end() && impact->second == impact_want;
  for (const auto& row : runs[0])
    if (std::get<0>(row) == "example-09")
      ok = ok && !std::get<3>(row) && std::get<4>(row);

  report(1, ok,
         fmt("8 action triples over 4 classes plus 2 impact-rule triples, "
             "5 identical runs in %.2fs",
             elapsed));
}

// ---- criterion 2: relation closure vs an exhaustive rule fixpoint ----

// Children of an inheritance edge gain Strong commonality with every class
// their parent has Strong commonality with; commonality is symmetric and
// derived edges never overwrite base edges.
std::array<std::array<int, 17>, 17> closure_oracle(const Taxonomy& t) {
  std::array<std::array<int, 17>, 17> m{};
  for (const auto& r : t.base_relations()) {
    switch (r.kind) {
      case RelationKind::Inheritance:
        m[r.source_id][r.target_id] = 1;
        break;
      case RelationKind::StrongCommonality:
        m[r.source_id][r.target_id] = 2;
        m[r.target_id][r.source_id] = 2;
        break;
      case RelationKind::WeakCommonality:
        m[r.source_id][r.target_id] = 3;
        m[r.target_id][r.source_id] = 3;
        break;
    }
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (int parent = 1; parent <= 16; ++parent)
      for (int child = 1; child <= 16; ++child) {
        if (m[parent][child] != 1) continue;
        for (int other = 1; other <= 16; ++other) {
          if (other == child || m[parent][other] != 2) continue;
          if (m[child][other] == 0) {
            m[child][other] = 2;
            changed = true;
          }
          if (m[other][child] == 0) {
            m[other][child] = 2;
            changed = true;
          }
        }
      }
  }
  return m;
}

int relation_code(const Taxonomy& t, int a, int b) {
  const auto got = t.relation(a, b);
  if (!got) return 0;
  return *got == RelationKind::Inheritance         ? 1
         : *got == RelationKind::StrongCommonality ? 2
                                                   : 3;
}

bool closure_matches(const Taxonomy& t) {
  const auto oracle = closure_oracle(t);
  for (int a = 1; a <= 16; ++a)
    for (int b = 1; b <= 16; ++b) {
      const int want = a == b ? 0 : oracle[a][b];
      if (relation_code(t, a, b) != want) return false;
    }
  return true;
}

void check_taxonomy_closure() {
  const auto base = Taxonomy::built_in_default();
  const auto extended =
      Taxonomy::load(testsupport::data_path("taxonomy_extended.json"));

  const auto t0 = Clock::now();
  bool ok = closure_matches(base) && closure_matches(extended);

  const auto strong = RelationKind::StrongCommonality;
  const auto weak = RelationKind::WeakCommonality;
  ok = ok && base.relation(13, 10) == strong && base.relation(14, 10) == strong;
  ok = ok && !base.relation(13, 11) && !base.relation(14, 11);
  ok = ok && base.relation(10, 11) == weak && base.relation(11, 10) == weak;
  ok = ok && base.relation(5, 9) == strong && base.relation(10, 12) == strong;
  ok = ok && extended.relation(11, 12) == strong;
  ok = ok && extended.relation(13, 11) == strong &&
       extended.relation(14, 11) == strong;
  ok = ok && extended.relation(13, 10) == strong &&
       extended.relation(14, 10) == strong;
  const double elapsed = seconds_since(t0);
  ok = ok && elapsed < 1.0;

  report(2, ok,
         fmt("256 ordered pairs match the rule fixpoint for the default and "
             "extended configurations in %.3fs",
             elapsed));
}

// ---- criterion 3: aggregate metrics vs a brute-force recount ----

struct MetricOracle {
  double accuracy = 0;
  double micro_p = 0, micro_r = 0, micro_f1 = 0;
  double macro_p = 0, macro_r = 0, macro_f1 = 0;
};

double oracle_f1(double p, double r) {
  if (p == r) return p;
  if (p + r == 0) return 0;
  return 2 * p * r / (p + r);
}

MetricOracle brute_force_metrics(const std::vector<int>& preds,
                                 const std::vector<int>& golds) {
  MetricOracle o;
  const int n = static_cast<int>(golds.size());
  int hits = 0;
  for (int i = 0; i < n; ++i)
    if (preds[i] == golds[i]) ++hits;
  o.accuracy = static_cast<double>(hits) / n;
  o.micro_p = static_cast<double>(hits) / n;
  o.micro_r = static_cast<double>(hits) / n;
  o.micro_f1 = oracle_f1(o.micro_p, o.micro_r);
  int used = 0;
  for (int c = 1; c <= 16; ++c) {
    int tp = 0, fp = 0, fn = 0, support = 0;
    for (int i = 0; i < n; ++i) {
      if (golds[i] == c) ++support;
      if (preds[i] == c && golds[i] == c) ++tp;
      if (preds[i] == c && golds[i] != c) ++fp;
      if (preds[i] != c && golds[i] == c) ++fn;
    }
    if (support == 0) continue;
    const double p = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
    o.macro_p += p;
    o.macro_r += r;
    o.macro_f1 += oracle_f1(p, r);
    ++used;
  }
  if (used) {
    o.macro_p /= used;
    o.macro_r /= used;
    o.macro_f1 /= used;
  }
  return o;
}

void check_metric_equivalence() {
  Rng rng(9001);
  constexpr double kTol = 1e-12;
  int trials = 0;
  bool ok = true;
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const int n = 8 + static_cast<int>(rng.uniform_below(72));
    const int span = trial % 3 == 2 ? 9 : 16;  // leave zero-support classes
    std::vector<int> preds, golds;
    for (int i = 0; i < n; ++i) {
      preds.push_back(1 + static_cast<int>(rng.uniform_below(span)));
      golds.push_back(1 + static_cast<int>(rng.uniform_below(span)));
    }
    const auto got = compute_metrics_ids(preds, golds);
    const auto want = brute_force_metrics(preds, golds);
    ok = ok && std::fabs(got.accuracy - want.accuracy) <= kTol &&
         std::fabs(got.micro_p - want.micro_p) <= kTol &&
         std::fabs(got.micro_r - want.micro_r) <= kTol &&
         std::fabs(got.micro_f1 - want.micro_f1) <= kTol &&
         std::fabs(got.macro_p - want.macro_p) <= kTol &&
         std::fabs(got.macro_r - want.macro_r) <= kTol &&
         std::fabs(got.macro_f1 - want.macro_f1) <= kTol;
    ok = ok && got.micro_f1 == got.accuracy;
    ++trials;
  }
  report(3, ok,
         fmt("%.0f random single-label instances agree with the TP/FP/FN "
             "recount to 1e-12 and micro-F1 equals accuracy exactly",
             static_cast<double>(trials)));
}

// ---- criterion 4: ranking protocol on the bundled 66-item fixture ----

void check_topk_fixture() {
  std::ifstream in(testsupport::data_path("fixtures/topk66.jsonl"));
  if (!in) throw LoadError("cannot open topk66.jsonl");
  std::vector<std::vector<double>> scores;
  std::vector<std::set<int>> golds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    scores.push_back(j.at("scores").get<std::vector<double>>());
    const auto ids = j.at("gold").get<std::vector<int>>();
    golds.emplace_back(ids.begin(), ids.end());
  }
  const auto r = topk_protocol(scores, golds);
  const bool ok = scores.size() == 66 &&
                  std::fabs(r.hit_rate_exact - 58.0 / 66.0) <= 1e-4 &&
                  std::fabs(r.cumulative_rates.at(1) - 64.0 / 66.0) <= 1e-4 &&
                  r.hit_rate_at_5 == 1.0;
  report(4, ok,
         fmt("66 items: exact hit rate %.4f, one-extra rate %.4f, top-5 rate "
             "%.0f",
             r.hit_rate_exact, r.cumulative_rates.at(1), r.hit_rate_at_5));
}

// ---- criteria 5 and 7 share one desk-scale training run ----

std::optional<Model> g_desk_model;
DatasetSplit g_desk_split;

void check_desk_scale_training() {
  const auto t0 = Clock::now();
  g_desk_split = testsupport::synthetic_split(80);
  ModelConfig cfg;  // stock regimen: 2 epochs, default rate, per-class BCE
  auto model = Model::train(g_desk_split, cfg, Taxonomy::built_in_default());
  const double elapsed = seconds_since(t0);

  const auto& loss = model.train_log().epoch_loss;
  bool monotone = loss.size() == static_cast<std::size_t>(cfg.epochs);
  for (std::size_t e = 1; e < loss.size(); ++e)
    monotone = monotone && loss[e] < loss[e - 1];

  int hits = 0;
  for (const auto& p : g_desk_split.ts1)
    if (model.predict(p.content, p.context).argmax_id == p.label_id) ++hits;
  const double accuracy =
      static_cast<double>(hits) / g_desk_split.ts1.size();

  const bool ok = accuracy >= 0.90 && monotone && elapsed < 300.0;
  g_desk_model.emplace(std::move(model));
  report(5, ok,
         fmt("held-out accuracy %.3f over 4 synthetic classes, per-epoch loss "
             "decreasing, trained in %.1fs",
             accuracy, elapsed));
}

void check_context_only_parity() {
  if (!g_desk_model) {
    report(7, false, "no trained model available from criterion 5");
    return;
  }
  const auto& model = *g_desk_model;
  int total = 0, valid = 0, parity = 0;
  for (const auto& p : g_desk_split.ts1) {
    const auto pair_pred = model.predict(p.content, p.context);
    const auto ctx_pred = model.predict("", p.context);
    ++total;
    bool well_formed = ctx_pred.scores.size() == 16 &&
                       ctx_pred.argmax_id >= 1 && ctx_pred.argmax_id <= 16 &&
                       ctx_pred.ranked_ids.size() == 16;
    for (const double s : ctx_pred.scores)
      well_formed = well_formed && std::isfinite(s) && s >= 0.0 && s <= 1.0;
    const std::set<int> uniq(ctx_pred.ranked_ids.begin(),
                             ctx_pred.ranked_ids.end());
    well_formed = well_formed && uniq.size() == 16;
    if (well_formed) ++valid;
    if (ctx_pred.argmax_id == pair_pred.argmax_id) ++parity;
  }
  const double rate = static_cast<double>(parity) / total;
  const bool ok = valid == total && rate >= 0.80;
  report(7, ok,
         fmt("context-only predictions well formed on %.0f items, argmax "
             "parity with pair input %.3f",
             static_cast<double>(valid), rate));
}

// ---- criterion 6: pairing caps against a combinatorial recount ----

Svo make_svo(int label, const std::string& tag, bool causal,
             bool context_causal) {
  Svo s;
  s.subject = "attackers";
  s.verb = "act";
  s.verb_surface = "act";
  s.object = tag;
  s.functionality_id = label;
  s.causal = causal;
  s.context_causal = context_causal;
  s.sentence_ref = {"doc-" + tag, 0};
  return s;
}

std::vector<Svo> random_corpus(Rng& rng) {
  std::vector<Svo> svos;
  for (int label = 1; label <= 16; ++label) {
    const int n = static_cast<int>(rng.uniform_below(21));
    for (int i = 0; i < n; ++i)
      svos.push_back(make_svo(label,
                              "c" + std::to_string(label) + "-" +
                                  std::to_string(i),
                              rng.uniform_below(4) == 0,
                              rng.uniform_below(3) == 0));
  }
  return svos;
}

long stage1_candidates(const std::vector<Svo>& svos, int label) {
  std::vector<const Svo*> eligible;
  for (const auto& s : svos) {
    if (s.functionality_id != label) continue;
    const bool gated = (label == 6 || label == 14) && !s.causal;
    if (gated && !s.context_causal) continue;
    eligible.push_back(&s);
  }
  if (eligible.empty()) return 0;
  if (eligible.size() == 1) return 1;
  std::set<std::pair<std::string, std::string>> distinct;
  for (const auto* a : eligible)
    for (const auto* b : eligible)
      if (a != b) distinct.insert({a->text(), b->text()});
  return static_cast<long>(distinct.size());
}

long stage2_candidates(const std::vector<Svo>& svos,
                       const std::map<int, std::vector<std::string>>& positives,
                       int label) {
  const auto it = positives.find(label);
  if (it == positives.end() || it->second.empty()) return 0;
  std::set<std::string> texts;
  for (const auto& s : svos)
    if (s.functionality_id == label) texts.insert(s.text());
  return static_cast<long>(texts.size()) *
         static_cast<long>(it->second.size());
}

long stage3_candidates(const std::vector<Svo>& svos,
                       const std::map<std::string, std::string>& docs,
                       int label) {
  std::set<std::pair<std::string, std::string>> distinct;
  for (const auto& s : svos) {
    if (s.functionality_id != label) continue;
    const auto it = docs.find(s.sentence_ref.doc_id);
    if (it != docs.end()) distinct.insert({s.text(), it->second});
  }
  return static_cast<long>(distinct.size());
}

void check_pairing_caps() {
  Rng rng(31337);
  testsupport::TempDir dir("acceptance-pairing");
  const auto tax = Taxonomy::built_in_default();
  bool ok = true;
  int trial = 0;
  for (; trial < 50 && ok; ++trial) {
    const auto svos = random_corpus(rng);
    PairingConfig cfg;
    cfg.seed = 1000 + trial;
    cfg.tau1 = trial % 2 == 0 ? 600 : 5 + static_cast<int>(rng.uniform_below(20));
    cfg.tau2 = trial % 3 == 0 ? 600 : 4 + static_cast<int>(rng.uniform_below(12));
    cfg.tau3 = trial % 2 == 1 ? 600 : 3 + static_cast<int>(rng.uniform_below(10));

    std::map<int, std::vector<std::string>> positives;
    for (const int f : {3, 9, 12}) {
      const int k = 1 + static_cast<int>(rng.uniform_below(3));
      for (int i = 0; i < k; ++i)
        positives[f].push_back("manual class " + std::to_string(f) +
                               " sentence " + std::to_string(i));
    }
    std::map<std::string, std::string> docs;
    for (const auto& s : svos)
      if (trial % 2 == 0 || rng.uniform_below(4) != 0)
        docs[s.sentence_ref.doc_id] = "advisory for " + s.sentence_ref.doc_id;

    const auto build = [&] {
      auto all = build_stage1(svos, cfg);
      const auto s2 = build_stage2(svos, positives, cfg);
      const auto s3 = build_stage3(svos, docs, cfg);
      all.insert(all.end(), s2.begin(), s2.end());
      all.insert(all.end(), s3.begin(), s3.end());
      return all;
    };
    const auto pairs = build();

    std::map<std::pair<std::string, int>, long> counts;
    for (const auto& p : pairs) ++counts[{p.stage, p.label_id}];
    const auto got = [&](const char* stage, int label) {
      const auto it = counts.find({stage, label});
      return it == counts.end() ? 0L : it->second;
    };
    for (int label = 1; label <= 16 && ok; ++label) {
      const long got1 = got("1", label);
      const long got2 = got("2", label);
      const long got3 = got("3", label);
      ok = ok && got1 <= cfg.tau1 && got2 <= cfg.tau2 && got3 <= cfg.tau3;
      ok = ok &&
           got1 == std::min<long>(stage1_candidates(svos, label), cfg.tau1);
      ok = ok && got2 == std::min<long>(
                             stage2_candidates(svos, positives, label),
                             cfg.tau2);
      ok = ok &&
           got3 ==
               std::min<long>(stage3_candidates(svos, docs, label), cfg.tau3);
    }

    const auto again = build();
    const auto path_a = dir.sub("a.jsonl");
    const auto path_b = dir.sub("b.jsonl");
    write_pairs_jsonl(pairs, path_a, &tax);
    write_pairs_jsonl(again, path_b, &tax);
    const auto bytes_a = testsupport::read_file(path_a);
    ok = ok && !bytes_a.empty() && bytes_a == testsupport::read_file(path_b);
  }
  report(6, ok,
         fmt("%.0f random corpora: per-class per-stage counts equal the "
             "capped recount and same-seed builds serialize byte-identically",
             static_cast<double>(trial)));
}

// ---- criterion 8: cached external-baseline replay ----

void check_baseline_replay() {
  const auto items = read_baseline_items_jsonl(
      testsupport::data_path("fixtures/baseline_items.jsonl"));
  ReplayClient client(
      testsupport::data_path("fixtures/baseline_transcript.jsonl"));
  const auto [records, summary] = llm_baseline_eval(client, items, false);

  const std::set<std::string> reference_hits = {
      "CVE-2020-3312", "CVE-2019-1703", "CVE-2019-3707", "CVE-2018-15784"};
  std::set<std::string> got;
  for (const auto& r : records)
    if (r.correct) got.insert(r.cve_id);

  bool ok = items.size() == 19 && summary.total == 19 &&
            summary.unparsed == 0 && summary.errored == 0;
  for (const auto& id : reference_hits) ok = ok && got.count(id) == 1;
  // CVE-2020-5378 is recorded as a miss in the reference marking even though
  // its cached prediction carries the gold id; strict id equality has to
  // score it, so the replay totals 5 and the marked subset stays at 4.
  ok = ok && got.size() == 5 && got.count("CVE-2020-5378") == 1;
  ok = ok && summary.total - summary.correct == 14;

  report(8, ok,
         "offline replay of 19 cached rows: all 4 reference hits reproduce "
         "and 14 rows miss (4/19 by the reference marking, 79% failure); "
         "strict id matching also scores CVE-2020-5378, whose cached "
         "prediction equals its gold id");
}

// ---- criterion 9: end-to-end pipeline through the CLI ----

void check_cli_pipeline() {
  namespace fs = std::filesystem;
  const auto t0 = Clock::now();
  testsupport::TempDir dir("acceptance-cli");
  const std::string ws = dir.sub("ws");

  const auto step = [&](const std::string& tag, const std::string& args) {
    const auto r = testsupport::run_cli(args, dir, tag);
    if (r.exit_code != 0)
      throw ValidationError("step '" + tag + "' exited with " +
                            std::to_string(r.exit_code) + ": " + r.err);
    return r;
  };

  step("ingest", "--store " + ws + " ingest nvd --feed " +
                     testsupport::data_path("fixtures/nvd_feed.json"));
  step("extract", "--store " + ws + " extract");
  step("build", "--store " + ws + " build-dataset --train-fraction 0.5");
  step("train", "--store " + ws + " train --data " + ws +
                    "/datasets/default --config " +
                    testsupport::data_path("fixtures/model_tiny.json"));
  const auto eval =
      step("evaluate", "--store " + ws + " --json evaluate --artifact " + ws +
                           "/artifacts/default --data " + ws +
                           "/datasets/default --split ts1");
  const double elapsed = seconds_since(t0);

  const json ej = json::parse(eval.out);
  bool ok = ej.at("metrics").contains("accuracy") &&
            ej.at("confusion").size() == 16;
  for (const char* manifest :
       {"ingest-nvd.json", "extract.json", "build-dataset.json", "train.json",
        "evaluate.json"})
    ok = ok && fs::exists(fs::path(ws) / "manifests" / manifest);
  ok = ok && fs::exists(fs::path(ws) / "artifacts" / "default" / "weights.bin");
  ok = ok &&
       fs::exists(fs::path(ws) / "artifacts" / "default" / "eval-ts1.json");
  ok = ok && elapsed < 600.0;

  report(9, ok,
         fmt("ingest, extract, build-dataset, train, evaluate all exited 0 "
             "with metrics, confusion, and manifests in %.1fs",
             elapsed));
}

}  // namespace

int main() {
  criterion(1, check_extraction_fidelity);
  criterion(2, check_taxonomy_closure);
  criterion(3, check_metric_equivalence);
  criterion(4, check_topk_fixture);
  criterion(5, check_desk_scale_training);
  criterion(6, check_pairing_caps);
  criterion(7, check_context_only_parity);
  criterion(8, check_baseline_replay);
  criterion(9, check_cli_pipeline);
  std::printf("%d of 9 criteria passed\n", 9 - g_failures);
  return g_failures;
}
