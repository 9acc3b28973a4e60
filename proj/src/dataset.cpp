#include "cvemap/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include "cvemap/errors.hpp"
#include "cvemap/rng.hpp"
#include "json.hpp"

namespace cvemap {

using nlohmann::json;

namespace {

Rng stage_rng(const PairingConfig& cfg, const std::string& tag, int label) {
  return Rng(cfg.seed ^ fnv1a64(tag + "/" + std::to_string(label)));
}

// Keeps up to `cap` of the candidate pairs: all of them in order when under
// the cap, otherwise a seeded sample without replacement in original order.
std::vector<LabeledPair> cap_pairs(std::vector<LabeledPair> candidates,
                                   int cap, Rng rng) {
  if (cap <= 0) return {};
  if (candidates.size() <= static_cast<std::size_t>(cap)) return candidates;
  auto picked = rng.sample_indices(candidates.size(),
                                   static_cast<std::size_t>(cap));
  std::sort(picked.begin(), picked.end());
  std::vector<LabeledPair> out;
  out.reserve(picked.size());
  for (auto i : picked) out.push_back(std::move(candidates[i]));
  return out;
}

std::vector<LabeledPair> dedup(std::vector<LabeledPair> pairs) {
  std::set<std::tuple<std::string, std::string, int>> seen;
  std::vector<LabeledPair> out;
  for (auto& p : pairs)
    if (seen.insert({p.content, p.context, p.label_id}).second)
      out.push_back(std::move(p));
  return out;
}

std::string svo_source(const Svo& s) {
  return "svo:" + s.sentence_ref.doc_id + "#" +
         std::to_string(s.sentence_ref.sentence_index);
}

// Every class outside `produced` (and not already noted for another reason)
// gets a coverage line, so gaps in the weak dataset are visible per stage.
void note_empty_classes(std::vector<std::string>* coverage,
                        const std::set<int>& produced, const char* stage,
                        const std::set<int>& already_noted) {
  if (!coverage) return;
  for (int f = 1; f <= kNumClasses; ++f)
    if (!produced.count(f) && !already_noted.count(f))
      coverage->push_back(std::string(stage) + ": class " + std::to_string(f) +
                          " produced no pairs");
}

// Classes 6 and 14 describe impacts; a non-causal SVO may represent them
// only when its source document carried a matching causal object.
bool admissible_stage1(const Svo& s) {
  if (s.causal) return true;
  if (s.functionality_id == 6 || s.functionality_id == 14)
    return s.context_causal;
  return true;
}

std::map<int, std::vector<const Svo*>> group_by_class(
    const std::vector<Svo>& svos, bool stage1_gate) {
  std::map<int, std::vector<const Svo*>> by_class;
  for (const auto& s : svos) {
    if (stage1_gate && !admissible_stage1(s)) continue;
    by_class[s.functionality_id].push_back(&s);
  }
  return by_class;
}

}  // namespace

std::vector<LabeledPair> build_stage1(const std::vector<Svo>& svos,
                                      const PairingConfig& cfg,
                                      std::vector<std::string>* coverage) {
  std::vector<LabeledPair> out;
  std::set<int> produced;
  for (const auto& [f, list] : group_by_class(svos, true)) {
    std::vector<LabeledPair> candidates;
    if (list.size() == 1) {
      LabeledPair p;
      p.content = list[0]->text();
      p.context = list[0]->text();
      p.label_id = f;
      p.stage = "1";
      p.provenance = {svo_source(*list[0]), svo_source(*list[0])};
      candidates.push_back(std::move(p));
    } else {
      for (std::size_t i = 0; i < list.size(); ++i)
        for (std::size_t j = 0; j < list.size(); ++j) {
          if (i == j) continue;
          LabeledPair p;
          p.content = list[i]->text();
          p.context = list[j]->text();
          p.label_id = f;
          p.stage = "1";
          p.provenance = {svo_source(*list[i]), svo_source(*list[j])};
          candidates.push_back(std::move(p));
        }
    }
    auto kept = cap_pairs(dedup(std::move(candidates)), cfg.tau1,
                          stage_rng(cfg, "stage1", f));
    if (!kept.empty()) produced.insert(f);
    out.insert(out.end(), std::make_move_iterator(kept.begin()),
               std::make_move_iterator(kept.end()));
  }
  note_empty_classes(coverage, produced, "stage1", {});
  return out;
}

std::vector<LabeledPair> build_stage2(
    const std::vector<Svo>& svos,
    const std::map<int, std::vector<std::string>>& manual_positives,
    const PairingConfig& cfg, std::vector<std::string>* coverage) {
  for (const auto& [f, texts] : manual_positives) {
    (void)texts;
    if (f < 1 || f > kNumClasses)
      throw ValidationError("manual positives reference class " +
                            std::to_string(f));
  }
  std::vector<LabeledPair> out;
  std::set<int> produced, noted;
  for (const auto& [f, list] : group_by_class(svos, false)) {
    const auto it = manual_positives.find(f);
    if (it == manual_positives.end() || it->second.empty()) {
      if (coverage)
        coverage->push_back("stage2: class " + std::to_string(f) +
                            " has no manual positives");
      noted.insert(f);
      continue;
    }
    std::vector<LabeledPair> candidates;
    for (const auto* s : list)
      for (const auto& positive : it->second) {
        LabeledPair p;
        p.content = s->text();
        p.context = positive;
        p.label_id = f;
        p.stage = "2";
        p.provenance = {svo_source(*s), "manual"};
        candidates.push_back(std::move(p));
      }
    auto kept = cap_pairs(dedup(std::move(candidates)), cfg.tau2,
                          stage_rng(cfg, "stage2", f));
    if (!kept.empty()) produced.insert(f);
    out.insert(out.end(), std::make_move_iterator(kept.begin()),
               std::make_move_iterator(kept.end()));
  }
  note_empty_classes(coverage, produced, "stage2", noted);
  return out;
}

std::vector<LabeledPair> build_stage3(
    const std::vector<Svo>& svos,
    const std::map<std::string, std::string>& docs, const PairingConfig& cfg,
    std::vector<std::string>* coverage, std::vector<std::string>* errors) {
  std::vector<LabeledPair> out;
  std::set<int> produced;
  for (const auto& [f, list] : group_by_class(svos, false)) {
    std::vector<LabeledPair> candidates;
    for (const auto* s : list) {
      const auto it = docs.find(s->sentence_ref.doc_id);
      if (it == docs.end()) {
        if (errors)
          errors->push_back("stage3: class " + std::to_string(f) +
                            " SVO references missing document '" +
                            s->sentence_ref.doc_id + "'");
        continue;
      }
      LabeledPair p;
      p.content = s->text();
      p.context = it->second;
      p.label_id = f;
      p.stage = "3";
      p.provenance = {svo_source(*s), "doc:" + s->sentence_ref.doc_id};
      candidates.push_back(std::move(p));
    }
    auto kept = cap_pairs(dedup(std::move(candidates)), cfg.tau3,
                          stage_rng(cfg, "stage3", f));
    if (!kept.empty()) produced.insert(f);
    out.insert(out.end(), std::make_move_iterator(kept.begin()),
               std::make_move_iterator(kept.end()));
  }
  note_empty_classes(coverage, produced, "stage3", {});
  return out;
}

DatasetSplit split(const std::vector<LabeledPair>& pairs,
                   const PairingConfig& cfg,
                   std::vector<std::string>* warnings) {
  if (pairs.empty()) throw ValidationError("cannot split an empty pair list");
  if (cfg.train_fraction < 0.0 || cfg.train_fraction > 1.0)
    throw ValidationError("train_fraction must be within [0, 1]");

  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    by_label[pairs[i].label_id].push_back(i);

  DatasetSplit out;
  for (auto& [label, idxs] : by_label) {
    auto rng = stage_rng(cfg, "split", label);
    rng.shuffle(idxs);
    std::size_t train_n = static_cast<std::size_t>(
        std::lround(static_cast<double>(idxs.size()) * cfg.train_fraction));
    if (idxs.size() == 1) {
      train_n = 1;
      if (warnings)
        warnings->push_back("label " + std::to_string(label) +
                            " has a single record; assigned to train");
    }
    for (std::size_t k = 0; k < idxs.size(); ++k) {
      if (k < train_n)
        out.train.push_back(pairs[idxs[k]]);
      else
        out.ts1.push_back(pairs[idxs[k]]);
    }
  }
  return out;
}

void write_pairs_jsonl(const std::vector<LabeledPair>& pairs,
                       const std::string& path, const Taxonomy* taxonomy) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open for writing: " + path);
  for (const auto& p : pairs) {
    json j;
    j["content"] = p.content;
    j["context"] = p.context;
    j["label_id"] = p.label_id;
    j["label_name"] =
        taxonomy ? taxonomy->functionality(p.label_id).name : std::string();
    j["stage"] = p.stage;
    j["provenance"] = {{"content_source", p.provenance.content_source},
                       {"context_source", p.provenance.context_source}};
    out << j.dump() << '\n';
  }
}

std::vector<LabeledPair> read_pairs_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open: " + path);
  std::vector<LabeledPair> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw LoadError(where + ": " + e.what());
    }
    LabeledPair p;
    if (!j.contains("label_id") || !j.at("label_id").is_number_integer())
      throw LoadError(where + ": record is missing integer label_id");
    p.label_id = j.at("label_id").get<int>();
    if (p.label_id < 1 || p.label_id > kNumClasses)
      throw LoadError(where + ": label_id out of range 1.." +
                      std::to_string(kNumClasses));
    p.content = j.value("content", "");
    p.context = j.value("context", "");
    p.stage = j.value("stage", "manual");
    if (p.stage != "1" && p.stage != "2" && p.stage != "3" &&
        p.stage != "manual")
      throw LoadError(where + ": unknown stage '" + p.stage + "'");
    if (j.contains("provenance")) {
      const auto& pr = j.at("provenance");
      p.provenance.content_source = pr.value("content_source", "");
      p.provenance.context_source = pr.value("context_source", "");
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace cvemap
