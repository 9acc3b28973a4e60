#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cvemap/extractor.hpp"
#include "cvemap/taxonomy.hpp"

namespace cvemap {

struct PairProvenance {
  std::string content_source;
  std::string context_source;
};

// One (content, context) training record. Stage "1": SVO paired with a
// sibling SVO of the same class; "2": SVO paired with a hand-written
// positive sentence; "3": SVO paired with its full source document;
// "manual": an externally labeled evaluation record.
struct LabeledPair {
  std::string content;
  std::string context;
  int label_id = 0;
  std::string stage;
  PairProvenance provenance;

  bool operator==(const LabeledPair& o) const {
    return content == o.content && context == o.context &&
           label_id == o.label_id && stage == o.stage &&
           provenance.content_source == o.provenance.content_source &&
           provenance.context_source == o.provenance.context_source;
  }
};

struct PairingConfig {
  int tau1 = 600;
  int tau2 = 600;
  int tau3 = 600;
  std::uint64_t seed = 13;
  double train_fraction = 0.75;
};

struct DatasetSplit {
  std::vector<LabeledPair> train;
  std::vector<LabeledPair> ts1;  // held-out fraction of the weak pairs
  std::vector<LabeledPair> ts2;  // externally labeled records
};

// Same-class SVO pairing, capped at tau1 distinct ordered pairs per class.
// Classes 6 and 14 only admit non-causal SVOs whose source document carried
// a matching causal object. `coverage` collects classes yielding nothing.
std::vector<LabeledPair> build_stage1(const std::vector<Svo>& svos,
                                      const PairingConfig& cfg,
                                      std::vector<std::string>* coverage = nullptr);

// SVO x hand-written positive sentence, capped at tau2 per class.
std::vector<LabeledPair> build_stage2(
    const std::vector<Svo>& svos,
    const std::map<int, std::vector<std::string>>& manual_positives,
    const PairingConfig& cfg, std::vector<std::string>* coverage = nullptr);

// SVO x its full source document, capped at tau3 per class. Missing doc ids
// are collected in `errors` and skipped.
std::vector<LabeledPair> build_stage3(
    const std::vector<Svo>& svos,
    const std::map<std::string, std::string>& docs, const PairingConfig& cfg,
    std::vector<std::string>* coverage = nullptr,
    std::vector<std::string>* errors = nullptr);

// Seeded stratified split into train and ts1. A label with a single record
// goes to train; `warnings` reports those.
DatasetSplit split(const std::vector<LabeledPair>& pairs,
                   const PairingConfig& cfg,
                   std::vector<std::string>* warnings = nullptr);

void write_pairs_jsonl(const std::vector<LabeledPair>& pairs,
                       const std::string& path,
                       const Taxonomy* taxonomy = nullptr);
std::vector<LabeledPair> read_pairs_jsonl(const std::string& path);

}  // namespace cvemap
