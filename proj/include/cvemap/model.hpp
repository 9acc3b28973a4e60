#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cvemap/dataset.hpp"
#include "cvemap/encoder.hpp"
#include "cvemap/evalkit.hpp"
#include "cvemap/prediction.hpp"
#include "cvemap/taxonomy.hpp"

namespace cvemap {

enum class LossKind { per_class_sigmoid_bce, softmax_ce };

struct ModelConfig {
  // "tiny" selects the bundled small trainable encoder; anything else names
  // an external pretrained encoder directory (resolved at load time).
  std::string encoder_ref = "tiny";
  int num_classes = kNumClasses;
  int epochs = 2;
  // Left at this default, the tiny encoder trains at 10x the rate.
  double learning_rate = 1e-5;
  std::string optimizer = "adam";
  LossKind loss = LossKind::per_class_sigmoid_bce;
  int max_tokens = 512;
  std::uint64_t seed = 13;
  int batch_size = 16;

  // tiny-encoder shape
  int dim = 64;
  int layers = 2;
  int heads = 2;
  int ffn = 128;
  std::size_t vocab_cap = 8000;
};

struct TrainLog {
  std::vector<double> epoch_loss;
  std::vector<MetricReport> ts1_metrics;  // one per epoch when ts1 present
};

struct TopkEntry {
  int functionality_id = 0;
  double score = 0;
  std::vector<std::string> techniques;
};

// Two-input classifier over [CLS] content [SEP] context [SEP]. Immutable
// once trained or loaded; safe for concurrent inference.
class Model {
public:
  static Model train(const DatasetSplit& ds, const ModelConfig& cfg,
                     const Taxonomy& taxonomy);
  static Model load(const std::string& dir, const Taxonomy& taxonomy);
  void save(const std::string& dir) const;

  // Content may be empty (context-only mode); context may not.
  Prediction predict(const std::string& content,
                     const std::string& context) const;
  Prediction predict_encoded(const EncodedPair& pair) const;

  // Context-only inference, first k ranked classes with technique expansion.
  std::vector<TopkEntry> predict_topk(const std::string& context, int k) const;

  const ModelConfig& config() const { return cfg_; }
  const Vocab& vocab() const { return vocab_; }
  const TrainLog& train_log() const { return log_; }
  const Taxonomy& taxonomy() const { return taxonomy_; }
  std::uint64_t taxonomy_hash() const { return taxonomy_hash_; }

  // Opaque encoder state; defined in the implementation file.
  struct Impl;

private:
  Model();

  std::shared_ptr<const Impl> impl_;
  ModelConfig cfg_;
  Vocab vocab_;
  Taxonomy taxonomy_;
  std::uint64_t taxonomy_hash_ = 0;
  TrainLog log_;
};

std::uint64_t taxonomy_fingerprint(const Taxonomy& t);

const char* to_string(LossKind k);
LossKind loss_from_string(const std::string& s);

}  // namespace cvemap
