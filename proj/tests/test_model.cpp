#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "cvemap/encoder.hpp"
#include "cvemap/errors.hpp"
#include "cvemap/model.hpp"
#include "cvemap/prediction.hpp"
#include "doctest.h"
#include "support.hpp"
#include "synthetic.hpp"

using namespace cvemap;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.epochs = 2;
  cfg.dim = 32;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.ffn = 64;
  cfg.max_tokens = 64;
  cfg.batch_size = 8;
  return cfg;
}

}  // namespace

TEST_CASE("vocabulary ranks words by frequency then spelling") {
  const auto v = Vocab::build({"b b b a a c", "a c"}, 100);
  CHECK(v.id_of("a") == Vocab::kReserved);      // 3 hits, ties beat b on order
  CHECK(v.id_of("b") == Vocab::kReserved + 1);  // 3 hits
  CHECK(v.id_of("c") == Vocab::kReserved + 2);  // 2 hits
  CHECK(v.id_of("missing") == Vocab::kUnk);
  CHECK(v.size() == 3 + Vocab::kReserved);
}

TEST_CASE("vocabulary cap keeps the most frequent words") {
  const auto v = Vocab::build({"x x x y y z"}, 2);
  CHECK(v.id_of("x") != Vocab::kUnk);
  CHECK(v.id_of("y") != Vocab::kUnk);
  CHECK(v.id_of("z") == Vocab::kUnk);
}

TEST_CASE("pair encoding layout and truncation order") {
  const auto v = Vocab::build({"alpha beta gamma delta"}, 100);
  const auto e = encode_pair(v, "alpha beta", "gamma delta", 32);
  REQUIRE(e.token_ids.size() == 7);
  CHECK(e.token_ids[0] == Vocab::kCls);
  CHECK(e.token_ids[3] == Vocab::kSep);
  CHECK(e.token_ids[6] == Vocab::kSep);
  CHECK(e.content_len == 2);

  // Context truncates before content does.
  const auto tight = encode_pair(v, "alpha beta", "gamma delta", 6);
  CHECK(tight.token_ids.size() == 6);
  CHECK(tight.content_len == 2);
  int seps = 0;
  for (int id : tight.token_ids)
    if (id == Vocab::kSep) ++seps;
  CHECK(seps == 2);

  const auto tighter = encode_pair(v, "alpha beta gamma", "delta", 5);
  CHECK(tighter.token_ids.size() == 5);
  CHECK(tighter.content_len == 2);

  CHECK_THROWS_AS(encode_pair(v, "alpha", "beta", 3), ValidationError);

  CHECK_THROWS_AS(encode_pair(v, "alpha", "", 32), ValidationError);

  // Context-only form keeps both separators.
  const auto ctx_only = encode_pair(v, "", "gamma delta", 32);
  CHECK(ctx_only.content_len == 0);
  CHECK(ctx_only.token_ids[0] == Vocab::kCls);
  CHECK(ctx_only.token_ids[1] == Vocab::kSep);
}

TEST_CASE("batch padding aligns to the longest sequence") {
  const auto v = Vocab::build({"a b c d e"}, 100);
  std::vector<EncodedPair> batch = {
      encode_pair(v, "a", "b", 32),
      encode_pair(v, "a b", "c d e", 32),
  };
  const auto width = pad_batch(batch);
  CHECK(width == batch[1].token_ids.size());
  CHECK(batch[0].token_ids.size() == width);
  CHECK(batch[0].token_ids.back() == Vocab::kPad);
}

TEST_CASE("training rejects invalid setups") {
  const auto tax = Taxonomy::built_in_default();
  DatasetSplit empty;
  CHECK_THROWS_AS(Model::train(empty, small_config(), tax), ValidationError);

  auto ds = testsupport::synthetic_split(4);
  auto bad_label = ds;
  bad_label.train[0].label_id = 42;
  CHECK_THROWS_AS(Model::train(bad_label, small_config(), tax),
                  ValidationError);

  auto cfg = small_config();
  cfg.heads = 3;  // does not divide dim=32
  CHECK_THROWS_AS(Model::train(ds, cfg, tax), ValidationError);

  auto cfg2 = small_config();
  cfg2.optimizer = "sgd";
  CHECK_THROWS_AS(Model::train(ds, cfg2, tax), ValidationError);

  auto cfg3 = small_config();
  cfg3.encoder_ref = "other-encoder";
  CHECK_THROWS_AS(Model::train(ds, cfg3, tax), ValidationError);
}

TEST_CASE("default learning rate is scaled up for the small encoder") {
  const auto tax = Taxonomy::built_in_default();
  const auto ds = testsupport::synthetic_split(6);
  auto cfg = small_config();
  cfg.epochs = 1;
  const auto m = Model::train(ds, cfg, tax);
  CHECK(m.config().learning_rate == doctest::Approx(1e-4));

  auto pinned = small_config();
  pinned.epochs = 1;
  pinned.learning_rate = 3e-5;
  const auto m2 = Model::train(ds, pinned, tax);
  CHECK(m2.config().learning_rate == doctest::Approx(3e-5));
}

TEST_CASE("training is seed deterministic and loss falls across epochs") {
  const auto tax = Taxonomy::built_in_default();
  const auto ds = testsupport::synthetic_split(20);
  auto cfg = small_config();
  cfg.epochs = 3;

  const auto a = Model::train(ds, cfg, tax);
  const auto b = Model::train(ds, cfg, tax);
  REQUIRE(a.train_log().epoch_loss.size() == 3);
  CHECK(a.train_log().epoch_loss == b.train_log().epoch_loss);
  CHECK(a.train_log().ts1_metrics.size() == 3);
  for (std::size_t e = 1; e < a.train_log().epoch_loss.size(); ++e)
    CHECK(a.train_log().epoch_loss[e] < a.train_log().epoch_loss[e - 1]);

  const auto pa = a.predict("attackers read memprobe memprobe kernel memory",
                            "the advisory reports that attackers read "
                            "memprobe memprobe kernel memory case 1");
  const auto pb = b.predict("attackers read memprobe memprobe kernel memory",
                            "the advisory reports that attackers read "
                            "memprobe memprobe kernel memory case 1");
  CHECK(pa.scores == pb.scores);
}

TEST_CASE("predictions are well formed and consistent with encoding") {
  const auto tax = Taxonomy::built_in_default();
  const auto ds = testsupport::synthetic_split(10);
  auto cfg = small_config();
  cfg.epochs = 1;
  const auto m = Model::train(ds, cfg, tax);

  const std::string content = "attackers delete wipalog wipalog log files";
  const std::string context = "the advisory reports that attackers delete "
                              "wipalog wipalog log files case 3";
  const auto p = m.predict(content, context);
  REQUIRE(p.scores.size() == 16);
  for (double s : p.scores) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }
  CHECK(p.argmax_id == p.ranked_ids.front());
  CHECK(p.ranked_ids.size() == 16);
  std::set<int> ids(p.ranked_ids.begin(), p.ranked_ids.end());
  CHECK(ids.size() == 16);
  CHECK(p.techniques == tax.techniques_for(p.argmax_id));

  const auto pe =
      m.predict_encoded(encode_pair(m.vocab(), content, context, cfg.max_tokens));
  CHECK(pe.scores == p.scores);

  CHECK_THROWS_AS(m.predict("content", ""), ValidationError);
}

TEST_CASE("top k listing is ranked, nested, and technique expanded") {
  const auto tax = Taxonomy::built_in_default();
  const auto ds = testsupport::synthetic_split(10);
  auto cfg = small_config();
  cfg.epochs = 1;
  const auto m = Model::train(ds, cfg, tax);

  const std::string context = "attackers read memprobe memprobe kernel memory";
  const auto top3 = m.predict_topk(context, 3);
  const auto top5 = m.predict_topk(context, 5);
  REQUIRE(top3.size() == 3);
  REQUIRE(top5.size() == 5);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(top3[i].functionality_id == top5[i].functionality_id);
  for (std::size_t i = 1; i < top5.size(); ++i)
    CHECK(top5[i - 1].score >= top5[i].score);
  for (const auto& e : top5)
    CHECK(e.techniques == tax.techniques_for(e.functionality_id));
  const auto all = m.predict_topk(context, 16);
  CHECK(all.size() == 16);
  CHECK_THROWS_AS(m.predict_topk(context, 0), ValidationError);
  CHECK_THROWS_AS(m.predict_topk(context, 17), ValidationError);
}

TEST_CASE("saved artifacts reload to identical predictions") {
  const auto tax = Taxonomy::built_in_default();
  const auto ds = testsupport::synthetic_split(10);
  auto cfg = small_config();
  cfg.epochs = 1;
  const auto m = Model::train(ds, cfg, tax);

  testsupport::TempDir dir("model-artifact");
  const auto art = dir.sub("artifact");
  m.save(art);

  namespace fs = std::filesystem;
  for (const char* name :
       {"config.json", "weights.bin", "tokenizer.json", "taxonomy.hash",
        "metrics.json"})
    CHECK(fs::exists(fs::path(art) / name));

  const auto weights = testsupport::read_file(art + "/weights.bin");
  REQUIRE(weights.size() > 8);
  CHECK(weights.substr(0, 8) == "CVMAPW1\n");

  const auto hash_text = testsupport::read_file(art + "/taxonomy.hash");
  REQUIRE(hash_text.size() >= 16);
  for (int i = 0; i < 16; ++i) CHECK(std::isxdigit(hash_text[i]));

  const auto loaded = Model::load(art, tax);
  const std::string content = "attackers modify confedit confedit settings";
  const std::string context = "attackers modify confedit confedit "
                              "configuration settings case 2";
  const auto p0 = m.predict(content, context);
  const auto p1 = loaded.predict(content, context);
  CHECK(p0.scores == p1.scores);

  // Round trip through save again: bytes stay stable.
  const auto art2 = dir.sub("artifact2");
  loaded.save(art2);
  CHECK(testsupport::read_file(art2 + "/weights.bin") == weights);
  CHECK(testsupport::read_file(art2 + "/tokenizer.json") ==
        testsupport::read_file(art + "/tokenizer.json"));

  // A different taxonomy must be rejected at load time.
  const auto other =
      Taxonomy::load(testsupport::data_path("taxonomy_extended.json"));
  CHECK_THROWS_AS(Model::load(art, other), LoadError);
  CHECK_THROWS_AS(Model::load(dir.sub("nope"), tax), LoadError);
}

TEST_CASE("softmax loss variant trains and predicts") {
  const auto tax = Taxonomy::built_in_default();
  const auto ds = testsupport::synthetic_split(10);
  auto cfg = small_config();
  cfg.epochs = 2;
  cfg.loss = LossKind::softmax_ce;
  const auto m = Model::train(ds, cfg, tax);
  REQUIRE(m.train_log().epoch_loss.size() == 2);
  CHECK(m.train_log().epoch_loss[1] < m.train_log().epoch_loss[0]);
  const auto p = m.predict("attackers read fileleak fileleak arbitrary files",
                           "attackers read fileleak fileleak arbitrary files");
  double sum = 0;
  for (double s : p.scores) sum += s;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("loss kind names round trip") {
  CHECK(loss_from_string(to_string(LossKind::per_class_sigmoid_bce)) ==
        LossKind::per_class_sigmoid_bce);
  CHECK(loss_from_string(to_string(LossKind::softmax_ce)) ==
        LossKind::softmax_ce);
  CHECK(loss_from_string("bce") == LossKind::per_class_sigmoid_bce);
  CHECK(loss_from_string("softmax") == LossKind::softmax_ce);
  CHECK_THROWS_AS(loss_from_string("hinge"), ValidationError);
}
