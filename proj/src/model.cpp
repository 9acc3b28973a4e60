#include "cvemap/model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "cvemap/errors.hpp"
#include "cvemap/evalkit.hpp"
#include "cvemap/rng.hpp"
#include "json.hpp"

namespace cvemap {

namespace fs = std::filesystem;
using Eigen::MatrixXf;
using Eigen::RowVectorXf;
using Eigen::VectorXf;
using nlohmann::json;

namespace {

constexpr float kLnEps = 1e-5f;
constexpr char kWeightsMagic[8] = {'C', 'V', 'M', 'A', 'P', 'W', '1', '\n'};

struct Param {
  MatrixXf w, g, m, v;
  void init(int rows, int cols) {
    w = MatrixXf::Zero(rows, cols);
    g = w;
    m = w;
    v = w;
  }
};

struct LayerWeights {
  Param ln1_g, ln1_b;
  Param wq, bq, wk, bk, wv, bv, wo, bo;
  Param ln2_g, ln2_b;
  Param w1, b1, w2, b2;
};

int true_length(const std::vector<int>& ids) {
  int t = static_cast<int>(ids.size());
  while (t > 0 && ids[t - 1] == Vocab::kPad) --t;
  return t;
}

}  // namespace

struct Model::Impl {
  Param embed;
  std::vector<LayerWeights> layers;
  Param lnf_g, lnf_b;
  Param head_w, head_b;

  std::vector<Param*> params() {
    std::vector<Param*> out;
    out.push_back(&embed);
    for (auto& l : layers) {
      for (Param* p : {&l.ln1_g, &l.ln1_b, &l.wq, &l.bq, &l.wk, &l.bk, &l.wv,
                       &l.bv, &l.wo, &l.bo, &l.ln2_g, &l.ln2_b, &l.w1, &l.b1,
                       &l.w2, &l.b2})
        out.push_back(p);
    }
    out.push_back(&lnf_g);
    out.push_back(&lnf_b);
    out.push_back(&head_w);
    out.push_back(&head_b);
    return out;
  }
  std::vector<const Param*> params() const {
    auto mutable_list = const_cast<Impl*>(this)->params();
    return {mutable_list.begin(), mutable_list.end()};
  }
};

namespace {

void allocate(Model::Impl& impl, const ModelConfig& cfg, int vocab_size) {
  impl.embed.init(vocab_size, cfg.dim);
  impl.layers.resize(cfg.layers);
  for (auto& l : impl.layers) {
    l.ln1_g.init(1, cfg.dim);
    l.ln1_b.init(1, cfg.dim);
    l.wq.init(cfg.dim, cfg.dim);
    l.bq.init(1, cfg.dim);
    l.wk.init(cfg.dim, cfg.dim);
    l.bk.init(1, cfg.dim);
    l.wv.init(cfg.dim, cfg.dim);
    l.bv.init(1, cfg.dim);
    l.wo.init(cfg.dim, cfg.dim);
    l.bo.init(1, cfg.dim);
    l.ln2_g.init(1, cfg.dim);
    l.ln2_b.init(1, cfg.dim);
    l.w1.init(cfg.dim, cfg.ffn);
    l.b1.init(1, cfg.ffn);
    l.w2.init(cfg.ffn, cfg.dim);
    l.b2.init(1, cfg.dim);
  }
  impl.lnf_g.init(1, cfg.dim);
  impl.lnf_b.init(1, cfg.dim);
  impl.head_w.init(cfg.dim, cfg.num_classes);
  impl.head_b.init(1, cfg.num_classes);
}

void init_weights(Model::Impl& impl, Rng& rng) {
  auto randn = [&](Param& p, float scale) {
    for (int i = 0; i < p.w.rows(); ++i)
      for (int j = 0; j < p.w.cols(); ++j)
        p.w(i, j) = static_cast<float>(rng.normal(0.0, scale));
  };
  randn(impl.embed, 0.1f);
  for (auto& l : impl.layers) {
    l.ln1_g.w.setOnes();
    l.ln2_g.w.setOnes();
    randn(l.wq, 0.05f);
    randn(l.wk, 0.05f);
    // The value path starts wider than query/key; the pooled vector has to
    // vary with the input while the head is still near zero.
    randn(l.wv, 0.25f);
    randn(l.wo, 0.25f);
    randn(l.w1, 0.05f);
    randn(l.w2, 0.05f);
  }
  impl.lnf_g.w.setOnes();
  // The classifier head starts at zero so initial scores are uniform.
}

MatrixXf layernorm_fwd(const MatrixXf& x, const Param& g, const Param& b,
                       MatrixXf& xhat, VectorXf& inv_std) {
  const int t = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  xhat.resize(t, d);
  inv_std.resize(t);
  MatrixXf y(t, d);
  for (int i = 0; i < t; ++i) {
    const float mu = x.row(i).mean();
    const float var = (x.row(i).array() - mu).square().mean();
    const float is = 1.0f / std::sqrt(var + kLnEps);
    inv_std(i) = is;
    xhat.row(i) = ((x.row(i).array() - mu) * is).matrix();
    y.row(i) =
        xhat.row(i).cwiseProduct(g.w.row(0)) + b.w.row(0);
  }
  return y;
}

MatrixXf layernorm_bwd(const MatrixXf& dy, const MatrixXf& xhat,
                       const VectorXf& inv_std, Param& g, Param& b) {
  const int t = static_cast<int>(dy.rows());
  const int d = static_cast<int>(dy.cols());
  MatrixXf dx(t, d);
  for (int i = 0; i < t; ++i) {
    g.g.row(0) += dy.row(i).cwiseProduct(xhat.row(i));
    b.g.row(0) += dy.row(i);
    const RowVectorXf dxhat = dy.row(i).cwiseProduct(g.w.row(0));
    const float m1 = dxhat.mean();
    const float m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
    dx.row(i) =
        ((dxhat.array() - m1 - xhat.row(i).array() * m2) * inv_std(i))
            .matrix();
  }
  return dx;
}

struct LayerCache {
  MatrixXf x_in;
  MatrixXf a_hat, a;
  VectorXf a_inv;
  MatrixXf q, k, v, concat;
  std::vector<MatrixXf> p;
  MatrixXf x_mid;
  MatrixXf b_hat, b;
  VectorXf b_inv;
  MatrixXf h;
};

struct SeqCache {
  std::vector<int> ids;
  std::vector<LayerCache> layers;
  MatrixXf x_final;
  MatrixXf f_hat;
  VectorXf f_inv;
  RowVectorXf x_cls;
  RowVectorXf z;
};

SeqCache forward(const Model::Impl& impl, const ModelConfig& cfg,
                 const std::vector<int>& raw_ids) {
  const int t = true_length(raw_ids);
  if (t == 0) throw ValidationError("cannot run the encoder on an empty sequence");
  SeqCache c;
  c.ids.assign(raw_ids.begin(), raw_ids.begin() + t);
  const int d = cfg.dim;
  const int heads = cfg.heads;
  const int dk = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dk));

  MatrixXf x(t, d);
  for (int i = 0; i < t; ++i) x.row(i) = impl.embed.w.row(c.ids[i]);

  c.layers.resize(impl.layers.size());
  for (std::size_t li = 0; li < impl.layers.size(); ++li) {
    const LayerWeights& w = impl.layers[li];
    LayerCache& lc = c.layers[li];
    lc.x_in = x;
    lc.a = layernorm_fwd(x, w.ln1_g, w.ln1_b, lc.a_hat, lc.a_inv);
    lc.q = lc.a * w.wq.w;
    lc.q.rowwise() += w.bq.w.row(0);
    lc.k = lc.a * w.wk.w;
    lc.k.rowwise() += w.bk.w.row(0);
    lc.v = lc.a * w.wv.w;
    lc.v.rowwise() += w.bv.w.row(0);
    lc.concat.resize(t, d);
    lc.p.resize(heads);
    for (int h = 0; h < heads; ++h) {
      const auto qh = lc.q.middleCols(h * dk, dk);
      const auto kh = lc.k.middleCols(h * dk, dk);
      const auto vh = lc.v.middleCols(h * dk, dk);
      MatrixXf s = (qh * kh.transpose()) * scale;
      MatrixXf& p = lc.p[h];
      p.resize(t, t);
      for (int i = 0; i < t; ++i) {
        const float mx = s.row(i).maxCoeff();
        p.row(i) = (s.row(i).array() - mx).exp().matrix();
        p.row(i) /= p.row(i).sum();
      }
      lc.concat.middleCols(h * dk, dk) = p * vh;
    }
    MatrixXf attn = lc.concat * w.wo.w;
    attn.rowwise() += w.bo.w.row(0);
    lc.x_mid = lc.x_in + attn;
    lc.b = layernorm_fwd(lc.x_mid, w.ln2_g, w.ln2_b, lc.b_hat, lc.b_inv);
    MatrixXf pre = lc.b * w.w1.w;
    pre.rowwise() += w.b1.w.row(0);
    lc.h = pre.cwiseMax(0.0f);
    MatrixXf ffn = lc.h * w.w2.w;
    ffn.rowwise() += w.b2.w.row(0);
    x = lc.x_mid + ffn;
  }
  c.x_final = x;
  const MatrixXf xf =
      layernorm_fwd(x, impl.lnf_g, impl.lnf_b, c.f_hat, c.f_inv);
  c.x_cls = xf.row(0);
  c.z = c.x_cls * impl.head_w.w + impl.head_b.w.row(0);
  return c;
}

void backward(Model::Impl& impl, const ModelConfig& cfg, const SeqCache& c,
              const RowVectorXf& dz) {
  const int t = static_cast<int>(c.ids.size());
  const int d = cfg.dim;
  const int heads = cfg.heads;
  const int dk = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dk));

  impl.head_w.g += c.x_cls.transpose() * dz;
  impl.head_b.g.row(0) += dz;
  MatrixXf dxf = MatrixXf::Zero(t, d);
  dxf.row(0) = dz * impl.head_w.w.transpose();
  MatrixXf dx = layernorm_bwd(dxf, c.f_hat, c.f_inv, impl.lnf_g, impl.lnf_b);

  for (int li = static_cast<int>(impl.layers.size()) - 1; li >= 0; --li) {
    LayerWeights& w = impl.layers[li];
    const LayerCache& lc = c.layers[li];

    // x_out = x_mid + relu(LN2(x_mid) W1 + b1) W2 + b2
    const MatrixXf& df = dx;
    w.w2.g += lc.h.transpose() * df;
    w.b2.g.row(0) += df.colwise().sum();
    MatrixXf dh = df * w.w2.w.transpose();
    MatrixXf dpre =
        dh.cwiseProduct((lc.h.array() > 0.0f).cast<float>().matrix());
    w.w1.g += lc.b.transpose() * dpre;
    w.b1.g.row(0) += dpre.colwise().sum();
    const MatrixXf db = dpre * w.w1.w.transpose();
    MatrixXf dx_mid =
        dx + layernorm_bwd(db, lc.b_hat, lc.b_inv, w.ln2_g, w.ln2_b);

    // x_mid = x_in + concat Wo + bo
    w.wo.g += lc.concat.transpose() * dx_mid;
    w.bo.g.row(0) += dx_mid.colwise().sum();
    const MatrixXf dconcat = dx_mid * w.wo.w.transpose();
    MatrixXf dq = MatrixXf::Zero(t, d);
    MatrixXf dkm = MatrixXf::Zero(t, d);
    MatrixXf dv = MatrixXf::Zero(t, d);
    for (int h = 0; h < heads; ++h) {
      const auto doh = dconcat.middleCols(h * dk, dk);
      const auto kh = lc.k.middleCols(h * dk, dk);
      const auto qh = lc.q.middleCols(h * dk, dk);
      const auto vh = lc.v.middleCols(h * dk, dk);
      const MatrixXf& p = lc.p[h];
      const MatrixXf dp = doh * vh.transpose();
      dv.middleCols(h * dk, dk) = p.transpose() * doh;
      MatrixXf ds(t, t);
      for (int i = 0; i < t; ++i) {
        const float rs = dp.row(i).cwiseProduct(p.row(i)).sum();
        ds.row(i) = (p.row(i).array() * (dp.row(i).array() - rs)).matrix();
      }
      ds *= scale;
      dq.middleCols(h * dk, dk) = ds * kh;
      dkm.middleCols(h * dk, dk) = ds.transpose() * qh;
    }
    w.wq.g += lc.a.transpose() * dq;
    w.bq.g.row(0) += dq.colwise().sum();
    w.wk.g += lc.a.transpose() * dkm;
    w.bk.g.row(0) += dkm.colwise().sum();
    w.wv.g += lc.a.transpose() * dv;
    w.bv.g.row(0) += dv.colwise().sum();
    const MatrixXf da =
        dq * w.wq.w.transpose() + dkm * w.wk.w.transpose() +
        dv * w.wv.w.transpose();
    dx = dx_mid + layernorm_bwd(da, lc.a_hat, lc.a_inv, w.ln1_g, w.ln1_b);
  }
  for (int i = 0; i < t; ++i) impl.embed.g.row(c.ids[i]) += dx.row(i);
}

void adam_step(std::vector<Param*>& params, float lr, int step) {
  const float bc1 = 1.0f - std::pow(0.9f, static_cast<float>(step));
  const float bc2 = 1.0f - std::pow(0.999f, static_cast<float>(step));
  for (Param* p : params) {
    p->m = 0.9f * p->m + 0.1f * p->g;
    p->v = (0.999f * p->v.array() + 0.001f * p->g.array().square()).matrix();
    p->w.array() -=
        lr * (p->m.array() / bc1) / ((p->v.array() / bc2).sqrt() + 1e-8f);
    p->g.setZero();
  }
}

std::vector<double> scores_from_logits(const RowVectorXf& z, LossKind loss) {
  const int n = static_cast<int>(z.size());
  std::vector<double> out(n);
  if (loss == LossKind::per_class_sigmoid_bce) {
    for (int i = 0; i < n; ++i)
      out[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(z(i))));
  } else {
    const double mx = z.maxCoeff();
    double sum = 0;
    for (int i = 0; i < n; ++i) {
      out[i] = std::exp(static_cast<double>(z(i)) - mx);
      sum += out[i];
    }
    for (int i = 0; i < n; ++i) out[i] /= sum;
  }
  return out;
}

// Returns the sample loss and writes the logit gradient (already divided by
// the batch size) into dz.
double loss_and_grad(const RowVectorXf& z, int label_id, LossKind loss,
                     int batch_n, RowVectorXf& dz) {
  const int n = static_cast<int>(z.size());
  dz.resize(n);
  double total = 0;
  if (loss == LossKind::per_class_sigmoid_bce) {
    for (int i = 0; i < n; ++i) {
      const double y = (i == label_id - 1) ? 1.0 : 0.0;
      double p = 1.0 / (1.0 + std::exp(-static_cast<double>(z(i))));
      p = std::min(1.0 - 1e-7, std::max(1e-7, p));
      total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
      dz(i) = static_cast<float>((p - y) / n / batch_n);
    }
    return total / n;
  }
  const double mx = z.maxCoeff();
  double sum = 0;
  for (int i = 0; i < n; ++i) sum += std::exp(static_cast<double>(z(i)) - mx);
  const double lse = std::log(sum) + mx;
  for (int i = 0; i < n; ++i) {
    const double p = std::exp(static_cast<double>(z(i)) - lse);
    const double y = (i == label_id - 1) ? 1.0 : 0.0;
    dz(i) = static_cast<float>((p - y) / batch_n);
  }
  return lse - static_cast<double>(z(label_id - 1));
}

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw LoadError("weights file truncated");
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

json metric_to_json(const MetricReport& m) {
  json pc = json::object();
  for (const auto& [id, cm] : m.per_class)
    pc[std::to_string(id)] = {{"p", cm.p},
                              {"r", cm.r},
                              {"f1", cm.f1},
                              {"support", cm.support}};
  return {{"accuracy", m.accuracy},     {"micro_p", m.micro_p},
          {"micro_r", m.micro_r},       {"micro_f1", m.micro_f1},
          {"macro_p", m.macro_p},       {"macro_r", m.macro_r},
          {"macro_f1", m.macro_f1},     {"per_class", pc},
          {"excluded_classes", m.excluded_classes}};
}

MetricReport metric_from_json(const json& j) {
  MetricReport m;
  m.accuracy = j.value("accuracy", 0.0);
  m.micro_p = j.value("micro_p", 0.0);
  m.micro_r = j.value("micro_r", 0.0);
  m.micro_f1 = j.value("micro_f1", 0.0);
  m.macro_p = j.value("macro_p", 0.0);
  m.macro_r = j.value("macro_r", 0.0);
  m.macro_f1 = j.value("macro_f1", 0.0);
  if (j.contains("per_class"))
    for (const auto& [key, val] : j.at("per_class").items()) {
      ClassMetrics cm;
      cm.p = val.value("p", 0.0);
      cm.r = val.value("r", 0.0);
      cm.f1 = val.value("f1", 0.0);
      cm.support = val.value("support", 0);
      m.per_class[std::stoi(key)] = cm;
    }
  if (j.contains("excluded_classes"))
    m.excluded_classes = j.at("excluded_classes").get<std::vector<int>>();
  return m;
}

}  // namespace

const char* to_string(LossKind k) {
  return k == LossKind::per_class_sigmoid_bce ? "per_class_sigmoid_bce"
                                              : "softmax_ce";
}

LossKind loss_from_string(const std::string& s) {
  if (s == "per_class_sigmoid_bce" || s == "bce")
    return LossKind::per_class_sigmoid_bce;
  if (s == "softmax_ce" || s == "softmax") return LossKind::softmax_ce;
  throw ValidationError("unknown loss kind: " + s);
}

std::uint64_t taxonomy_fingerprint(const Taxonomy& t) {
  return fnv1a64(t.to_json_text());
}

Model::Model() : taxonomy_(Taxonomy::built_in_default()) {}

Model Model::train(const DatasetSplit& ds, const ModelConfig& cfg_in,
                   const Taxonomy& taxonomy) {
  ModelConfig cfg = cfg_in;
  if (cfg.num_classes <= 0) throw ValidationError("num_classes must be positive");
  if (static_cast<int>(taxonomy.functionalities().size()) != cfg.num_classes)
    throw ValidationError("taxonomy size does not match num_classes");
  if (cfg.optimizer != "adam")
    throw ValidationError("unsupported optimizer: " + cfg.optimizer);
  if (cfg.max_tokens < 4 || cfg.max_tokens > 512)
    throw ValidationError("max_tokens must be in [4, 512]");
  if (cfg.encoder_ref != "tiny")
    throw ValidationError("unknown encoder: " + cfg.encoder_ref +
                          " (only the bundled tiny encoder is available)");
  if (cfg.dim % cfg.heads != 0)
    throw ValidationError("dim must be divisible by heads");
  if (ds.train.empty()) throw ValidationError("training split is empty");
  if (cfg.encoder_ref == "tiny" && cfg.learning_rate == 1e-5)
    cfg.learning_rate = 1e-4;

  auto check_pairs = [&](const std::vector<LabeledPair>& pairs,
                         const char* which) {
    for (const auto& p : pairs) {
      if (p.label_id < 1 || p.label_id > cfg.num_classes)
        throw ValidationError(std::string(which) + " pair has label " +
                              std::to_string(p.label_id) + " outside [1, " +
                              std::to_string(cfg.num_classes) + "]");
      if (p.context.empty())
        throw ValidationError(std::string(which) + " pair has empty context");
    }
  };
  check_pairs(ds.train, "train");
  check_pairs(ds.ts1, "ts1");

  std::vector<std::string> texts;
  texts.reserve(ds.train.size() * 2);
  for (const auto& p : ds.train) {
    texts.push_back(p.content);
    texts.push_back(p.context);
  }
  Vocab vocab = Vocab::build(texts, cfg.vocab_cap);

  std::vector<EncodedPair> enc;
  enc.reserve(ds.train.size());
  for (const auto& p : ds.train)
    enc.push_back(encode_pair(vocab, p.content, p.context, cfg.max_tokens));

  auto impl = std::make_shared<Impl>();
  allocate(*impl, cfg, vocab.size());
  Rng rng(cfg.seed);
  init_weights(*impl, rng);
  auto params = impl->params();

  std::vector<EncodedPair> ts1_enc;
  ts1_enc.reserve(ds.ts1.size());
  for (const auto& p : ds.ts1)
    ts1_enc.push_back(encode_pair(vocab, p.content, p.context, cfg.max_tokens));

  TrainLog log;
  const int n = static_cast<int>(enc.size());
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    Rng erng(cfg.seed ^ fnv1a64("epoch/" + std::to_string(epoch)));
    erng.shuffle(order);

    double loss_sum = 0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int end = std::min(n, start + cfg.batch_size);
      const int batch_n = end - start;
      for (int bi = start; bi < end; ++bi) {
        const EncodedPair& ep = enc[order[bi]];
        const int label = ds.train[order[bi]].label_id;
        SeqCache c = forward(*impl, cfg, ep.token_ids);
        RowVectorXf dz;
        loss_sum += loss_and_grad(c.z, label, cfg.loss, batch_n, dz);
        backward(*impl, cfg, c, dz);
      }
      adam_step(params, static_cast<float>(cfg.learning_rate), ++step);
    }
    log.epoch_loss.push_back(loss_sum / n);

    if (!ts1_enc.empty()) {
      std::vector<Prediction> preds;
      std::vector<int> golds;
      preds.reserve(ts1_enc.size());
      for (std::size_t i = 0; i < ts1_enc.size(); ++i) {
        SeqCache c = forward(*impl, cfg, ts1_enc[i].token_ids);
        Prediction pr;
        pr.scores = scores_from_logits(c.z, cfg.loss);
        pr.ranked_ids = rank_ids(pr.scores);
        pr.argmax_id = pr.ranked_ids.front();
        preds.push_back(std::move(pr));
        golds.push_back(ds.ts1[i].label_id);
      }
      log.ts1_metrics.push_back(compute_metrics(preds, golds));
    }
  }

  Model m;
  m.impl_ = std::move(impl);
  m.cfg_ = cfg;
  m.vocab_ = std::move(vocab);
  m.taxonomy_ = taxonomy;
  m.taxonomy_hash_ = taxonomy_fingerprint(taxonomy);
  m.log_ = std::move(log);
  return m;
}

Prediction Model::predict_encoded(const EncodedPair& pair) const {
  if (!impl_) throw ValidationError("model is not initialized");
  SeqCache c = forward(*impl_, cfg_, pair.token_ids);
  Prediction pr;
  pr.scores = scores_from_logits(c.z, cfg_.loss);
  pr.ranked_ids = rank_ids(pr.scores);
  pr.argmax_id = pr.ranked_ids.front();
  pr.techniques = taxonomy_.techniques_for(pr.argmax_id);
  return pr;
}

Prediction Model::predict(const std::string& content,
                          const std::string& context) const {
  return predict_encoded(encode_pair(vocab_, content, context, cfg_.max_tokens));
}

std::vector<TopkEntry> Model::predict_topk(const std::string& context,
                                           int k) const {
  if (k < 1 || k > cfg_.num_classes)
    throw ValidationError("k must be in [1, " +
                          std::to_string(cfg_.num_classes) + "]");
  const Prediction pr = predict("", context);
  std::vector<TopkEntry> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    TopkEntry e;
    e.functionality_id = pr.ranked_ids[i];
    e.score = pr.scores[e.functionality_id - 1];
    e.techniques = taxonomy_.techniques_for(e.functionality_id);
    out.push_back(std::move(e));
  }
  return out;
}

void Model::save(const std::string& dir) const {
  if (!impl_) throw ValidationError("model is not initialized");
  fs::create_directories(dir);

  json cfg = {{"encoder_ref", cfg_.encoder_ref},
              {"num_classes", cfg_.num_classes},
              {"epochs", cfg_.epochs},
              {"learning_rate", cfg_.learning_rate},
              {"optimizer", cfg_.optimizer},
              {"loss", to_string(cfg_.loss)},
              {"max_tokens", cfg_.max_tokens},
              {"seed", cfg_.seed},
              {"batch_size", cfg_.batch_size},
              {"dim", cfg_.dim},
              {"layers", cfg_.layers},
              {"heads", cfg_.heads},
              {"ffn", cfg_.ffn},
              {"vocab_cap", cfg_.vocab_cap}};
  std::ofstream((fs::path(dir) / "config.json")) << cfg.dump(2) << "\n";

  json tok = {{"words", vocab_.words()}};
  std::ofstream((fs::path(dir) / "tokenizer.json")) << tok.dump() << "\n";

  {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(taxonomy_hash_));
    std::ofstream((fs::path(dir) / "taxonomy.hash")) << buf << "\n";
  }

  {
    json metrics = {{"epoch_loss", log_.epoch_loss}};
    json ts1 = json::array();
    for (const auto& m : log_.ts1_metrics) ts1.push_back(metric_to_json(m));
    metrics["ts1_metrics"] = ts1;
    std::ofstream((fs::path(dir) / "metrics.json")) << metrics.dump(2) << "\n";
  }

  std::ofstream wf(fs::path(dir) / "weights.bin", std::ios::binary);
  wf.write(kWeightsMagic, sizeof kWeightsMagic);
  const auto params = impl_->params();
  write_u32(wf, static_cast<std::uint32_t>(params.size()));
  for (const Param* p : params) {
    write_u32(wf, static_cast<std::uint32_t>(p->w.rows()));
    write_u32(wf, static_cast<std::uint32_t>(p->w.cols()));
    for (int i = 0; i < p->w.rows(); ++i)
      for (int j = 0; j < p->w.cols(); ++j) {
        const float v = p->w(i, j);
        wf.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
  }
  if (!wf) throw LoadError("failed to write weights to " + dir);
}

Model Model::load(const std::string& dir, const Taxonomy& taxonomy) {
  const fs::path base(dir);
  std::ifstream cf(base / "config.json");
  if (!cf) throw LoadError("missing config.json in " + dir);
  json cfg_j;
  try {
    cf >> cfg_j;
  } catch (const json::exception& e) {
    throw LoadError("bad config.json in " + dir + ": " + e.what());
  }

  ModelConfig cfg;
  cfg.encoder_ref = cfg_j.value("encoder_ref", std::string("tiny"));
  cfg.num_classes = cfg_j.value("num_classes", kNumClasses);
  cfg.epochs = cfg_j.value("epochs", 2);
  cfg.learning_rate = cfg_j.value("learning_rate", 1e-5);
  cfg.optimizer = cfg_j.value("optimizer", std::string("adam"));
  cfg.loss = loss_from_string(cfg_j.value("loss", std::string("per_class_sigmoid_bce")));
  cfg.max_tokens = cfg_j.value("max_tokens", 512);
  cfg.seed = cfg_j.value("seed", std::uint64_t{13});
  cfg.batch_size = cfg_j.value("batch_size", 16);
  cfg.dim = cfg_j.value("dim", 64);
  cfg.layers = cfg_j.value("layers", 2);
  cfg.heads = cfg_j.value("heads", 2);
  cfg.ffn = cfg_j.value("ffn", 128);
  cfg.vocab_cap = cfg_j.value("vocab_cap", std::size_t{8000});

  std::ifstream tf(base / "tokenizer.json");
  if (!tf) throw LoadError("missing tokenizer.json in " + dir);
  json tok_j;
  try {
    tf >> tok_j;
  } catch (const json::exception& e) {
    throw LoadError("bad tokenizer.json in " + dir + ": " + e.what());
  }
  if (!tok_j.contains("words") || !tok_j.at("words").is_array())
    throw LoadError("tokenizer.json missing words array in " + dir);
  Vocab vocab = Vocab::from_words(tok_j.at("words").get<std::vector<std::string>>());

  std::ifstream hf(base / "taxonomy.hash");
  if (!hf) throw LoadError("missing taxonomy.hash in " + dir);
  std::string hash_text;
  hf >> hash_text;
  const std::uint64_t stored_hash = std::stoull(hash_text, nullptr, 16);
  const std::uint64_t current_hash = taxonomy_fingerprint(taxonomy);
  if (stored_hash != current_hash)
    throw LoadError("taxonomy fingerprint mismatch: artifact was trained "
                    "against a different taxonomy");

  auto impl = std::make_shared<Impl>();
  allocate(*impl, cfg, vocab.size());
  auto params = impl->params();

  std::ifstream wf(base / "weights.bin", std::ios::binary);
  if (!wf) throw LoadError("missing weights.bin in " + dir);
  char magic[8];
  wf.read(magic, sizeof magic);
  if (!wf || std::memcmp(magic, kWeightsMagic, sizeof magic) != 0)
    throw LoadError("weights.bin has an unrecognized header");
  const std::uint32_t count = read_u32(wf);
  if (count != params.size())
    throw LoadError("weights.bin parameter count mismatch");
  for (Param* p : params) {
    const std::uint32_t rows = read_u32(wf);
    const std::uint32_t cols = read_u32(wf);
    if (rows != static_cast<std::uint32_t>(p->w.rows()) ||
        cols != static_cast<std::uint32_t>(p->w.cols()))
      throw LoadError("weights.bin parameter shape mismatch");
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) {
        float v;
        wf.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!wf) throw LoadError("weights file truncated");
        p->w(i, j) = v;
      }
  }

  TrainLog log;
  std::ifstream mf(base / "metrics.json");
  if (mf) {
    json mj;
    try {
      mf >> mj;
      if (mj.contains("epoch_loss"))
        log.epoch_loss = mj.at("epoch_loss").get<std::vector<double>>();
      if (mj.contains("ts1_metrics"))
        for (const auto& item : mj.at("ts1_metrics"))
          log.ts1_metrics.push_back(metric_from_json(item));
    } catch (const json::exception& e) {
      throw LoadError("bad metrics.json in " + dir + ": " + e.what());
    }
  }

  Model m;
  m.impl_ = std::move(impl);
  m.cfg_ = cfg;
  m.vocab_ = std::move(vocab);
  m.taxonomy_ = taxonomy;
  m.taxonomy_hash_ = stored_hash;
  m.log_ = std::move(log);
  return m;
}

}  // namespace cvemap
