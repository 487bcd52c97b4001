#include "attachnlp/transformer_backend.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>

#include "attachnlp/errors.hpp"
#include "attachnlp/rng.hpp"
#include "attachnlp/tensor_io.hpp"
#include "attachnlp/util.hpp"

namespace attachnlp {

namespace {

using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<float, 1, Eigen::Dynamic>;

constexpr std::uint32_t kMaskId = 1;
constexpr std::uint32_t kUnkId = 3;
constexpr std::uint32_t kFirstWordId = 4;

constexpr std::uint64_t kInitStream = 0x771a17ULL;
constexpr std::uint64_t kFitStream = 0x771f17ULL;
constexpr std::uint64_t kHoldoutMaskStream = 0x77a5cULL;
constexpr std::uint64_t kTrainMaskStream = 0x77a5dULL;

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr float kEps = 1e-8f;
constexpr float kLnEps = 1e-5f;
constexpr double kWeightDecay = 0.01;  // decoupled, skipped for norms and biases

bool is_token_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '\'';
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  for (std::string_view raw : split_whitespace(text)) {
    std::size_t begin = 0;
    std::size_t end = raw.size();
    while (begin < end && !is_token_char(raw[begin])) ++begin;
    while (end > begin && !is_token_char(raw[end - 1])) --end;
    if (end > begin) tokens.push_back(to_lower(raw.substr(begin, end - begin)));
  }
  return tokens;
}

struct Param {
  std::string name;
  Mat w;
  Mat grad;
  Mat m;
  Mat v;
  bool decay = true;  // norms and biases are excluded from weight decay

  void init_shape(std::string param_name, Eigen::Index rows, Eigen::Index cols,
                  bool apply_decay = true) {
    name = std::move(param_name);
    decay = apply_decay;
    w.setZero(rows, cols);
    grad.setZero(rows, cols);
    m.setZero(rows, cols);
    v.setZero(rows, cols);
  }
};

struct LayerNormCache {
  Mat xhat;
  Eigen::VectorXf inv_std;
};

Mat layer_norm_forward(const Mat& x, const Param& gain, const Param& bias,
                       LayerNormCache& cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  cache.xhat.resize(n, d);
  cache.inv_std.resize(n);
  Mat out(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const float mean = x.row(r).mean();
    const float var = (x.row(r).array() - mean).square().mean();
    const float inv_std = 1.0f / std::sqrt(var + kLnEps);
    cache.inv_std(r) = inv_std;
    cache.xhat.row(r) = ((x.row(r).array() - mean) * inv_std).matrix();
    out.row(r) = cache.xhat.row(r).cwiseProduct(gain.w.row(0)) + bias.w.row(0);
  }
  return out;
}

Mat layer_norm_backward(const Mat& dout, const LayerNormCache& cache, Param& gain,
                        Param& bias) {
  const Eigen::Index n = dout.rows();
  const Eigen::Index d = dout.cols();
  Mat dx(n, d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const RowVec dy_g = dout.row(r).cwiseProduct(gain.w.row(0));
    gain.grad.row(0) += dout.row(r).cwiseProduct(cache.xhat.row(r));
    bias.grad.row(0) += dout.row(r);
    const float mean_dy = dy_g.mean();
    const float mean_dy_xhat = dy_g.cwiseProduct(cache.xhat.row(r)).mean();
    dx.row(r) =
        ((dy_g.array() - mean_dy - cache.xhat.row(r).array() * mean_dy_xhat) *
         cache.inv_std(r))
            .matrix();
  }
  return dx;
}

void softmax_rows(Mat& x) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const float peak = x.row(r).maxCoeff();
    x.row(r) = (x.row(r).array() - peak).exp().matrix();
    x.row(r) /= x.row(r).sum();
  }
}

// Turns dP into dS in place, given P = softmax(S) row-wise.
void softmax_rows_backward(const Mat& p, Mat& dp) {
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const float dot = p.row(r).dot(dp.row(r));
    dp.row(r) = p.row(r).cwiseProduct((dp.row(r).array() - dot).matrix());
  }
}

struct LayerCache {
  LayerNormCache ln1;
  Mat a;                  // ln1 output
  Mat q, k, v;            // attention projections
  std::vector<Mat> attn;  // per-head softmax probabilities
  Mat context;            // concatenated head outputs
  LayerNormCache ln2;
  Mat b;                  // ln2 output
  Mat ff_pre;             // pre-activation
  Mat ff_act;             // relu(ff_pre)
};

struct ForwardCache {
  std::vector<std::uint32_t> ids;
  std::vector<LayerCache> layers;
  LayerNormCache ln_final;
  Mat hidden;  // final layer-normed states, one row per token
};

// Truncated (head-first) ids, with a lone UNK for degenerate empty texts.
std::vector<std::uint32_t> prepare_ids(std::vector<std::uint32_t> ids, int max_len,
                                       bool* truncated) {
  if (truncated) *truncated = ids.size() > static_cast<std::size_t>(max_len);
  if (ids.size() > static_cast<std::size_t>(max_len)) {
    ids.resize(static_cast<std::size_t>(max_len));
  }
  if (ids.empty()) ids.push_back(kUnkId);
  return ids;
}

}  // namespace

struct TinyTransformerBackend::Model {
  TinyTransformerParams params;

  Param emb, pos;
  struct Layer {
    Param ln1_g, ln1_b, wq, wk, wv, wo;
    Param ln2_g, ln2_b, w1, b1, w2, b2;
  };
  std::vector<Layer> layers;
  Param ln_f_g, ln_f_b;
  Param cls_w, cls_b;
  Param mlm_b;

  bool has_weights = false;
  bool pretrained_loaded = false;  // set by load(); the next fit keeps the encoder
  long adam_step = 0;

  explicit Model(const TinyTransformerParams& p) : params(p) {
    const int d = params.dim;
    emb.init_shape("emb", params.vocab, d);
    pos.init_shape("pos", params.max_seq_length, d);
    layers.resize(static_cast<std::size_t>(params.layers));
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const std::string prefix = "layer" + std::to_string(l) + ".";
      layers[l].ln1_g.init_shape(prefix + "ln1_g", 1, d, false);
      layers[l].ln1_b.init_shape(prefix + "ln1_b", 1, d, false);
      layers[l].wq.init_shape(prefix + "wq", d, d);
      layers[l].wk.init_shape(prefix + "wk", d, d);
      layers[l].wv.init_shape(prefix + "wv", d, d);
      layers[l].wo.init_shape(prefix + "wo", d, d);
      layers[l].ln2_g.init_shape(prefix + "ln2_g", 1, d, false);
      layers[l].ln2_b.init_shape(prefix + "ln2_b", 1, d, false);
      layers[l].w1.init_shape(prefix + "w1", d, params.ff_dim);
      layers[l].b1.init_shape(prefix + "b1", 1, params.ff_dim, false);
      layers[l].w2.init_shape(prefix + "w2", params.ff_dim, d);
      layers[l].b2.init_shape(prefix + "b2", 1, d, false);
    }
    ln_f_g.init_shape("ln_f_g", 1, d, false);
    ln_f_b.init_shape("ln_f_b", 1, d, false);
    cls_w.init_shape("cls_w", d, static_cast<Eigen::Index>(kNumLabels));
    cls_b.init_shape("cls_b", 1, static_cast<Eigen::Index>(kNumLabels), false);
    mlm_b.init_shape("mlm_b", 1, params.vocab, false);
  }

  std::vector<Param*> all_params() {
    std::vector<Param*> out = {&emb, &pos};
    for (Layer& layer : layers) {
      out.insert(out.end(), {&layer.ln1_g, &layer.ln1_b, &layer.wq, &layer.wk, &layer.wv,
                             &layer.wo, &layer.ln2_g, &layer.ln2_b, &layer.w1, &layer.b1,
                             &layer.w2, &layer.b2});
    }
    out.insert(out.end(), {&ln_f_g, &ln_f_b, &cls_w, &cls_b, &mlm_b});
    return out;
  }

  void init_weights(std::uint64_t seed, bool keep_encoder) {
    SeededRng rng(SeededRng::derive(seed, kInitStream));
    auto fill_normal = [&rng](Param& p) {
      for (Eigen::Index r = 0; r < p.w.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.w.cols(); ++c) {
          p.w(r, c) = static_cast<float>(rng.normal(0.0, 0.02));
        }
      }
    };
    if (!keep_encoder || !has_weights) {
      fill_normal(emb);
      fill_normal(pos);
      for (Layer& layer : layers) {
        layer.ln1_g.w.setOnes();
        layer.ln1_b.w.setZero();
        fill_normal(layer.wq);
        fill_normal(layer.wk);
        fill_normal(layer.wv);
        fill_normal(layer.wo);
        layer.ln2_g.w.setOnes();
        layer.ln2_b.w.setZero();
        fill_normal(layer.w1);
        layer.b1.w.setZero();
        fill_normal(layer.w2);
        layer.b2.w.setZero();
      }
      ln_f_g.w.setOnes();
      ln_f_b.w.setZero();
      mlm_b.w.setZero();
    }
    // The classifier head starts fresh either way.
    fill_normal(cls_w);
    cls_b.w.setZero();
    has_weights = true;
  }

  void zero_grads() {
    for (Param* p : all_params()) p->grad.setZero();
  }

  void reset_optimizer() {
    for (Param* p : all_params()) {
      p->m.setZero();
      p->v.setZero();
    }
    adam_step = 0;
  }

  void adam_update(double lr) {
    double norm_sq = 0.0;
    for (Param* p : all_params()) {
      norm_sq += static_cast<double>(p->grad.cwiseProduct(p->grad).sum());
    }
    const double norm = std::sqrt(norm_sq);
    if (params.clip_norm > 0.0 && norm > params.clip_norm) {
      const float scale = static_cast<float>(params.clip_norm / norm);
      for (Param* p : all_params()) p->grad *= scale;
    }

    ++adam_step;
    const float c1 = static_cast<float>(1.0 - std::pow(kBeta1, static_cast<double>(adam_step)));
    const float c2 = static_cast<float>(1.0 - std::pow(kBeta2, static_cast<double>(adam_step)));
    const float b1 = static_cast<float>(kBeta1);
    const float b2 = static_cast<float>(kBeta2);
    const float decay = static_cast<float>(lr) * kWeightDecay;
    for (Param* p : all_params()) {
      p->m = b1 * p->m + (1.0f - b1) * p->grad;
      p->v = b2 * p->v + (1.0f - b2) * p->grad.cwiseProduct(p->grad);
      if (p->decay) p->w *= (1.0f - decay);
      p->w.array() -= static_cast<float>(lr) *
                      ((p->m.array() / c1) / ((p->v.array() / c2).sqrt() + kEps));
    }
  }

  std::vector<Mat> snapshot() {
    std::vector<Mat> out;
    for (Param* p : all_params()) out.push_back(p->w);
    return out;
  }

  void restore(const std::vector<Mat>& saved) {
    auto list = all_params();
    for (std::size_t i = 0; i < list.size(); ++i) list[i]->w = saved[i];
  }

  ForwardCache forward(std::span<const std::uint32_t> ids) const {
    ForwardCache cache;
    cache.ids.assign(ids.begin(), ids.end());
    const Eigen::Index n = static_cast<Eigen::Index>(ids.size());
    const int d = params.dim;
    const int h = params.heads;
    const int dh = d / h;
    const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(dh));

    Mat x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      x.row(i) = emb.w.row(static_cast<Eigen::Index>(ids[static_cast<std::size_t>(i)])) +
                 pos.w.row(i);
    }

    for (const Layer& layer : layers) {
      LayerCache lc;
      lc.a = layer_norm_forward(x, layer.ln1_g, layer.ln1_b, lc.ln1);
      lc.q = lc.a * layer.wq.w;
      lc.k = lc.a * layer.wk.w;
      lc.v = lc.a * layer.wv.w;

      lc.context.resize(n, d);
      for (int head = 0; head < h; ++head) {
        Mat scores =
            (lc.q.middleCols(head * dh, dh) * lc.k.middleCols(head * dh, dh).transpose()) *
            inv_sqrt_dh;
        softmax_rows(scores);
        lc.context.middleCols(head * dh, dh) = scores * lc.v.middleCols(head * dh, dh);
        lc.attn.push_back(std::move(scores));
      }
      Mat x_mid = x + lc.context * layer.wo.w;

      lc.b = layer_norm_forward(x_mid, layer.ln2_g, layer.ln2_b, lc.ln2);
      lc.ff_pre = (lc.b * layer.w1.w).rowwise() + layer.b1.w.row(0);
      lc.ff_act = lc.ff_pre.cwiseMax(0.0f);
      x = x_mid + ((lc.ff_act * layer.w2.w).rowwise() + layer.b2.w.row(0));

      cache.layers.push_back(std::move(lc));
    }
    cache.hidden = layer_norm_forward(x, ln_f_g, ln_f_b, cache.ln_final);
    return cache;
  }

  // Backpropagates the gradient at the final layer-normed states into
  // every parameter gradient, including the embeddings.
  void backward(const ForwardCache& cache, const Mat& d_hidden) {
    const Eigen::Index n = d_hidden.rows();
    const int d = params.dim;
    const int h = params.heads;
    const int dh = d / h;
    const float inv_sqrt_dh = 1.0f / std::sqrt(static_cast<float>(dh));

    Mat dx = layer_norm_backward(d_hidden, cache.ln_final, ln_f_g, ln_f_b);

    for (std::size_t li = layers.size(); li-- > 0;) {
      Layer& layer = layers[li];
      const LayerCache& lc = cache.layers[li];

      // FFN block: x = x_mid + relu(b*w1 + b1)*w2 + b2
      layer.b2.grad.row(0) += dx.colwise().sum();
      layer.w2.grad += lc.ff_act.transpose() * dx;
      Mat d_act = dx * layer.w2.w.transpose();
      Mat d_pre = (lc.ff_pre.array() > 0.0f).cast<float>().matrix().cwiseProduct(d_act);
      layer.b1.grad.row(0) += d_pre.colwise().sum();
      layer.w1.grad += lc.b.transpose() * d_pre;
      Mat db = d_pre * layer.w1.w.transpose();
      Mat dx_mid = dx + layer_norm_backward(db, lc.ln2, layer.ln2_g, layer.ln2_b);

      // Attention block: x_mid = x_in + context*wo
      layer.wo.grad += lc.context.transpose() * dx_mid;
      Mat d_context = dx_mid * layer.wo.w.transpose();

      Mat dq(n, d);
      Mat dk(n, d);
      Mat dv(n, d);
      for (int head = 0; head < h; ++head) {
        const Mat& probs = lc.attn[static_cast<std::size_t>(head)];
        dv.middleCols(head * dh, dh) =
            probs.transpose() * d_context.middleCols(head * dh, dh);
        Mat d_scores =
            d_context.middleCols(head * dh, dh) * lc.v.middleCols(head * dh, dh).transpose();
        softmax_rows_backward(probs, d_scores);
        d_scores *= inv_sqrt_dh;
        dq.middleCols(head * dh, dh) = d_scores * lc.k.middleCols(head * dh, dh);
        dk.middleCols(head * dh, dh) = d_scores.transpose() * lc.q.middleCols(head * dh, dh);
      }

      layer.wq.grad += lc.a.transpose() * dq;
      layer.wk.grad += lc.a.transpose() * dk;
      layer.wv.grad += lc.a.transpose() * dv;
      Mat da = dq * layer.wq.w.transpose() + dk * layer.wk.w.transpose() +
               dv * layer.wv.w.transpose();
      dx = dx_mid + layer_norm_backward(da, lc.ln1, layer.ln1_g, layer.ln1_b);
    }

    for (Eigen::Index i = 0; i < n; ++i) {
      emb.grad.row(static_cast<Eigen::Index>(cache.ids[static_cast<std::size_t>(i)])) +=
          dx.row(i);
      pos.grad.row(i) += dx.row(i);
    }
  }

  std::array<double, kNumLabels> classify_probs(const ForwardCache& cache) const {
    const RowVec pooled = cache.hidden.colwise().mean();
    const RowVec logits = pooled * cls_w.w + cls_b.w.row(0);
    const double peak = static_cast<double>(logits.maxCoeff());
    std::array<double, kNumLabels> probs{};
    double sum = 0.0;
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      probs[c] = std::exp(static_cast<double>(logits(static_cast<Eigen::Index>(c))) - peak);
      sum += probs[c];
    }
    for (double& p : probs) p /= sum;
    return probs;
  }

  void classify_backward(const ForwardCache& cache, std::size_t gold, float weight) {
    const auto probs = classify_probs(cache);
    const RowVec pooled = cache.hidden.colwise().mean();

    RowVec d_logits(static_cast<Eigen::Index>(kNumLabels));
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      d_logits(static_cast<Eigen::Index>(c)) =
          static_cast<float>((probs[c] - (c == gold ? 1.0 : 0.0)) * weight);
    }
    cls_w.grad += pooled.transpose() * d_logits;
    cls_b.grad.row(0) += d_logits;

    const RowVec d_pooled = d_logits * cls_w.w.transpose();
    Mat d_hidden(cache.hidden.rows(), cache.hidden.cols());
    const float inv_n = 1.0f / static_cast<float>(cache.hidden.rows());
    for (Eigen::Index r = 0; r < d_hidden.rows(); ++r) d_hidden.row(r) = d_pooled * inv_n;
    backward(cache, d_hidden);
  }

  // Cross-entropy of the tied-embedding MLM head summed over `positions`.
  double mlm_loss(const ForwardCache& cache, std::span<const std::size_t> positions,
                  std::span<const std::uint32_t> original_ids) const {
    double total = 0.0;
    for (std::size_t pos : positions) {
      const RowVec logits =
          cache.hidden.row(static_cast<Eigen::Index>(pos)) * emb.w.transpose() +
          mlm_b.w.row(0);
      const float peak = logits.maxCoeff();
      double sum = 0.0;
      for (Eigen::Index v = 0; v < logits.cols(); ++v) {
        sum += std::exp(static_cast<double>(logits(v) - peak));
      }
      total -= static_cast<double>(
                   logits(static_cast<Eigen::Index>(original_ids[pos])) - peak) -
               std::log(sum);
    }
    return total;
  }

  void mlm_backward(const ForwardCache& cache, std::span<const std::size_t> positions,
                    std::span<const std::uint32_t> original_ids, float weight) {
    Mat d_hidden = Mat::Zero(cache.hidden.rows(), cache.hidden.cols());
    for (std::size_t pos : positions) {
      const RowVec hidden_row = cache.hidden.row(static_cast<Eigen::Index>(pos));
      RowVec logits = hidden_row * emb.w.transpose() + mlm_b.w.row(0);
      const float peak = logits.maxCoeff();
      RowVec probs = (logits.array() - peak).exp().matrix();
      probs /= probs.sum();

      RowVec d_logits = probs * weight;
      d_logits(static_cast<Eigen::Index>(original_ids[pos])) -= weight;
      // Tied output embedding: the gradient reaches emb through the head
      // here and through the input lookup in backward().
      emb.grad += d_logits.transpose() * hidden_row;
      mlm_b.grad.row(0) += d_logits;
      d_hidden.row(static_cast<Eigen::Index>(pos)) += d_logits * emb.w;
    }
    backward(cache, d_hidden);
  }
};

TinyTransformerParams TinyTransformerParams::from_json(const nlohmann::json& value) {
  TinyTransformerParams params;
  if (value.is_null() || (value.is_object() && value.empty())) return params;
  if (!value.is_object()) throw InvalidConfig("transformer params must be a JSON object");
  for (const auto& [key, item] : value.items()) {
    if (key == "vocab") {
      params.vocab = item.get<int>();
    } else if (key == "dim") {
      params.dim = item.get<int>();
    } else if (key == "heads") {
      params.heads = item.get<int>();
    } else if (key == "layers") {
      params.layers = item.get<int>();
    } else if (key == "ff_dim") {
      params.ff_dim = item.get<int>();
    } else if (key == "max_seq_length") {
      params.max_seq_length = item.get<int>();
    } else if (key == "lr_scale") {
      params.lr_scale = item.get<double>();
    } else if (key == "clip_norm") {
      params.clip_norm = item.get<double>();
    } else {
      throw InvalidConfig("transformer params: unknown key \"" + key + "\"");
    }
  }
  if (params.vocab < static_cast<int>(kFirstWordId) + 8) {
    throw InvalidConfig("transformer vocab too small");
  }
  if (params.dim < 2 || params.heads < 1 || params.dim % params.heads != 0) {
    throw InvalidConfig("transformer dim must be a positive multiple of heads");
  }
  if (params.layers < 1) throw InvalidConfig("transformer needs at least one layer");
  if (params.ff_dim < 1) throw InvalidConfig("transformer ff_dim must be positive");
  if (params.max_seq_length < 1) {
    throw InvalidConfig("transformer max_seq_length must be positive");
  }
  if (!(params.lr_scale > 0.0)) throw InvalidConfig("transformer lr_scale must be positive");
  return params;
}

nlohmann::ordered_json TinyTransformerParams::to_json() const {
  return {{"vocab", vocab},
          {"dim", dim},
          {"heads", heads},
          {"layers", layers},
          {"ff_dim", ff_dim},
          {"max_seq_length", max_seq_length},
          {"lr_scale", lr_scale},
          {"clip_norm", clip_norm}};
}

TinyTransformerBackend::TinyTransformerBackend(TinyTransformerParams params)
    : params_(params), model_(std::make_unique<Model>(params)) {}

TinyTransformerBackend::~TinyTransformerBackend() = default;

std::vector<std::uint32_t> TinyTransformerBackend::encode(std::string_view text) const {
  std::vector<std::uint32_t> ids;
  const auto word_space = static_cast<std::uint64_t>(params_.vocab) - kFirstWordId;
  for (const std::string& token : tokenize(text)) {
    ids.push_back(kFirstWordId + static_cast<std::uint32_t>(fnv1a64(token) % word_space));
  }
  return ids;
}

FitStats TinyTransformerBackend::fit_classifier(std::span<const Instance> train,
                                                std::span<const Instance> eval,
                                                const TrainConfig& cfg) {
  // The positional table pins the model capacity; the train config can
  // only tighten the cap.
  const int max_len = std::min(params_.max_seq_length, cfg.max_seq_length);

  FitStats stats;
  std::vector<std::vector<std::uint32_t>> train_ids;
  std::vector<std::size_t> train_labels;
  for (const Instance& instance : train) {
    bool truncated = false;
    train_ids.push_back(prepare_ids(encode(instance.text), max_len, &truncated));
    train_labels.push_back(label_index(instance.label));
    if (truncated) ++stats.truncated_train;
  }
  std::vector<std::vector<std::uint32_t>> eval_ids;
  std::vector<std::size_t> eval_labels;
  for (const Instance& instance : eval) {
    bool truncated = false;
    eval_ids.push_back(prepare_ids(encode(instance.text), max_len, &truncated));
    eval_labels.push_back(label_index(instance.label));
    if (truncated) ++stats.truncated_eval;
  }

  // Fine-tunes in place when a pretraining checkpoint was loaded,
  // otherwise trains from a fresh seeded init.
  model_->init_weights(cfg.seed, /*keep_encoder=*/model_->pretrained_loaded);
  model_->pretrained_loaded = false;
  model_->reset_optimizer();

  const double lr = cfg.learning_rate * params_.lr_scale;
  SeededRng rng(SeededRng::derive(cfg.seed, kFitStream));
  std::vector<std::size_t> order(train_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<Mat> best_weights;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      model_->zero_grads();
      const float weight = 1.0f / static_cast<float>(stop - start);
      for (std::size_t pos = start; pos < stop; ++pos) {
        const std::size_t idx = order[pos];
        const ForwardCache cache = model_->forward(train_ids[idx]);
        model_->classify_backward(cache, train_labels[idx], weight);
      }
      model_->adam_update(lr);
    }

    std::int64_t correct = 0;
    for (std::size_t i = 0; i < eval_ids.size(); ++i) {
      const ForwardCache cache = model_->forward(eval_ids[i]);
      if (label_index(argmax_probabilities(model_->classify_probs(cache))) == eval_labels[i]) {
        ++correct;
      }
    }
    const double accuracy =
        static_cast<double>(correct) / static_cast<double>(eval_ids.size());
    stats.eval_accuracy_by_epoch.push_back(accuracy);
    if (best_weights.empty() || accuracy > stats.best_eval_accuracy) {
      stats.best_eval_accuracy = accuracy;
      stats.best_epoch = epoch;
      best_weights = model_->snapshot();
    }
  }
  model_->restore(best_weights);
  return stats;
}

MlmStats TinyTransformerBackend::fit_mlm(std::span<const std::string> train_texts,
                                         std::span<const std::string> holdout_texts,
                                         const MLMConfig& cfg) {
  MlmStats stats;
  std::vector<std::vector<std::uint32_t>> train_ids;
  train_ids.reserve(train_texts.size());
  for (const std::string& text : train_texts) {
    train_ids.push_back(prepare_ids(encode(text), params_.max_seq_length, nullptr));
  }

  // Holdout masks are drawn once so per-epoch perplexities stay comparable.
  SeededRng holdout_rng(SeededRng::derive(cfg.seed, kHoldoutMaskStream));
  struct MaskedHoldout {
    std::vector<std::uint32_t> original;
    MaskedSequence masked;
  };
  std::vector<MaskedHoldout> holdout;
  for (const std::string& text : holdout_texts) {
    MaskedHoldout entry;
    entry.original = prepare_ids(encode(text), params_.max_seq_length, nullptr);
    entry.masked = mask_tokens(entry.original, cfg.mask_probability, kMaskId, kFirstWordId,
                               static_cast<std::uint32_t>(params_.vocab), holdout_rng);
    stats.holdout_masked_positions += static_cast<std::int64_t>(entry.masked.positions.size());
    holdout.push_back(std::move(entry));
  }

  if (!model_->pretrained_loaded) {
    model_->init_weights(cfg.seed, /*keep_encoder=*/false);
  }
  model_->pretrained_loaded = false;
  model_->reset_optimizer();

  // Same learning-rate convention as fine-tuning.
  const double lr = 1e-5 * params_.lr_scale;
  constexpr std::size_t kMlmBatch = 16;

  SeededRng train_rng(SeededRng::derive(cfg.seed, kTrainMaskStream));
  std::vector<std::size_t> order(train_ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto holdout_perplexity = [&]() {
    double total_loss = 0.0;
    std::int64_t total_positions = 0;
    for (const MaskedHoldout& entry : holdout) {
      const ForwardCache cache = model_->forward(entry.masked.ids);
      total_loss += model_->mlm_loss(cache, entry.masked.positions, entry.original);
      total_positions += static_cast<std::int64_t>(entry.masked.positions.size());
    }
    return std::exp(total_loss /
                    static_cast<double>(std::max<std::int64_t>(total_positions, 1)));
  };

  std::vector<Mat> best_weights;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    train_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += kMlmBatch) {
      const std::size_t stop = std::min(order.size(), start + kMlmBatch);
      model_->zero_grads();

      // Dynamic masking: fresh draws for every occurrence in every epoch.
      std::vector<MaskedSequence> masks;
      std::vector<std::size_t> idx_of;
      std::size_t batch_positions = 0;
      for (std::size_t pos = start; pos < stop; ++pos) {
        const std::size_t idx = order[pos];
        MaskedSequence masked =
            mask_tokens(train_ids[idx], cfg.mask_probability, kMaskId, kFirstWordId,
                        static_cast<std::uint32_t>(params_.vocab), train_rng);
        batch_positions += masked.positions.size();
        masks.push_back(std::move(masked));
        idx_of.push_back(idx);
      }
      if (batch_positions == 0) continue;
      const float weight = 1.0f / static_cast<float>(batch_positions);
      for (std::size_t b = 0; b < masks.size(); ++b) {
        const ForwardCache cache = model_->forward(masks[b].ids);
        model_->mlm_backward(cache, masks[b].positions, train_ids[idx_of[b]], weight);
      }
      model_->adam_update(lr);
    }

    const double perplexity = holdout_perplexity();
    stats.holdout_perplexity_by_epoch.push_back(perplexity);
    if (best_weights.empty() || perplexity < stats.best_perplexity) {
      stats.best_perplexity = perplexity;
      stats.best_epoch = epoch;
      best_weights = model_->snapshot();
    }
  }
  model_->restore(best_weights);
  return stats;
}

std::vector<Prediction> TinyTransformerBackend::predict(std::span<const Instance> instances,
                                                        PredictStats* stats) const {
  if (!model_->has_weights) {
    throw BackendFailure("tiny-transformer has no weights; fit or load first");
  }
  std::vector<Prediction> out;
  out.reserve(instances.size());
  for (const Instance& instance : instances) {
    bool truncated = false;
    const auto ids = prepare_ids(encode(instance.text), params_.max_seq_length, &truncated);
    if (truncated && stats) ++stats->truncated;
    const ForwardCache cache = model_->forward(ids);
    Prediction prediction;
    prediction.instance_id = instance.instance_id;
    prediction.probabilities = model_->classify_probs(cache);
    prediction.predicted = argmax_probabilities(prediction.probabilities);
    out.push_back(std::move(prediction));
  }
  return out;
}

void TinyTransformerBackend::save(const std::filesystem::path& dir) const {
  if (!model_->has_weights) throw BackendFailure("tiny-transformer has no weights to save");
  std::vector<NamedTensor> tensors;
  for (Param* p : model_->all_params()) {
    NamedTensor tensor;
    tensor.name = p->name;
    tensor.dims = {p->w.rows(), p->w.cols()};
    tensor.data.assign(p->w.data(), p->w.data() + p->w.size());
    tensors.push_back(std::move(tensor));
  }
  write_tensor_file(dir / "weights.bin", tensors);
}

void TinyTransformerBackend::load(const std::filesystem::path& dir) {
  const auto tensors = read_tensor_file(dir / "weights.bin");
  auto list = model_->all_params();
  std::size_t matched = 0;
  for (Param* p : list) {
    for (const NamedTensor& tensor : tensors) {
      if (tensor.name != p->name) continue;
      if (tensor.dims != std::vector<std::int64_t>{p->w.rows(), p->w.cols()}) {
        throw BackendFailure("tensor \"" + tensor.name + "\" shape mismatch in " +
                             dir.string());
      }
      std::copy(tensor.data.begin(), tensor.data.end(), p->w.data());
      ++matched;
      break;
    }
  }
  if (matched != list.size()) {
    throw BackendFailure("checkpoint in " + dir.string() + " is missing tensors");
  }
  model_->has_weights = true;
  model_->pretrained_loaded = true;
}

}  // namespace attachnlp
