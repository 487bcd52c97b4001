#include "attachnlp/bow_backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "attachnlp/errors.hpp"
#include "attachnlp/rng.hpp"
#include "attachnlp/tensor_io.hpp"
#include "attachnlp/util.hpp"

namespace attachnlp {

namespace {

constexpr std::uint64_t kFitStream = 0xb07f17ULL;

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

bool is_token_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '\'';
}

// Lowercased words with punctuation stripped from both ends.
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

}  // namespace

BowParams BowParams::from_json(const nlohmann::json& value) {
  BowParams params;
  if (value.is_null() || (value.is_object() && value.empty())) return params;
  if (!value.is_object()) throw InvalidConfig("bow params must be a JSON object");
  for (const auto& [key, item] : value.items()) {
    if (key == "hash_dim") {
      params.hash_dim = item.get<int>();
    } else if (key == "max_seq_length") {
      params.max_seq_length = item.get<int>();
    } else if (key == "lr_scale") {
      params.lr_scale = item.get<double>();
    } else if (key == "weight_decay") {
      params.weight_decay = item.get<double>();
    } else {
      throw InvalidConfig("bow params: unknown key \"" + key + "\"");
    }
  }
  if (params.hash_dim < 8) throw InvalidConfig("bow hash_dim too small");
  if (params.max_seq_length < 1) throw InvalidConfig("bow max_seq_length must be positive");
  if (!(params.lr_scale > 0.0)) throw InvalidConfig("bow lr_scale must be positive");
  if (params.weight_decay < 0.0) throw InvalidConfig("bow weight_decay must be non-negative");
  return params;
}

nlohmann::ordered_json BowParams::to_json() const {
  return {{"hash_dim", hash_dim},
          {"max_seq_length", max_seq_length},
          {"lr_scale", lr_scale},
          {"weight_decay", weight_decay}};
}

BowLinearBackend::BowLinearBackend(BowParams params) : params_(params) {}

std::vector<std::uint32_t> BowLinearBackend::encode(std::string_view text) const {
  std::vector<std::uint32_t> ids;
  for (const std::string& token : tokenize(text)) {
    ids.push_back(static_cast<std::uint32_t>(fnv1a64(token) %
                                             static_cast<std::uint64_t>(params_.hash_dim)));
  }
  return ids;
}

BowLinearBackend::SparseFeatures BowLinearBackend::term_counts(std::string_view text,
                                                               int effective_max_len,
                                                               bool* truncated) const {
  std::vector<std::uint32_t> ids = encode(text);
  if (truncated) *truncated = ids.size() > static_cast<std::size_t>(effective_max_len);
  if (ids.size() > static_cast<std::size_t>(effective_max_len)) {
    ids.resize(static_cast<std::size_t>(effective_max_len));  // head-first retention
  }
  std::map<std::uint32_t, float> counts;
  for (std::uint32_t id : ids) counts[id] += 1.0f;
  return SparseFeatures(counts.begin(), counts.end());
}

BowLinearBackend::SparseFeatures BowLinearBackend::featurize(
    const SparseFeatures& counts) const {
  SparseFeatures features;
  features.reserve(counts.size());
  double norm_sq = 0.0;
  for (const auto& [id, count] : counts) {
    const float idf = idf_[id];
    if (idf == 0.0f) continue;
    const float value = std::log1p(count) * idf;
    features.emplace_back(id, value);
    norm_sq += static_cast<double>(value) * value;
  }
  if (norm_sq > 0.0) {
    const float inv = static_cast<float>(1.0 / std::sqrt(norm_sq));
    for (auto& [id, value] : features) value *= inv;
  }
  return features;
}

std::array<double, kNumLabels> BowLinearBackend::scores(const SparseFeatures& features) const {
  std::array<double, kNumLabels> logits{};
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    double sum = bias_[c];
    const float* row = weights_.data() + c * static_cast<std::size_t>(params_.hash_dim);
    for (const auto& [id, value] : features) {
      sum += static_cast<double>(row[id]) * value;
    }
    logits[c] = sum;
  }
  return logits;
}

namespace {

std::array<double, kNumLabels> softmax(const std::array<double, kNumLabels>& logits) {
  const double peak = std::max({logits[0], logits[1], logits[2]});
  std::array<double, kNumLabels> probs{};
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    probs[i] = std::exp(logits[i] - peak);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

}  // namespace

FitStats BowLinearBackend::fit_classifier(std::span<const Instance> train,
                                          std::span<const Instance> eval,
                                          const TrainConfig& cfg) {
  const int max_len = std::min(params_.max_seq_length, cfg.max_seq_length);

  const std::size_t dim = static_cast<std::size_t>(params_.hash_dim);
  weights_.assign(kNumLabels * dim, 0.0f);
  bias_.fill(0.0f);
  trained_ = true;  // weights are defined from here on

  FitStats stats;
  std::vector<SparseFeatures> train_counts;
  std::vector<std::size_t> train_labels;
  train_counts.reserve(train.size());
  for (const Instance& instance : train) {
    bool truncated = false;
    train_counts.push_back(term_counts(instance.text, max_len, &truncated));
    train_labels.push_back(label_index(instance.label));
    if (truncated) ++stats.truncated_train;
  }

  // Smoothed idf over the training instances; terms outside the training
  // vocabulary keep idf 0 and are ignored everywhere.
  idf_.assign(dim, 0.0f);
  for (const SparseFeatures& counts : train_counts) {
    for (const auto& [id, _] : counts) idf_[id] += 1.0f;
  }
  const double n_docs = static_cast<double>(train.size());
  for (float& value : idf_) {
    if (value > 0.0f) {
      value = static_cast<float>(std::log((1.0 + n_docs) / (1.0 + value)) + 1.0);
    }
  }

  std::vector<SparseFeatures> train_features;
  train_features.reserve(train_counts.size());
  for (const SparseFeatures& counts : train_counts) {
    train_features.push_back(featurize(counts));
  }
  std::vector<SparseFeatures> eval_features;
  std::vector<std::size_t> eval_labels;
  for (const Instance& instance : eval) {
    bool truncated = false;
    eval_features.push_back(featurize(term_counts(instance.text, max_len, &truncated)));
    eval_labels.push_back(label_index(instance.label));
    if (truncated) ++stats.truncated_eval;
  }

  const std::size_t n_params = weights_.size();
  std::vector<float> grad(n_params, 0.0f);
  std::vector<float> m(n_params, 0.0f);
  std::vector<float> v(n_params, 0.0f);
  std::array<double, kNumLabels> bias_grad{};
  std::array<double, kNumLabels> bias_m{};
  std::array<double, kNumLabels> bias_v{};

  const double lr = cfg.learning_rate * params_.lr_scale;
  SeededRng rng(SeededRng::derive(cfg.seed, kFitStream));
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<float> best_weights;
  std::array<float, kNumLabels> best_bias{};
  long step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::fill(grad.begin(), grad.end(), 0.0f);
      bias_grad.fill(0.0);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);

      for (std::size_t pos = start; pos < stop; ++pos) {
        const std::size_t idx = order[pos];
        const SparseFeatures& features = train_features[idx];
        const auto probs = softmax(scores(features));
        for (std::size_t c = 0; c < kNumLabels; ++c) {
          const double g = (probs[c] - (train_labels[idx] == c ? 1.0 : 0.0)) * inv_batch;
          bias_grad[c] += g;
          float* row = grad.data() + c * dim;
          for (const auto& [id, value] : features) {
            row[id] += static_cast<float>(g * value);
          }
        }
      }

      ++step;
      const double correction1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double correction2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t i = 0; i < n_params; ++i) {
        const double g = grad[i];
        m[i] = static_cast<float>(kBeta1 * m[i] + (1.0 - kBeta1) * g);
        v[i] = static_cast<float>(kBeta2 * v[i] + (1.0 - kBeta2) * g * g);
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        double w = weights_[i];
        w -= lr * (m_hat / (std::sqrt(v_hat) + kEps) + params_.weight_decay * w);
        weights_[i] = static_cast<float>(w);
      }
      for (std::size_t c = 0; c < kNumLabels; ++c) {
        const double g = bias_grad[c];
        bias_m[c] = kBeta1 * bias_m[c] + (1.0 - kBeta1) * g;
        bias_v[c] = kBeta2 * bias_v[c] + (1.0 - kBeta2) * g * g;
        const double m_hat = bias_m[c] / correction1;
        const double v_hat = bias_v[c] / correction2;
        bias_[c] = static_cast<float>(bias_[c] - lr * m_hat / (std::sqrt(v_hat) + kEps));
      }
    }

    std::int64_t correct = 0;
    for (std::size_t i = 0; i < eval_features.size(); ++i) {
      const auto probs = softmax(scores(eval_features[i]));
      if (label_index(argmax_probabilities(probs)) == eval_labels[i]) ++correct;
    }
    const double accuracy =
        static_cast<double>(correct) / static_cast<double>(eval_features.size());
    stats.eval_accuracy_by_epoch.push_back(accuracy);
    if (best_weights.empty() || accuracy > stats.best_eval_accuracy) {
      stats.best_eval_accuracy = accuracy;
      stats.best_epoch = epoch;
      best_weights = weights_;
      best_bias = bias_;
    }
  }

  weights_ = std::move(best_weights);
  bias_ = best_bias;
  return stats;
}

std::vector<Prediction> BowLinearBackend::predict(std::span<const Instance> instances,
                                                  PredictStats* stats) const {
  if (!trained_) throw BackendFailure("bow backend has no weights; fit or load first");
  std::vector<Prediction> out;
  out.reserve(instances.size());
  for (const Instance& instance : instances) {
    bool truncated = false;
    const SparseFeatures features =
        featurize(term_counts(instance.text, params_.max_seq_length, &truncated));
    if (truncated && stats) ++stats->truncated;
    Prediction prediction;
    prediction.instance_id = instance.instance_id;
    prediction.probabilities = softmax(scores(features));
    prediction.predicted = argmax_probabilities(prediction.probabilities);
    out.push_back(std::move(prediction));
  }
  return out;
}

void BowLinearBackend::save(const std::filesystem::path& dir) const {
  if (!trained_) throw BackendFailure("bow backend has no weights to save");
  std::vector<NamedTensor> tensors;
  tensors.push_back(NamedTensor{"weights",
                                {static_cast<std::int64_t>(kNumLabels), params_.hash_dim},
                                weights_});
  tensors.push_back(NamedTensor{"bias",
                                {static_cast<std::int64_t>(kNumLabels)},
                                {bias_.begin(), bias_.end()}});
  tensors.push_back(NamedTensor{"idf", {params_.hash_dim}, idf_});
  write_tensor_file(dir / "weights.bin", tensors);
}

void BowLinearBackend::load(const std::filesystem::path& dir) {
  const auto tensors = read_tensor_file(dir / "weights.bin");
  bool have_weights = false;
  bool have_bias = false;
  bool have_idf = false;
  for (const NamedTensor& tensor : tensors) {
    if (tensor.name == "weights") {
      if (tensor.dims != std::vector<std::int64_t>{static_cast<std::int64_t>(kNumLabels),
                                                   params_.hash_dim}) {
        throw BackendFailure("bow weights shape does not match hash_dim " +
                             std::to_string(params_.hash_dim));
      }
      weights_ = tensor.data;
      have_weights = true;
    } else if (tensor.name == "bias") {
      if (tensor.data.size() != kNumLabels) throw BackendFailure("bow bias shape mismatch");
      std::copy(tensor.data.begin(), tensor.data.end(), bias_.begin());
      have_bias = true;
    } else if (tensor.name == "idf") {
      if (tensor.data.size() != static_cast<std::size_t>(params_.hash_dim)) {
        throw BackendFailure("bow idf shape mismatch");
      }
      idf_ = tensor.data;
      have_idf = true;
    }
  }
  if (!have_weights || !have_bias || !have_idf) {
    throw BackendFailure("bow checkpoint is missing tensors in " + dir.string());
  }
  trained_ = true;
}

}  // namespace attachnlp
