#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "attachnlp/instances.hpp"
#include "attachnlp/labels.hpp"
#include "attachnlp/rng.hpp"

namespace attachnlp {

// Classifier fine-tuning settings. Defaults follow the experimental setup:
// learning rate 1e-5 with explicit epoch/batch defaults, all echoed into
// the run manifest.
struct TrainConfig {
  double learning_rate = 1e-5;
  int epochs = 10;
  int batch_size = 16;
  int max_seq_length = 512;  // effective cap is min(this, backend limit)
  std::uint64_t seed = 0;
  int num_classes = 3;

  void validate() const;
};

// Masked-language-model pretraining settings: dynamic masking with
// probability 0.15, training data duplicated four times (five copies per
// epoch), 20% of texts held out for perplexity validation.
struct MLMConfig {
  double mask_probability = 0.15;
  int duplication_factor = 4;
  int epochs = 20;
  double holdout_fraction = 0.20;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Prediction {
  std::string instance_id;
  std::array<double, kNumLabels> probabilities{};  // sums to 1 +- 1e-6
  AttachmentLabel predicted = AttachmentLabel::Avoidant;
};

// Argmax with ties broken by the fixed label order.
AttachmentLabel argmax_probabilities(const std::array<double, kNumLabels>& probabilities);

struct FitStats {
  std::vector<double> eval_accuracy_by_epoch;
  int best_epoch = 0;  // earliest epoch attaining the best eval accuracy
  double best_eval_accuracy = 0.0;
  std::int64_t truncated_train = 0;
  std::int64_t truncated_eval = 0;
};

struct MlmStats {
  std::vector<double> holdout_perplexity_by_epoch;
  int best_epoch = 0;  // earliest epoch attaining the lowest perplexity
  double best_perplexity = 0.0;
  std::int64_t holdout_masked_positions = 0;
};

struct PredictStats {
  std::int64_t truncated = 0;
};

// Abstract pretrained-encoder contract. Tokenization must be
// deterministic, training must be bit-reproducible given the config seed,
// and the backend keeps its best-epoch weights after a fit. Backends are
// not thread-safe; callers serialize access per instance.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual std::string name() const = 0;
  virtual int max_sequence_length() const = 0;
  virtual bool supports_classify_finetune() const { return false; }
  virtual bool supports_mlm_pretrain() const { return false; }

  // Deterministic token ids for a text, before any truncation.
  virtual std::vector<std::uint32_t> encode(std::string_view text) const = 0;

  // Hyperparameters, persisted in checkpoints so predict can rebuild the
  // exact same backend.
  virtual nlohmann::ordered_json params() const = 0;

  virtual FitStats fit_classifier(std::span<const Instance> train,
                                  std::span<const Instance> eval,
                                  const TrainConfig& cfg);

  virtual MlmStats fit_mlm(std::span<const std::string> train_texts,
                           std::span<const std::string> holdout_texts,
                           const MLMConfig& cfg);

  virtual std::vector<Prediction> predict(std::span<const Instance> instances,
                                          PredictStats* stats = nullptr) const = 0;

  virtual void save(const std::filesystem::path& dir) const = 0;
  virtual void load(const std::filesystem::path& dir) = 0;
};

std::unique_ptr<EncoderBackend> make_backend(const std::string& name,
                                             const nlohmann::json& params = {});

struct ModelCheckpoint {
  std::string backend_name;
  std::filesystem::path dir;  // weights + metadata live here
  nlohmann::ordered_json config_snapshot;
  double dev_metric = 0.0;  // eval accuracy (classifier) or perplexity (MLM)
  int epoch_index = 0;
  std::vector<double> metric_curve;
};

ModelCheckpoint load_checkpoint(const std::filesystem::path& dir);
std::unique_ptr<EncoderBackend> open_checkpoint_backend(const ModelCheckpoint& checkpoint);

// Fine-tunes a 3-way classifier and keeps the epoch with the best eval
// accuracy. Writes weights, checkpoint metadata and a run manifest under
// out_dir. A backend that already carries weights (loaded from a
// pretraining checkpoint) is fine-tuned from those weights.
ModelCheckpoint train_classifier(EncoderBackend& backend,
                                 std::span<const Instance> train,
                                 std::span<const Instance> eval,
                                 const TrainConfig& cfg,
                                 const std::filesystem::path& out_dir);

std::vector<Prediction> predict(const ModelCheckpoint& checkpoint,
                                std::span<const Instance> instances,
                                PredictStats* stats = nullptr);

struct MlmData {
  std::vector<std::string> train_entries;  // unique texts replicated in place
  std::vector<std::string> holdout;
  std::size_t unique_train = 0;
};

// Reserves holdout_fraction of the texts for validation (seeded draw) and
// replicates the rest duplication_factor additional times.
MlmData prepare_mlm_data(std::span<const std::string> texts, const MLMConfig& cfg);

// Continued masked-language-model training; keeps the epoch with the
// lowest holdout perplexity.
ModelCheckpoint dapt_pretrain(EncoderBackend& backend, const MlmData& data,
                              const MLMConfig& cfg, const std::filesystem::path& out_dir);

// Dynamic-masking step shared by MLM backends (and their tests): every
// position is selected independently with probability `mask_probability`;
// a selected position becomes mask_id 80% of the time, a random token 10%,
// and stays unchanged 10%. Texts where nothing got selected have one
// position forced. Returns (masked ids, selected positions).
struct MaskedSequence {
  std::vector<std::uint32_t> ids;
  std::vector<std::size_t> positions;
};
MaskedSequence mask_tokens(std::span<const std::uint32_t> ids, double mask_probability,
                           std::uint32_t mask_id, std::uint32_t random_token_lo,
                           std::uint32_t random_token_hi, SeededRng& rng);

std::uint64_t fingerprint_instances(std::span<const Instance> instances);
std::uint64_t fingerprint_texts(std::span<const std::string> texts);

// Predictions JSONL: {"instance_id", "probs": {label: p, ...}, "predicted"}.
std::string predictions_to_jsonl(std::span<const Prediction> predictions);
void save_predictions(std::span<const Prediction> predictions,
                      const std::filesystem::path& path);
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

nlohmann::ordered_json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& value);
nlohmann::ordered_json mlm_config_to_json(const MLMConfig& cfg);
MLMConfig mlm_config_from_json(const nlohmann::json& value);

}  // namespace attachnlp
