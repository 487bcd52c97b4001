#pragma once

#include <memory>
#include <string>

#include "attachnlp/modeling.hpp"

namespace attachnlp {

struct TinyTransformerParams {
  int vocab = 4096;  // hashed word vocabulary, ids 0-3 reserved
  int dim = 32;
  int heads = 2;
  int layers = 2;
  int ff_dim = 64;
  int max_seq_length = 96;
  // The pipeline-wide learning rate is calibrated for full-size encoder
  // fine-tuning; this small from-scratch model multiplies it to reach a
  // workable step size.
  double lr_scale = 100.0;
  double clip_norm = 1.0;

  static TinyTransformerParams from_json(const nlohmann::json& value);
  nlohmann::ordered_json to_json() const;
};

// Small bidirectional transformer encoder (pre-norm, learned positions,
// mean pooling, tied MLM output embedding) trained with Adam. Supports
// both classifier fine-tuning and masked-language-model pretraining, so
// the full pretrain-then-finetune flow runs without external weights.
class TinyTransformerBackend final : public EncoderBackend {
 public:
  static constexpr std::string_view kName = "tiny-transformer";

  explicit TinyTransformerBackend(TinyTransformerParams params = {});
  ~TinyTransformerBackend() override;

  std::string name() const override { return std::string(kName); }
  int max_sequence_length() const override { return params_.max_seq_length; }
  bool supports_classify_finetune() const override { return true; }
  bool supports_mlm_pretrain() const override { return true; }

  std::vector<std::uint32_t> encode(std::string_view text) const override;
  nlohmann::ordered_json params() const override { return params_.to_json(); }

  FitStats fit_classifier(std::span<const Instance> train, std::span<const Instance> eval,
                          const TrainConfig& cfg) override;
  MlmStats fit_mlm(std::span<const std::string> train_texts,
                   std::span<const std::string> holdout_texts, const MLMConfig& cfg) override;
  std::vector<Prediction> predict(std::span<const Instance> instances,
                                  PredictStats* stats = nullptr) const override;

  void save(const std::filesystem::path& dir) const override;
  void load(const std::filesystem::path& dir) override;

 private:
  struct Model;

  TinyTransformerParams params_;
  std::unique_ptr<Model> model_;
};

}  // namespace attachnlp
