#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "attachnlp/modeling.hpp"

namespace attachnlp {

struct BowParams {
  int hash_dim = 1 << 16;        // hashed unigram feature space
  int max_seq_length = 4096;     // words; inputs beyond this are truncated
  // The pipeline-wide learning rate is calibrated for encoder fine-tuning;
  // the linear model multiplies it by this factor to reach a magnitude
  // that moves hashed-unigram weights.
  double lr_scale = 5000.0;
  double weight_decay = 0.05;  // decoupled, applied to weights only

  static BowParams from_json(const nlohmann::json& value);
  nlohmann::ordered_json to_json() const;
};

// Reference backend: hashed tf-idf bag-of-words features and a softmax-
// regression head trained with Adam. No pretraining support. Fast and
// bit-exactly reproducible, which keeps pipeline tests independent of
// heavyweight encoders.
class BowLinearBackend final : public EncoderBackend {
 public:
  static constexpr std::string_view kName = "bow";

  explicit BowLinearBackend(BowParams params = {});

  std::string name() const override { return std::string(kName); }
  int max_sequence_length() const override { return params_.max_seq_length; }
  bool supports_classify_finetune() const override { return true; }

  std::vector<std::uint32_t> encode(std::string_view text) const override;
  nlohmann::ordered_json params() const override { return params_.to_json(); }

  FitStats fit_classifier(std::span<const Instance> train, std::span<const Instance> eval,
                          const TrainConfig& cfg) override;
  std::vector<Prediction> predict(std::span<const Instance> instances,
                                  PredictStats* stats = nullptr) const override;

  void save(const std::filesystem::path& dir) const override;
  void load(const std::filesystem::path& dir) override;

 private:
  using SparseFeatures = std::vector<std::pair<std::uint32_t, float>>;

  // Hashed term counts of the (truncated) text.
  SparseFeatures term_counts(std::string_view text, int effective_max_len,
                             bool* truncated) const;
  // log(1+tf) * idf, L2-normalized. Terms unseen in training carry no idf
  // and drop out.
  SparseFeatures featurize(const SparseFeatures& counts) const;
  std::array<double, kNumLabels> scores(const SparseFeatures& features) const;

  BowParams params_;
  std::vector<float> weights_;               // kNumLabels x hash_dim, row-major
  std::array<float, kNumLabels> bias_{};
  std::vector<float> idf_;                   // hash_dim, fit on training data
  bool trained_ = false;
};

}  // namespace attachnlp
