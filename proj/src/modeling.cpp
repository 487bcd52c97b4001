#include "attachnlp/modeling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "attachnlp/bow_backend.hpp"
#include "attachnlp/errors.hpp"
#include "attachnlp/transformer_backend.hpp"
#include "attachnlp/util.hpp"

namespace attachnlp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::uint64_t kMlmSplitStream = 0x6d6c6d73ULL;  // "mlms"

void require_known_keys(const json& value, std::initializer_list<std::string_view> known,
                        const char* what) {
  for (const auto& [key, _] : value.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw InvalidConfig(std::string(what) + ": unknown key \"" + key + "\"");
    }
  }
}

ordered_json checkpoint_meta(const std::string& kind, const EncoderBackend& backend,
                             const ordered_json& config_snapshot, double dev_metric,
                             int epoch_index, const std::vector<double>& curve) {
  ordered_json meta;
  meta["kind"] = kind;
  meta["backend"] = backend.name();
  meta["backend_params"] = backend.params();
  meta["config"] = config_snapshot;
  meta["dev_metric"] = dev_metric;
  meta["epoch_index"] = epoch_index;
  meta["metric_curve"] = curve;
  return meta;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidConfig("learning_rate must be positive");
  if (epochs < 1) throw InvalidConfig("epochs must be at least 1");
  if (batch_size < 1) throw InvalidConfig("batch_size must be at least 1");
  if (max_seq_length < 1) throw InvalidConfig("max_seq_length must be at least 1");
  if (num_classes != static_cast<int>(kNumLabels)) {
    throw InvalidConfig("num_classes must be 3");
  }
}

void MLMConfig::validate() const {
  if (!(mask_probability > 0.0 && mask_probability < 1.0)) {
    throw InvalidConfig("mask_probability must be in (0, 1)");
  }
  if (duplication_factor < 0) throw InvalidConfig("duplication_factor must be non-negative");
  if (epochs < 1) throw InvalidConfig("epochs must be at least 1");
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw InvalidConfig("holdout_fraction must be in (0, 1)");
  }
}

AttachmentLabel argmax_probabilities(const std::array<double, kNumLabels>& probabilities) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumLabels; ++i) {
    if (probabilities[i] > probabilities[best]) best = i;
  }
  return kLabelOrder[best];
}

FitStats EncoderBackend::fit_classifier(std::span<const Instance>, std::span<const Instance>,
                                        const TrainConfig&) {
  throw BackendFailure(name() + " does not implement classifier fine-tuning");
}

MlmStats EncoderBackend::fit_mlm(std::span<const std::string>, std::span<const std::string>,
                                 const MLMConfig&) {
  throw BackendFailure(name() + " does not implement MLM pretraining");
}

std::unique_ptr<EncoderBackend> make_backend(const std::string& name, const json& params) {
  if (name == BowLinearBackend::kName) {
    return std::make_unique<BowLinearBackend>(BowParams::from_json(params));
  }
  if (name == TinyTransformerBackend::kName) {
    return std::make_unique<TinyTransformerBackend>(TinyTransformerParams::from_json(params));
  }
  throw InvalidConfig("unknown backend \"" + name + "\" (available: " +
                      std::string(BowLinearBackend::kName) + ", " +
                      std::string(TinyTransformerBackend::kName) + ")");
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  const json meta = load_json_file(dir / "checkpoint.json");
  ModelCheckpoint checkpoint;
  try {
    checkpoint.backend_name = meta.at("backend").get<std::string>();
    checkpoint.dir = dir;
    checkpoint.config_snapshot = meta.at("config");
    checkpoint.dev_metric = meta.at("dev_metric").get<double>();
    checkpoint.epoch_index = meta.at("epoch_index").get<int>();
    checkpoint.metric_curve = meta.at("metric_curve").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw MalformedRecord("bad checkpoint metadata in " + dir.string() + ": " + e.what());
  }
  return checkpoint;
}

std::unique_ptr<EncoderBackend> open_checkpoint_backend(const ModelCheckpoint& checkpoint) {
  const json meta = load_json_file(checkpoint.dir / "checkpoint.json");
  auto backend = make_backend(checkpoint.backend_name, meta.value("backend_params", json::object()));
  backend->load(checkpoint.dir);
  return backend;
}

ModelCheckpoint train_classifier(EncoderBackend& backend, std::span<const Instance> train,
                                 std::span<const Instance> eval, const TrainConfig& cfg,
                                 const std::filesystem::path& out_dir) {
  cfg.validate();
  if (!backend.supports_classify_finetune()) {
    throw InvalidConfig("backend \"" + backend.name() + "\" does not support classifier fine-tuning");
  }
  if (train.empty()) throw EmptyInput("training instance list is empty");
  if (eval.empty()) throw EmptyInput("eval instance list is empty");
  std::array<bool, kNumLabels> present{};
  for (const Instance& instance : train) present[label_index(instance.label)] = true;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (!present[i]) {
      throw MissingClassInTrain("class \"" + std::string(label_name(kLabelOrder[i])) +
                                "\" is absent from the training instances");
    }
  }

  FitStats stats;
  try {
    stats = backend.fit_classifier(train, eval, cfg);
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendFailure(backend.name() + ": " + e.what());
  }

  std::filesystem::create_directories(out_dir);
  backend.save(out_dir);

  ModelCheckpoint checkpoint;
  checkpoint.backend_name = backend.name();
  checkpoint.dir = out_dir;
  checkpoint.config_snapshot = train_config_to_json(cfg);
  checkpoint.dev_metric = stats.best_eval_accuracy;
  checkpoint.epoch_index = stats.best_epoch;
  checkpoint.metric_curve = stats.eval_accuracy_by_epoch;
  save_json_file(out_dir / "checkpoint.json",
                 checkpoint_meta("classifier", backend, checkpoint.config_snapshot,
                                 checkpoint.dev_metric, checkpoint.epoch_index,
                                 checkpoint.metric_curve));

  ordered_json manifest;
  manifest["kind"] = "train";
  manifest["backend"] = backend.name();
  manifest["backend_params"] = backend.params();
  manifest["effective_config"] = checkpoint.config_snapshot;
  manifest["data"] = {{"train_fingerprint", hex64(fingerprint_instances(train))},
                      {"eval_fingerprint", hex64(fingerprint_instances(eval))},
                      {"train_count", train.size()},
                      {"eval_count", eval.size()}};
  manifest["eval_accuracy_by_epoch"] = stats.eval_accuracy_by_epoch;
  manifest["best"] = {{"epoch", stats.best_epoch},
                      {"eval_accuracy", stats.best_eval_accuracy}};
  manifest["truncated"] = {{"train", stats.truncated_train}, {"eval", stats.truncated_eval}};
  save_json_file(out_dir / "manifest.json", manifest);
  return checkpoint;
}

std::vector<Prediction> predict(const ModelCheckpoint& checkpoint,
                                std::span<const Instance> instances, PredictStats* stats) {
  auto backend = open_checkpoint_backend(checkpoint);
  try {
    return backend->predict(instances, stats);
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendFailure(backend->name() + ": " + e.what());
  }
}

MlmData prepare_mlm_data(std::span<const std::string> texts, const MLMConfig& cfg) {
  cfg.validate();
  if (texts.empty()) throw EmptyInput("no texts to prepare for MLM");

  const std::size_t n = texts.size();
  const auto holdout_n = static_cast<std::size_t>(
      std::llround(cfg.holdout_fraction * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SeededRng rng(SeededRng::derive(cfg.seed, kMlmSplitStream));
  rng.shuffle(order);

  std::vector<std::size_t> holdout_idx(order.begin(), order.begin() + holdout_n);
  std::vector<std::size_t> train_idx(order.begin() + holdout_n, order.end());
  std::sort(holdout_idx.begin(), holdout_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  MlmData data;
  data.unique_train = train_idx.size();
  for (std::size_t idx : holdout_idx) data.holdout.push_back(texts[idx]);
  for (int copy = 0; copy <= cfg.duplication_factor; ++copy) {
    for (std::size_t idx : train_idx) data.train_entries.push_back(texts[idx]);
  }
  return data;
}

ModelCheckpoint dapt_pretrain(EncoderBackend& backend, const MlmData& data,
                              const MLMConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  if (!backend.supports_mlm_pretrain()) {
    throw InvalidConfig("backend \"" + backend.name() + "\" does not support MLM pretraining");
  }
  if (data.train_entries.empty()) throw EmptyInput("MLM training set is empty");
  if (data.holdout.empty()) {
    throw EmptyInput("MLM holdout is empty; perplexity validation needs held-out texts");
  }

  MlmStats stats;
  try {
    stats = backend.fit_mlm(data.train_entries, data.holdout, cfg);
  } catch (const ValidationError&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendFailure(backend.name() + ": " + e.what());
  }

  std::filesystem::create_directories(out_dir);
  backend.save(out_dir);

  ModelCheckpoint checkpoint;
  checkpoint.backend_name = backend.name();
  checkpoint.dir = out_dir;
  checkpoint.config_snapshot = mlm_config_to_json(cfg);
  checkpoint.dev_metric = stats.best_perplexity;
  checkpoint.epoch_index = stats.best_epoch;
  checkpoint.metric_curve = stats.holdout_perplexity_by_epoch;
  save_json_file(out_dir / "checkpoint.json",
                 checkpoint_meta("mlm", backend, checkpoint.config_snapshot,
                                 checkpoint.dev_metric, checkpoint.epoch_index,
                                 checkpoint.metric_curve));

  ordered_json manifest;
  manifest["kind"] = "dapt";
  manifest["backend"] = backend.name();
  manifest["backend_params"] = backend.params();
  manifest["effective_config"] = checkpoint.config_snapshot;
  manifest["data"] = {{"train_fingerprint", hex64(fingerprint_texts(data.train_entries))},
                      {"holdout_fingerprint", hex64(fingerprint_texts(data.holdout))},
                      {"train_entries", data.train_entries.size()},
                      {"unique_train", data.unique_train},
                      {"holdout_count", data.holdout.size()}};
  manifest["holdout_perplexity_by_epoch"] = stats.holdout_perplexity_by_epoch;
  manifest["best"] = {{"epoch", stats.best_epoch}, {"perplexity", stats.best_perplexity}};
  manifest["holdout_masked_positions"] = stats.holdout_masked_positions;
  save_json_file(out_dir / "manifest.json", manifest);
  return checkpoint;
}

MaskedSequence mask_tokens(std::span<const std::uint32_t> ids, double mask_probability,
                           std::uint32_t mask_id, std::uint32_t random_token_lo,
                           std::uint32_t random_token_hi, SeededRng& rng) {
  MaskedSequence out;
  out.ids.assign(ids.begin(), ids.end());
  for (std::size_t pos = 0; pos < ids.size(); ++pos) {
    if (!rng.bernoulli(mask_probability)) continue;
    out.positions.push_back(pos);
    const double action = rng.uniform01();
    if (action < 0.8) {
      out.ids[pos] = mask_id;
    } else if (action < 0.9) {
      out.ids[pos] = random_token_lo +
                     static_cast<std::uint32_t>(rng.bounded(random_token_hi - random_token_lo));
    }  // else keep the original token
  }
  if (out.positions.empty() && !ids.empty()) {
    const std::size_t pos = static_cast<std::size_t>(rng.bounded(ids.size()));
    out.positions.push_back(pos);
    out.ids[pos] = mask_id;
  }
  return out;
}

std::uint64_t fingerprint_instances(std::span<const Instance> instances) {
  return fnv1a64(instances_to_jsonl(instances));
}

std::uint64_t fingerprint_texts(std::span<const std::string> texts) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view bytes) {
    for (char c : bytes) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
  };
  for (const std::string& text : texts) {
    mix(text);
    mix(std::string_view("\x1e", 1));  // record separator
  }
  return h;
}

std::string predictions_to_jsonl(std::span<const Prediction> predictions) {
  std::ostringstream out;
  for (const Prediction& prediction : predictions) {
    ordered_json record;
    record["instance_id"] = prediction.instance_id;
    ordered_json probs;
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      probs[std::string(label_name(kLabelOrder[i]))] = prediction.probabilities[i];
    }
    record["probs"] = std::move(probs);
    record["predicted"] = std::string(label_name(prediction.predicted));
    out << record.dump() << "\n";
  }
  return out.str();
}

void save_predictions(std::span<const Prediction> predictions,
                      const std::filesystem::path& path) {
  write_text_file(path, predictions_to_jsonl(predictions));
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open predictions file: " + path.string());

  std::vector<Prediction> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw MalformedRecord("line " + std::to_string(line_no) + ": invalid JSON");
    }
    try {
      Prediction prediction;
      prediction.instance_id = record.at("instance_id").get<std::string>();
      const json& probs = record.at("probs");
      double sum = 0.0;
      for (std::size_t i = 0; i < kNumLabels; ++i) {
        prediction.probabilities[i] =
            probs.at(std::string(label_name(kLabelOrder[i]))).get<double>();
        sum += prediction.probabilities[i];
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        throw MalformedRecord("line " + std::to_string(line_no) +
                              ": probabilities sum to " + std::to_string(sum));
      }
      const std::string raw = record.at("predicted").get<std::string>();
      const auto label = parse_label(raw);
      if (!label) {
        throw MalformedRecord("line " + std::to_string(line_no) + ": unknown label \"" +
                              raw + "\"");
      }
      prediction.predicted = *label;
      out.push_back(std::move(prediction));
    } catch (const json::exception& e) {
      throw MalformedRecord("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ordered_json train_config_to_json(const TrainConfig& cfg) {
  ordered_json out;
  out["learning_rate"] = cfg.learning_rate;
  out["epochs"] = cfg.epochs;
  out["batch_size"] = cfg.batch_size;
  out["max_seq_length"] = cfg.max_seq_length;
  out["seed"] = cfg.seed;
  out["num_classes"] = cfg.num_classes;
  return out;
}

TrainConfig train_config_from_json(const json& value) {
  if (!value.is_object()) throw InvalidConfig("train config must be a JSON object");
  require_known_keys(value,
                     {"learning_rate", "epochs", "batch_size", "max_seq_length", "seed",
                      "num_classes"},
                     "train config");
  TrainConfig cfg;
  cfg.learning_rate = value.value("learning_rate", cfg.learning_rate);
  cfg.epochs = value.value("epochs", cfg.epochs);
  cfg.batch_size = value.value("batch_size", cfg.batch_size);
  cfg.max_seq_length = value.value("max_seq_length", cfg.max_seq_length);
  cfg.seed = value.value("seed", cfg.seed);
  cfg.num_classes = value.value("num_classes", cfg.num_classes);
  cfg.validate();
  return cfg;
}

ordered_json mlm_config_to_json(const MLMConfig& cfg) {
  ordered_json out;
  out["mask_probability"] = cfg.mask_probability;
  out["duplication_factor"] = cfg.duplication_factor;
  out["epochs"] = cfg.epochs;
  out["holdout_fraction"] = cfg.holdout_fraction;
  out["seed"] = cfg.seed;
  return out;
}

MLMConfig mlm_config_from_json(const json& value) {
  if (!value.is_object()) throw InvalidConfig("MLM config must be a JSON object");
  require_known_keys(
      value, {"mask_probability", "duplication_factor", "epochs", "holdout_fraction", "seed"},
      "MLM config");
  MLMConfig cfg;
  cfg.mask_probability = value.value("mask_probability", cfg.mask_probability);
  cfg.duplication_factor = value.value("duplication_factor", cfg.duplication_factor);
  cfg.epochs = value.value("epochs", cfg.epochs);
  cfg.holdout_fraction = value.value("holdout_fraction", cfg.holdout_fraction);
  cfg.seed = value.value("seed", cfg.seed);
  cfg.validate();
  return cfg;
}

}  // namespace attachnlp
