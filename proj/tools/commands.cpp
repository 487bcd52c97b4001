#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <unordered_map>

#include "json.hpp"

#include "attachnlp/corpus.hpp"
#include "attachnlp/ensemble.hpp"
#include "attachnlp/errors.hpp"
#include "attachnlp/evaluation.hpp"
#include "attachnlp/instances.hpp"
#include "attachnlp/modeling.hpp"
#include "attachnlp/splits.hpp"
#include "attachnlp/synthgen.hpp"
#include "attachnlp/util.hpp"

namespace attachnlp::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string percent(double fraction) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.1f%%", fraction * 100.0);
  return buffer;
}

void print_distribution(const char* heading, const ClassDistribution& dist) {
  std::cout << heading << "\n";
  const auto props = dist.proportions();
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    std::cout << "  " << label_name(kLabelOrder[i]) << ": " << dist.counts[i] << " ("
              << percent(props[i]) << ")\n";
  }
  std::cout << "  total: " << dist.total() << "\n";
}

CostMatrix resolve_costs(const std::string& spec) {
  if (spec == "default") return CostMatrix::clinical_default();
  return cost_matrix_from_json(load_json_file(spec));
}

}  // namespace

std::string resolve_out_dir(const std::string& flag_value, const std::string& kind,
                            std::uint64_t fingerprint) {
  if (!flag_value.empty()) return flag_value;
  const char* cache = std::getenv("ATTACHNLP_CACHE_DIR");
  if (cache == nullptr || *cache == '\0') {
    throw InvalidConfig("no output directory: pass --out-dir or set ATTACHNLP_CACHE_DIR");
  }
  return (std::filesystem::path(cache) / (kind + "-" + hex64(fingerprint))).string();
}

void run_synth(const SynthOptions& opts) {
  SynthConfig cfg;
  if (!opts.config_path.empty()) cfg = SynthConfig::from_json(load_json_file(opts.config_path));
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.marker_strength >= 0.0) cfg.marker_strength = opts.marker_strength;
  cfg.validate();

  const Corpus corpus = generate_corpus(cfg);
  save_corpus(corpus, opts.out_path);

  ordered_json manifest;
  manifest["kind"] = "synth";
  manifest["effective_config"] = cfg.to_json();
  manifest["output"] = opts.out_path;
  manifest["output_fingerprint"] = hex64(fnv1a64(corpus_to_jsonl(corpus)));
  manifest["documents"] = corpus.documents.size();
  save_json_file(opts.out_path + ".manifest.json", manifest);

  print_distribution("document distribution:", corpus_stats(corpus, StatsLevel::Document));
  std::cout << "wrote " << corpus.documents.size() << " documents to " << opts.out_path << "\n";
}

void run_stats(const StatsOptions& opts) {
  const Corpus corpus = load_corpus(opts.corpus_path, /*require_labels=*/true);
  const ClassDistribution doc_dist = corpus_stats(corpus, StatsLevel::Document);
  const ClassDistribution turn_dist = corpus_stats(corpus, StatsLevel::Turn);

  print_distribution("document distribution:", doc_dist);
  print_distribution("patient-turn distribution:", turn_dist);

  std::array<std::int64_t, kNumLabels> patient_words{};
  for (const Transcript& doc : corpus.documents) {
    for (const SpeechTurn& turn : extract_patient_turns(doc)) {
      patient_words[label_index(*doc.label)] += word_count(turn.text);
    }
  }
  std::cout << "patient words (whitespace tokens):\n";
  std::int64_t total_words = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    std::cout << "  " << label_name(kLabelOrder[i]) << ": " << patient_words[i] << "\n";
    total_words += patient_words[i];
  }
  std::cout << "  total: " << total_words << "\n";

  std::vector<std::int64_t> cuts = opts.bins;
  if (cuts.empty()) cuts = {5, 10, 25, 50, 100, 200};
  const TurnLengthHistogram hist = turn_length_histogram(corpus, cuts);

  std::cout << "patient-turn length histogram (words):\n";
  for (std::size_t bin = 0; bin < hist.bin_count(); ++bin) {
    std::cout << "  " << hist.bin_name(bin) << ":";
    for (std::size_t label = 0; label < kNumLabels; ++label) {
      std::cout << " " << label_name(kLabelOrder[label])[0] << "=" << hist.counts[label][bin];
    }
    std::cout << "\n";
  }

  if (!opts.out_path.empty()) {
    ordered_json out;
    out["input"] = opts.corpus_path;
    out["input_fingerprint"] = hex64(fnv1a64(read_text_file(opts.corpus_path)));
    out["document_distribution"] = distribution_to_json(doc_dist);
    out["turn_distribution"] = distribution_to_json(turn_dist);
    ordered_json words_json;
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      words_json[std::string(label_name(kLabelOrder[i]))] = patient_words[i];
    }
    words_json["total"] = total_words;
    out["patient_words"] = std::move(words_json);
    ordered_json hist_json;
    hist_json["cuts"] = hist.cuts;
    for (std::size_t label = 0; label < kNumLabels; ++label) {
      hist_json[std::string(label_name(kLabelOrder[label]))] = hist.counts[label];
    }
    out["turn_length_histogram"] = std::move(hist_json);
    save_json_file(opts.out_path, out);
    std::cout << "wrote " << opts.out_path << "\n";
  }
}

void run_segment(const SegmentOptions& opts) {
  const Corpus corpus = load_corpus(opts.corpus_path, /*require_labels=*/true);
  MinLengthConfig cfg;
  cfg.min_length = opts.min_length;
  cfg.keep_trailing_multi_turn = !opts.drop_trailing;

  const CorpusInstances result = build_corpus_instances(corpus, cfg);
  save_instances(result.instances, opts.out_path);

  ordered_json manifest;
  manifest["kind"] = "segment";
  manifest["input"] = opts.corpus_path;
  manifest["input_fingerprint"] = hex64(fnv1a64(read_text_file(opts.corpus_path)));
  manifest["effective_config"] = {{"min_length", cfg.min_length},
                                  {"keep_trailing_multi_turn", cfg.keep_trailing_multi_turn}};
  manifest["instances"] = result.instances.size();
  manifest["distribution"] = distribution_to_json(result.distribution);
  manifest["output_fingerprint"] = hex64(fingerprint_instances(result.instances));
  save_json_file(opts.out_path + ".manifest.json", manifest);

  print_distribution("instance distribution:", result.distribution);
  std::cout << "wrote " << result.instances.size() << " instances to " << opts.out_path << "\n";
}

void run_split(const SplitOptions& opts) {
  const Corpus corpus = load_corpus(opts.corpus_path, /*require_labels=*/true);
  const SplitPlan plan = stratified_split(corpus, opts.test_count, opts.seed);
  save_split(plan, opts.out_path);
  std::cout << "split: " << plan.train_doc_ids.size() << " train / "
            << plan.test_doc_ids.size() << " test documents -> " << opts.out_path << "\n";

  if (!opts.folds_out_path.empty()) {
    const FoldPlan folds = make_folds(corpus, plan, opts.k, opts.eval_fraction, opts.seed);
    save_folds(folds, opts.folds_out_path);
    std::cout << "folds: " << folds.folds.size() << " stratified draws ("
              << folds.folds.front().train_doc_ids.size() << " train / "
              << folds.folds.front().eval_doc_ids.size() << " eval docs each) -> "
              << opts.folds_out_path << "\n";
  }

  ordered_json manifest;
  manifest["kind"] = "split";
  manifest["input"] = opts.corpus_path;
  manifest["input_fingerprint"] = hex64(fnv1a64(read_text_file(opts.corpus_path)));
  manifest["effective_config"] = {{"test_count", opts.test_count},
                                  {"seed", opts.seed},
                                  {"k", opts.k},
                                  {"eval_fraction", opts.eval_fraction}};
  save_json_file(opts.out_path + ".manifest.json", manifest);
}

void run_dapt(const DaptOptions& opts) {
  const Corpus corpus = load_corpus(opts.corpus_path, /*require_labels=*/false);
  std::vector<std::string> texts;
  for (const Transcript& doc : corpus.documents) {
    for (const SpeechTurn& turn : extract_patient_turns(doc)) texts.push_back(turn.text);
  }
  if (texts.empty()) throw EmptyInput("corpus has no patient turns to pretrain on");

  MLMConfig cfg;
  if (!opts.config_path.empty()) cfg = mlm_config_from_json(load_json_file(opts.config_path));
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);

  json backend_params = json::object();
  if (!opts.backend_params_path.empty()) backend_params = load_json_file(opts.backend_params_path);
  auto backend = make_backend(opts.backend, backend_params);

  const std::string out_dir =
      resolve_out_dir(opts.out_dir, "dapt", fingerprint_texts(texts) ^ cfg.seed);
  const MlmData data = prepare_mlm_data(texts, cfg);
  const ModelCheckpoint checkpoint = dapt_pretrain(*backend, data, cfg, out_dir);

  std::cout << "dapt: " << data.unique_train << " unique texts x"
            << (cfg.duplication_factor + 1) << ", " << data.holdout.size() << " holdout\n";
  std::cout << "best epoch " << checkpoint.epoch_index << " holdout perplexity "
            << checkpoint.dev_metric << " -> " << out_dir << "\n";
}

namespace {

// Layered config resolution: defaults, then file, then explicit flags.
TrainConfig resolve_train_config(const TrainOptions& opts, std::string* backend_name,
                                 json* backend_params) {
  json file_config = json::object();
  if (!opts.config_path.empty()) {
    file_config = load_json_file(opts.config_path);
    if (file_config.contains("effective_config")) {
      // A run manifest; reuse its backend too unless overridden by flags.
      if (file_config.contains("backend") && !opts.backend_set) {
        *backend_name = file_config.at("backend").get<std::string>();
        if (file_config.contains("backend_params")) {
          *backend_params = file_config.at("backend_params");
        }
      }
      file_config = file_config.at("effective_config");
    }
  }
  TrainConfig cfg = train_config_from_json(file_config);
  if (opts.learning_rate > 0.0) cfg.learning_rate = opts.learning_rate;
  if (opts.epochs > 0) cfg.epochs = opts.epochs;
  if (opts.batch_size > 0) cfg.batch_size = opts.batch_size;
  if (opts.max_seq_length > 0) cfg.max_seq_length = opts.max_seq_length;
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  cfg.validate();
  return cfg;
}

}  // namespace

void run_train(const TrainOptions& opts) {
  const std::vector<Instance> train = load_instances(opts.train_path);
  const std::vector<Instance> eval = load_instances(opts.eval_path);

  std::string backend_name = opts.backend;
  json backend_params = json::object();
  if (!opts.backend_params_path.empty()) backend_params = load_json_file(opts.backend_params_path);
  const TrainConfig cfg = resolve_train_config(opts, &backend_name, &backend_params);

  std::unique_ptr<EncoderBackend> backend;
  if (!opts.init_from.empty()) {
    const ModelCheckpoint pretrained = load_checkpoint(opts.init_from);
    if (opts.backend_set && pretrained.backend_name != backend_name) {
      throw InvalidConfig("--backend " + backend_name + " conflicts with checkpoint backend " +
                          pretrained.backend_name);
    }
    backend_name = pretrained.backend_name;
    backend = open_checkpoint_backend(pretrained);
  } else {
    backend = make_backend(backend_name, backend_params);
  }

  const std::string out_dir =
      resolve_out_dir(opts.out_dir, "train", fingerprint_instances(train) ^ cfg.seed);
  const ModelCheckpoint checkpoint = train_classifier(*backend, train, eval, cfg, out_dir);

  std::cout << "train: " << train.size() << " train / " << eval.size()
            << " eval instances, backend " << backend_name << "\n";
  std::cout << "best epoch " << checkpoint.epoch_index << " eval accuracy "
            << checkpoint.dev_metric << " -> " << out_dir << "\n";
}

void run_predict(const PredictOptions& opts) {
  const ModelCheckpoint checkpoint = load_checkpoint(opts.model_dir);
  const std::vector<Instance> instances = load_instances(opts.instances_path);

  PredictStats stats;
  const std::vector<Prediction> predictions = predict(checkpoint, instances, &stats);
  save_predictions(predictions, opts.out_path);

  ordered_json manifest;
  manifest["kind"] = "predict";
  manifest["model"] = opts.model_dir;
  manifest["backend"] = checkpoint.backend_name;
  manifest["instances"] = opts.instances_path;
  manifest["instances_fingerprint"] = hex64(fingerprint_instances(instances));
  manifest["count"] = predictions.size();
  manifest["truncated"] = stats.truncated;
  save_json_file(opts.out_path + ".manifest.json", manifest);

  std::cout << "predicted " << predictions.size() << " instances (" << stats.truncated
            << " truncated) -> " << opts.out_path << "\n";
}

void run_vote(const VoteOptions& opts) {
  std::vector<std::vector<Prediction>> per_model;
  for (const std::string& path : opts.prediction_paths) {
    per_model.push_back(load_predictions(path));
  }
  const std::vector<VoteRecord> records = majority_vote(per_model);
  save_votes(records, opts.out_path);

  std::int64_t ties = 0;
  for (const VoteRecord& record : records) ties += record.tie_broken ? 1 : 0;

  ordered_json manifest;
  manifest["kind"] = "vote";
  manifest["models"] = opts.prediction_paths;
  manifest["instances"] = records.size();
  manifest["ties_broken"] = ties;
  save_json_file(opts.out_path + ".manifest.json", manifest);

  std::cout << "majority vote over " << per_model.size() << " models: " << records.size()
            << " instances, " << ties << " ties broken -> " << opts.out_path << "\n";
}

void run_evaluate(const EvaluateOptions& opts) {
  const std::vector<Instance> gold = load_instances(opts.gold_path);

  // The prediction file is either per-model predictions or a vote report.
  std::vector<std::pair<std::string, AttachmentLabel>> predicted;
  bool is_vote = false;
  {
    const std::string head = read_text_file(opts.pred_path);
    const auto first_brace = head.find('{');
    is_vote = first_brace != std::string::npos &&
              head.find("\"winner\"", first_brace) != std::string::npos;
  }
  if (is_vote) {
    for (const VoteRecord& record : load_votes(opts.pred_path)) {
      predicted.emplace_back(record.instance_id, record.winner);
    }
  } else {
    for (const Prediction& prediction : load_predictions(opts.pred_path)) {
      predicted.emplace_back(prediction.instance_id, prediction.predicted);
    }
  }

  std::unordered_map<std::string, AttachmentLabel> by_id;
  for (const auto& [id, label] : predicted) {
    if (!by_id.emplace(id, label).second) {
      throw InstanceSetMismatch("duplicate prediction for instance \"" + id + "\"");
    }
  }
  if (by_id.size() != gold.size()) {
    throw InstanceSetMismatch("gold has " + std::to_string(gold.size()) +
                              " instances, predictions cover " + std::to_string(by_id.size()));
  }
  std::vector<AttachmentLabel> gold_labels;
  std::vector<AttachmentLabel> pred_labels;
  std::unordered_map<std::string, bool> seen_gold;
  for (const Instance& instance : gold) {
    if (!seen_gold.emplace(instance.instance_id, true).second) {
      throw InstanceSetMismatch("duplicate gold instance \"" + instance.instance_id + "\"");
    }
    const auto it = by_id.find(instance.instance_id);
    if (it == by_id.end()) {
      throw InstanceSetMismatch("no prediction for instance \"" + instance.instance_id + "\"");
    }
    gold_labels.push_back(instance.label);
    pred_labels.push_back(it->second);
  }

  const ConfusionMatrix cm = confusion(gold_labels, pred_labels);
  const MetricReport report = metrics(cm);
  const CostMatrix costs = resolve_costs(opts.costs);
  const double cost = cost_score(cm, costs);

  const std::string out_dir = resolve_out_dir(
      opts.out_dir, "evaluate", fingerprint_instances(gold) ^ fnv1a64(opts.pred_path));
  std::filesystem::create_directories(out_dir);
  for (const std::string& warning : report.warnings) {
    std::cerr << "warning: " << warning << "\n";
  }

  ordered_json metrics_json = metrics_to_json(report);
  metrics_json["cost_score"] = cost;
  metrics_json["n_instances"] = gold.size();
  metrics_json["prediction_kind"] = is_vote ? "vote" : "fold";
  save_json_file(std::filesystem::path(out_dir) / "metrics.json", metrics_json);
  save_json_file(std::filesystem::path(out_dir) /
                     (is_vote ? "confusion_vote.json" : "confusion_fold.json"),
                 confusion_to_json(cm));
  save_json_file(std::filesystem::path(out_dir) / "costs.json", cost_matrix_to_json(costs));

  std::cout << "accuracy " << percent(report.accuracy) << ", macro precision "
            << percent(report.macro_precision) << ", macro recall "
            << percent(report.macro_recall) << ", mean cost " << cost << "\n";
  std::cout << "wrote metrics to " << out_dir << "\n";
}

}  // namespace attachnlp::cli
