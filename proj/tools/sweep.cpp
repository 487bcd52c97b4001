#include <algorithm>
#include <iostream>
#include <thread>

#include "json.hpp"

#include "attachnlp/corpus.hpp"
#include "attachnlp/ensemble.hpp"
#include "attachnlp/errors.hpp"
#include "attachnlp/evaluation.hpp"
#include "attachnlp/instances.hpp"
#include "attachnlp/modeling.hpp"
#include "attachnlp/plots.hpp"
#include "attachnlp/rng.hpp"
#include "attachnlp/splits.hpp"
#include "attachnlp/util.hpp"
#include "commands.hpp"

namespace attachnlp::cli {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<Instance> filter_by_docs(const std::vector<Instance>& all,
                                     const std::vector<std::string>& sorted_doc_ids) {
  std::vector<Instance> out;
  for (const Instance& instance : all) {
    if (contains_doc(sorted_doc_ids, instance.doc_id)) out.push_back(instance);
  }
  return out;
}

// Instances built downstream must inherit the plan's document partition.
void assert_no_leakage(const std::vector<Instance>& instances, const SplitPlan& plan,
                       const Fold& fold) {
  for (const Instance& instance : instances) {
    const bool in_test = contains_doc(plan.test_doc_ids, instance.doc_id);
    const bool in_eval = contains_doc(fold.eval_doc_ids, instance.doc_id);
    const bool in_train = contains_doc(fold.train_doc_ids, instance.doc_id);
    if (in_test || (in_eval && in_train) || (!in_eval && !in_train)) {
      throw RuntimeFailure("document partition violated for instance " + instance.instance_id);
    }
  }
}

struct FoldOutcome {
  double eval_accuracy = 0.0;
  double test_accuracy = 0.0;
  ConfusionMatrix test_confusion;
  std::vector<Prediction> test_predictions;
};

struct MinLengthOutcome {
  std::int64_t min_length = 0;
  std::vector<FoldOutcome> folds;
  double vote_accuracy = 0.0;
  std::int64_t ties_broken = 0;
  ConfusionMatrix vote_confusion;
  std::int64_t n_test_instances = 0;
  ClassDistribution test_distribution;
  ClassDistribution all_distribution;
};

std::vector<AttachmentLabel> gold_of(const std::vector<Instance>& instances) {
  std::vector<AttachmentLabel> out;
  out.reserve(instances.size());
  for (const Instance& instance : instances) out.push_back(instance.label);
  return out;
}

std::vector<AttachmentLabel> predicted_of(const std::vector<Prediction>& predictions) {
  std::vector<AttachmentLabel> out;
  out.reserve(predictions.size());
  for (const Prediction& prediction : predictions) out.push_back(prediction.predicted);
  return out;
}

}  // namespace

void run_sweep(const SweepOptions& opts) {
  if (opts.min_lengths.empty()) throw InvalidConfig("sweep needs at least one --min-lengths value");
  if (opts.jobs < 1) throw InvalidConfig("--jobs must be at least 1");
  std::vector<std::int64_t> min_lengths = opts.min_lengths;
  std::sort(min_lengths.begin(), min_lengths.end());
  min_lengths.erase(std::unique(min_lengths.begin(), min_lengths.end()), min_lengths.end());

  const Corpus corpus = load_corpus(opts.corpus_path, /*require_labels=*/true);
  const std::string corpus_fingerprint = hex64(fnv1a64(read_text_file(opts.corpus_path)));

  TrainConfig base_cfg;
  if (!opts.train_config_path.empty()) {
    base_cfg = train_config_from_json(load_json_file(opts.train_config_path));
  }
  json backend_params = json::object();
  if (!opts.backend_params_path.empty()) {
    backend_params = load_json_file(opts.backend_params_path);
  }
  const CostMatrix costs =
      opts.costs == "default" ? CostMatrix::clinical_default()
                              : cost_matrix_from_json(load_json_file(opts.costs));

  const std::filesystem::path out_dir =
      resolve_out_dir(opts.out_dir, "sweep", fnv1a64(corpus_fingerprint) ^ opts.seed);
  std::filesystem::create_directories(out_dir);

  // One document split and one fold plan, shared by every minimum length.
  const SplitPlan plan = stratified_split(corpus, opts.test_count, opts.seed);
  const FoldPlan folds = make_folds(corpus, plan, opts.k, opts.eval_fraction, opts.seed);
  save_split(plan, out_dir / "split.json");
  save_folds(folds, out_dir / "folds.json");

  std::vector<MinLengthOutcome> outcomes;
  for (const std::int64_t min_length : min_lengths) {
    MinLengthConfig chunk_cfg;
    chunk_cfg.min_length = min_length;
    chunk_cfg.keep_trailing_multi_turn = !opts.drop_trailing;

    const CorpusInstances all = build_corpus_instances(corpus, chunk_cfg);
    const std::vector<Instance> test_instances = filter_by_docs(all.instances, plan.test_doc_ids);
    if (test_instances.empty()) {
      throw EmptyInput("min_length " + std::to_string(min_length) +
                       " leaves no test instances");
    }

    const std::filesystem::path length_dir =
        out_dir / ("min_" + std::to_string(min_length));
    std::filesystem::create_directories(length_dir);
    save_instances(test_instances, length_dir / "instances_test.jsonl");

    MinLengthOutcome outcome;
    outcome.min_length = min_length;
    outcome.folds.resize(folds.folds.size());
    outcome.n_test_instances = static_cast<std::int64_t>(test_instances.size());
    outcome.test_distribution = instance_distribution(test_instances);
    outcome.all_distribution = all.distribution;

    // Folds are independent; train up to --jobs of them in parallel, each
    // in its own directory with its own backend instance.
    std::vector<std::exception_ptr> errors(folds.folds.size());
    auto train_fold = [&](std::size_t fold_idx) {
      try {
        const Fold& fold = folds.folds[fold_idx];
        const std::vector<Instance> train_instances =
            filter_by_docs(all.instances, fold.train_doc_ids);
        const std::vector<Instance> eval_instances =
            filter_by_docs(all.instances, fold.eval_doc_ids);
        assert_no_leakage(train_instances, plan, fold);
        assert_no_leakage(eval_instances, plan, fold);

        const std::filesystem::path fold_dir =
            length_dir / ("fold_" + std::to_string(fold_idx));
        std::filesystem::create_directories(fold_dir);
        save_instances(train_instances, fold_dir / "instances_train.jsonl");
        save_instances(eval_instances, fold_dir / "instances_eval.jsonl");

        TrainConfig cfg = base_cfg;
        cfg.seed = SeededRng::derive(opts.seed, (static_cast<std::uint64_t>(min_length) << 8) |
                                                    fold_idx);
        auto backend = make_backend(opts.backend, backend_params);
        const ModelCheckpoint checkpoint =
            train_classifier(*backend, train_instances, eval_instances, cfg, fold_dir);

        PredictStats predict_stats;
        const std::vector<Prediction> predictions =
            backend->predict(test_instances, &predict_stats);
        save_predictions(predictions, fold_dir / "predictions_test.jsonl");

        FoldOutcome& fold_outcome = outcome.folds[fold_idx];
        fold_outcome.eval_accuracy = checkpoint.dev_metric;
        fold_outcome.test_confusion = confusion(gold_of(test_instances), predicted_of(predictions));
        fold_outcome.test_accuracy = metrics(fold_outcome.test_confusion).accuracy;
        fold_outcome.test_predictions = predictions;

        ordered_json test_metrics = metrics_to_json(metrics(fold_outcome.test_confusion));
        test_metrics["cost_score"] = cost_score(fold_outcome.test_confusion, costs);
        test_metrics["n_instances"] = test_instances.size();
        test_metrics["truncated"] = predict_stats.truncated;
        save_json_file(fold_dir / "metrics_test.json", test_metrics);
        save_json_file(fold_dir / "confusion_fold.json",
                       confusion_to_json(fold_outcome.test_confusion));
      } catch (...) {
        errors[fold_idx] = std::current_exception();
      }
    };

    for (std::size_t start = 0; start < folds.folds.size();
         start += static_cast<std::size_t>(opts.jobs)) {
      const std::size_t stop =
          std::min(folds.folds.size(), start + static_cast<std::size_t>(opts.jobs));
      std::vector<std::thread> workers;
      for (std::size_t fold_idx = start; fold_idx < stop; ++fold_idx) {
        workers.emplace_back(train_fold, fold_idx);
      }
      for (std::thread& worker : workers) worker.join();
    }
    for (const std::exception_ptr& error : errors) {
      if (error) std::rethrow_exception(error);
    }

    // Majority vote across the fold models.
    std::vector<std::vector<Prediction>> per_model;
    for (const FoldOutcome& fold_outcome : outcome.folds) {
      per_model.push_back(fold_outcome.test_predictions);
    }
    const std::vector<VoteRecord> votes = majority_vote(per_model);
    const std::filesystem::path vote_dir = length_dir / "vote";
    std::filesystem::create_directories(vote_dir);
    save_votes(votes, vote_dir / "votes.jsonl");

    std::vector<AttachmentLabel> vote_labels;
    for (const VoteRecord& record : votes) {
      vote_labels.push_back(record.winner);
      outcome.ties_broken += record.tie_broken ? 1 : 0;
    }
    outcome.vote_confusion = confusion(gold_of(test_instances), vote_labels);
    outcome.vote_accuracy = metrics(outcome.vote_confusion).accuracy;

    ordered_json vote_metrics = metrics_to_json(metrics(outcome.vote_confusion));
    vote_metrics["cost_score"] = cost_score(outcome.vote_confusion, costs);
    vote_metrics["n_instances"] = test_instances.size();
    vote_metrics["ties_broken"] = outcome.ties_broken;
    save_json_file(vote_dir / "metrics.json", vote_metrics);
    save_json_file(vote_dir / "confusion_vote.json", confusion_to_json(outcome.vote_confusion));

    if (!opts.no_plots) {
      std::vector<std::pair<std::string, ConfusionMatrix>> grid;
      grid.emplace_back("majority vote", outcome.vote_confusion);
      for (std::size_t fold_idx = 0; fold_idx < outcome.folds.size(); ++fold_idx) {
        grid.emplace_back("fold " + std::to_string(fold_idx),
                          outcome.folds[fold_idx].test_confusion);
      }
      write_text_file(length_dir / "confusion_grid.svg", render_confusion_grid_svg(grid));
    }

    std::cout << "min_length " << min_length << ": " << test_instances.size()
              << " test instances, vote accuracy " << outcome.vote_accuracy << "\n";
    outcomes.push_back(std::move(outcome));
  }

  // Test-set sweep (the headline report) plus the validation-side view.
  std::vector<SweepInput> test_inputs;
  std::vector<SweepInput> validation_inputs;
  for (const MinLengthOutcome& outcome : outcomes) {
    SweepInput test_input;
    test_input.min_length = outcome.min_length;
    test_input.n_instances = outcome.n_test_instances;
    test_input.distribution = outcome.test_distribution;
    SweepInput validation_input = test_input;
    for (const FoldOutcome& fold_outcome : outcome.folds) {
      test_input.fold_accuracies.push_back(fold_outcome.test_accuracy);
      validation_input.fold_accuracies.push_back(fold_outcome.eval_accuracy);
    }
    test_inputs.push_back(std::move(test_input));
    validation_inputs.push_back(std::move(validation_input));
  }
  const SweepReport test_report = sweep_report(std::move(test_inputs));
  const SweepReport validation_report = sweep_report(std::move(validation_inputs));
  save_sweep_csv(test_report, out_dir / "sweep.csv");
  save_sweep_csv(validation_report, out_dir / "sweep_validation.csv");

  ordered_json report_json;
  report_json["min_lengths"] = min_lengths;
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const MinLengthOutcome& outcome = outcomes[i];
    ordered_json row;
    row["min_length"] = outcome.min_length;
    row["test_accuracy_mean"] = test_report.rows[i].mean;
    row["test_accuracy_std"] = test_report.rows[i].std_dev;
    row["validation_accuracy_mean"] = validation_report.rows[i].mean;
    row["validation_accuracy_std"] = validation_report.rows[i].std_dev;
    row["vote_accuracy"] = outcome.vote_accuracy;
    row["ties_broken"] = outcome.ties_broken;
    row["n_test_instances"] = outcome.n_test_instances;
    row["test_distribution"] = distribution_to_json(outcome.test_distribution);
    row["corpus_distribution"] = distribution_to_json(outcome.all_distribution);
    ordered_json fold_rows = ordered_json::array();
    for (const FoldOutcome& fold_outcome : outcome.folds) {
      fold_rows.push_back({{"eval_accuracy", fold_outcome.eval_accuracy},
                           {"test_accuracy", fold_outcome.test_accuracy}});
    }
    row["folds"] = std::move(fold_rows);
    rows.push_back(std::move(row));
  }
  report_json["rows"] = std::move(rows);
  save_json_file(out_dir / "sweep_report.json", report_json);

  if (!opts.no_plots) {
    write_text_file(out_dir / "sweep_accuracy.svg", render_sweep_errorbars_svg(test_report));
  }

  ordered_json manifest;
  manifest["kind"] = "sweep";
  manifest["input"] = opts.corpus_path;
  manifest["input_fingerprint"] = corpus_fingerprint;
  manifest["effective_config"] = {
      {"min_lengths", min_lengths},
      {"backend", opts.backend},
      {"backend_params", backend_params},
      {"train_config", train_config_to_json(base_cfg)},
      {"test_count", opts.test_count},
      {"k", opts.k},
      {"eval_fraction", opts.eval_fraction},
      {"seed", opts.seed},
      {"keep_trailing_multi_turn", !opts.drop_trailing},
      {"costs", opts.costs}};
  save_json_file(out_dir / "manifest.json", manifest);

  std::cout << "sweep complete -> " << out_dir.string() << "\n";
}

void run_report(const ReportOptions& opts) {
  if (opts.corpus_path.empty() && opts.sweep_dir.empty()) {
    throw InvalidConfig("report needs --corpus and/or --sweep-dir");
  }
  const std::filesystem::path out_dir(
      resolve_out_dir(opts.out_dir, "report",
                      fnv1a64(opts.corpus_path) ^ fnv1a64(opts.sweep_dir)));
  std::filesystem::create_directories(out_dir);

  if (!opts.corpus_path.empty()) {
    const Corpus corpus = load_corpus(opts.corpus_path, /*require_labels=*/true);
    std::vector<std::int64_t> cuts = opts.bins;
    if (cuts.empty()) cuts = {5, 10, 25, 50, 100, 200};
    const TurnLengthHistogram hist = turn_length_histogram(corpus, cuts);
    write_text_file(out_dir / "turn_length_histogram.svg",
                    render_turn_length_histogram_svg(hist));
    std::cout << "wrote " << (out_dir / "turn_length_histogram.svg").string() << "\n";
  }

  if (!opts.sweep_dir.empty()) {
    const std::filesystem::path sweep_dir(opts.sweep_dir);
    const SweepReport report = load_sweep_csv(sweep_dir / "sweep.csv");
    write_text_file(out_dir / "sweep_accuracy.svg", render_sweep_errorbars_svg(report));
    std::cout << "wrote " << (out_dir / "sweep_accuracy.svg").string() << "\n";

    for (const SweepRow& row : report.rows) {
      const std::filesystem::path length_dir =
          sweep_dir / ("min_" + std::to_string(row.min_length));
      std::vector<std::pair<std::string, ConfusionMatrix>> grid;
      const std::filesystem::path vote_path = length_dir / "vote" / "confusion_vote.json";
      if (std::filesystem::exists(vote_path)) {
        grid.emplace_back("majority vote", confusion_from_json(load_json_file(vote_path)));
      }
      for (std::size_t fold_idx = 0;; ++fold_idx) {
        const std::filesystem::path fold_path =
            length_dir / ("fold_" + std::to_string(fold_idx)) / "confusion_fold.json";
        if (!std::filesystem::exists(fold_path)) break;
        grid.emplace_back("fold " + std::to_string(fold_idx),
                          confusion_from_json(load_json_file(fold_path)));
      }
      if (grid.empty()) continue;
      const std::filesystem::path svg_path =
          out_dir / ("confusion_grid_min_" + std::to_string(row.min_length) + ".svg");
      write_text_file(svg_path, render_confusion_grid_svg(grid));
      std::cout << "wrote " << svg_path.string() << "\n";
    }
  }
}

}  // namespace attachnlp::cli
