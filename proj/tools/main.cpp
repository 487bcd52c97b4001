#include <iostream>

#include "CLI11.hpp"

#include "attachnlp/errors.hpp"
#include "commands.hpp"

namespace cli = attachnlp::cli;

int run_command(int argc, char** argv) {
  CLI::App app{"attachment-style classification pipeline for therapy transcripts"};
  app.require_subcommand(1);

  cli::SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  synth_cmd->add_option("--config", synth.config_path, "synth config JSON");
  synth_cmd->add_option("--seed", synth.seed, "override the config seed");
  synth_cmd->add_option("--marker-strength", synth.marker_strength,
                        "override marker injection rate in [0,1]");
  synth_cmd->add_option("--out", synth.out_path, "output corpus JSONL")->required();

  cli::StatsOptions stats;
  auto* stats_cmd = app.add_subcommand("stats", "corpus class and turn-length statistics");
  stats_cmd->add_option("corpus", stats.corpus_path, "corpus JSONL")->required();
  stats_cmd->add_option("--bins", stats.bins, "histogram cut points")->delimiter(',');
  stats_cmd->add_option("--out", stats.out_path, "also write stats JSON here");

  cli::SegmentOptions segment;
  auto* segment_cmd =
      app.add_subcommand("segment", "build classification instances from patient turns");
  segment_cmd->add_option("corpus", segment.corpus_path, "corpus JSONL")->required();
  segment_cmd->add_option("--min-length", segment.min_length, "minimum input length in words")
      ->required();
  segment_cmd->add_flag("--drop-trailing", segment.drop_trailing,
                        "drop trailing multi-turn chunks below the threshold");
  segment_cmd->add_option("--out", segment.out_path, "output instances JSONL")->required();

  cli::SplitOptions split;
  auto* split_cmd = app.add_subcommand("split", "document-level stratified train/test split");
  split_cmd->add_option("corpus", split.corpus_path, "corpus JSONL")->required();
  split_cmd->add_option("--test-count", split.test_count, "test documents")->required();
  split_cmd->add_option("--seed", split.seed, "split seed")->required();
  split_cmd->add_option("--out", split.out_path, "output split JSON")->required();
  split_cmd->add_option("--folds-out", split.folds_out_path, "also write a fold plan here");
  split_cmd->add_option("--k", split.k, "fold count (default 5)");
  split_cmd->add_option("--eval-fraction", split.eval_fraction,
                        "per-fold eval fraction (default 0.15)");

  cli::DaptOptions dapt;
  auto* dapt_cmd =
      app.add_subcommand("dapt", "domain-adaptive MLM pretraining on unlabeled transcripts");
  dapt_cmd->add_option("--corpus", dapt.corpus_path, "unlabeled corpus JSONL")->required();
  dapt_cmd->add_option("--backend", dapt.backend, "backend name (default tiny-transformer)");
  dapt_cmd->add_option("--backend-params", dapt.backend_params_path, "backend params JSON");
  dapt_cmd->add_option("--config", dapt.config_path, "MLM config JSON");
  dapt_cmd->add_option("--seed", dapt.seed, "override the config seed");
  dapt_cmd->add_option("--out-dir", dapt.out_dir, "checkpoint directory");

  cli::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "fine-tune a classifier on instances");
  train_cmd->add_option("--train", train.train_path, "training instances JSONL")->required();
  train_cmd->add_option("--eval", train.eval_path, "eval instances JSONL")->required();
  auto* backend_opt = train_cmd->add_option("--backend", train.backend,
                                            "backend name (default bow)");
  train_cmd->add_option("--backend-params", train.backend_params_path, "backend params JSON");
  train_cmd->add_option("--config", train.config_path,
                        "train config JSON, or a manifest with effective_config");
  train_cmd->add_option("--init-from", train.init_from, "pretraining checkpoint directory");
  train_cmd->add_option("--learning-rate", train.learning_rate, "override learning rate");
  train_cmd->add_option("--epochs", train.epochs, "override epochs");
  train_cmd->add_option("--batch-size", train.batch_size, "override batch size");
  train_cmd->add_option("--max-seq-length", train.max_seq_length, "override sequence cap");
  train_cmd->add_option("--seed", train.seed, "override seed");
  train_cmd->add_option("--out-dir", train.out_dir, "checkpoint directory");

  cli::PredictOptions predict;
  auto* predict_cmd = app.add_subcommand("predict", "classify instances with a checkpoint");
  predict_cmd->add_option("--model", predict.model_dir, "checkpoint directory")->required();
  predict_cmd->add_option("--instances", predict.instances_path, "instances JSONL")->required();
  predict_cmd->add_option("--out", predict.out_path, "output predictions JSONL")->required();

  cli::VoteOptions vote;
  auto* vote_cmd = app.add_subcommand("vote", "majority vote across prediction files");
  vote_cmd->add_option("predictions", vote.prediction_paths, "prediction JSONL files")
      ->required()
      ->expected(-1);
  vote_cmd->add_option("--out", vote.out_path, "output vote JSONL")->required();

  cli::EvaluateOptions evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score predictions against gold labels");
  evaluate_cmd->add_option("--gold", evaluate.gold_path, "gold instances JSONL")->required();
  evaluate_cmd->add_option("--pred", evaluate.pred_path, "predictions or votes JSONL")
      ->required();
  evaluate_cmd->add_option("--costs", evaluate.costs,
                           "\"default\" or a cost matrix JSON path");
  evaluate_cmd->add_option("--out-dir", evaluate.out_dir, "report directory");

  cli::SweepOptions sweep;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "full experiment over a minimum-input-length sweep");
  sweep_cmd->add_option("--corpus", sweep.corpus_path, "labeled corpus JSONL")->required();
  sweep_cmd->add_option("--min-lengths", sweep.min_lengths,
                        "comma-separated minimum input lengths")
      ->delimiter(',');
  sweep_cmd->add_option("--backend", sweep.backend, "backend name (default bow)");
  sweep_cmd->add_option("--backend-params", sweep.backend_params_path, "backend params JSON");
  sweep_cmd->add_option("--train-config", sweep.train_config_path, "train config JSON");
  sweep_cmd->add_option("--test-count", sweep.test_count, "test documents")->required();
  sweep_cmd->add_option("--k", sweep.k, "fold count (default 5)");
  sweep_cmd->add_option("--eval-fraction", sweep.eval_fraction,
                        "per-fold eval fraction (default 0.15)");
  sweep_cmd->add_option("--seed", sweep.seed, "experiment seed")->required();
  sweep_cmd->add_option("--jobs", sweep.jobs, "parallel fold training jobs (default 1)");
  sweep_cmd->add_flag("--drop-trailing", sweep.drop_trailing,
                      "drop trailing multi-turn chunks below the threshold");
  sweep_cmd->add_flag("--no-plots", sweep.no_plots, "skip SVG rendering");
  sweep_cmd->add_option("--costs", sweep.costs, "\"default\" or a cost matrix JSON path");
  sweep_cmd->add_option("--out-dir", sweep.out_dir, "experiment directory");

  cli::ReportOptions report;
  auto* report_cmd = app.add_subcommand("report", "render plots from corpora and sweep runs");
  report_cmd->add_option("--corpus", report.corpus_path, "corpus JSONL for the histogram");
  report_cmd->add_option("--sweep-dir", report.sweep_dir, "sweep output directory");
  report_cmd->add_option("--bins", report.bins, "histogram cut points")->delimiter(',');
  report_cmd->add_option("--out-dir", report.out_dir, "plot directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth_cmd->parsed()) cli::run_synth(synth);
    if (stats_cmd->parsed()) cli::run_stats(stats);
    if (segment_cmd->parsed()) cli::run_segment(segment);
    if (split_cmd->parsed()) cli::run_split(split);
    if (dapt_cmd->parsed()) cli::run_dapt(dapt);
    if (train_cmd->parsed()) {
      train.backend_set = backend_opt->count() > 0;
      cli::run_train(train);
    }
    if (predict_cmd->parsed()) cli::run_predict(predict);
    if (vote_cmd->parsed()) cli::run_vote(vote);
    if (evaluate_cmd->parsed()) cli::run_evaluate(evaluate);
    if (sweep_cmd->parsed()) cli::run_sweep(sweep);
    if (report_cmd->parsed()) cli::run_report(report);
    return 0;
  } catch (const attachnlp::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int main(int argc, char** argv) { return run_command(argc, argv); }
