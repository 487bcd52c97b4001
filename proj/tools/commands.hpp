#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace attachnlp::cli {

struct SynthOptions {
  std::string config_path;
  std::string out_path;
  std::int64_t seed = -1;           // <0: take from config
  double marker_strength = -1.0;    // <0: take from config
};

struct StatsOptions {
  std::string corpus_path;
  std::vector<std::int64_t> bins;
  std::string out_path;
};

struct SegmentOptions {
  std::string corpus_path;
  std::int64_t min_length = 0;
  bool drop_trailing = false;
  std::string out_path;
};

struct SplitOptions {
  std::string corpus_path;
  std::int64_t test_count = 0;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string folds_out_path;
  int k = 5;
  double eval_fraction = 0.15;
};

struct DaptOptions {
  std::string corpus_path;
  std::string backend = "tiny-transformer";
  std::string backend_params_path;
  std::string config_path;
  std::int64_t seed = -1;  // <0: take from config
  std::string out_dir;
};

struct TrainOptions {
  std::string train_path;
  std::string eval_path;
  std::string backend = "bow";
  bool backend_set = false;
  std::string backend_params_path;
  std::string config_path;
  std::string init_from;
  std::string out_dir;
  // flag overrides; negative/empty means "not set"
  double learning_rate = -1.0;
  int epochs = -1;
  int batch_size = -1;
  int max_seq_length = -1;
  std::int64_t seed = -1;
};

struct PredictOptions {
  std::string model_dir;
  std::string instances_path;
  std::string out_path;
};

struct VoteOptions {
  std::vector<std::string> prediction_paths;
  std::string out_path;
};

struct EvaluateOptions {
  std::string gold_path;
  std::string pred_path;
  std::string costs = "default";
  std::string out_dir;
};

struct SweepOptions {
  std::string corpus_path;
  std::vector<std::int64_t> min_lengths = {0, 50, 100, 150, 250};
  std::string backend = "bow";
  std::string backend_params_path;
  std::string train_config_path;
  std::int64_t test_count = 0;
  int k = 5;
  double eval_fraction = 0.15;
  std::uint64_t seed = 0;
  int jobs = 1;
  bool drop_trailing = false;
  bool no_plots = false;
  std::string costs = "default";
  std::string out_dir;
};

struct ReportOptions {
  std::string corpus_path;
  std::string sweep_dir;
  std::vector<std::int64_t> bins;
  std::string out_dir;
};

void run_synth(const SynthOptions& opts);
void run_stats(const StatsOptions& opts);
void run_segment(const SegmentOptions& opts);
void run_split(const SplitOptions& opts);
void run_dapt(const DaptOptions& opts);
void run_train(const TrainOptions& opts);
void run_predict(const PredictOptions& opts);
void run_vote(const VoteOptions& opts);
void run_evaluate(const EvaluateOptions& opts);
void run_sweep(const SweepOptions& opts);
void run_report(const ReportOptions& opts);

// Resolves an output directory: the explicit flag wins; otherwise a
// deterministic subdirectory of $ATTACHNLP_CACHE_DIR.
std::string resolve_out_dir(const std::string& flag_value, const std::string& kind,
                            std::uint64_t fingerprint);

}  // namespace attachnlp::cli
