#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "attachnlp/corpus.hpp"
#include "attachnlp/labels.hpp"

namespace attachnlp {

// Rows are gold labels, columns are predicted labels, both in the fixed
// label order.
struct ConfusionMatrix {
  std::array<std::array<std::int64_t, kNumLabels>, kNumLabels> counts{};

  std::int64_t total() const;
  std::int64_t trace() const;
  std::int64_t row_sum(std::size_t row) const;
  std::int64_t col_sum(std::size_t col) const;
};

ConfusionMatrix confusion(std::span<const AttachmentLabel> gold,
                          std::span<const AttachmentLabel> pred);

struct MetricReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  std::array<double, kNumLabels> precision{};
  std::array<double, kNumLabels> recall{};
  // Non-fatal notes, e.g. a class that was never predicted (precision
  // defined as 0 instead of raising).
  std::vector<std::string> warnings;
};

// accuracy = trace/total; per-class precision/recall with 0 for an empty
// column/row; macro values are unweighted means over the three classes.
MetricReport metrics(const ConfusionMatrix& cm);

// Arithmetic mean and population (n-divisor) standard deviation, matching
// the cross-fold variability convention used throughout the reports.
std::pair<double, double> aggregate_folds(std::span<const double> values);

// Per-confusion clinical severity weights; rows gold, columns predicted,
// zero diagonal.
struct CostMatrix {
  std::array<std::array<double, kNumLabels>, kNumLabels> weights{};

  // Encodes the severity ordering: mislabeling a secure patient is least
  // harmful (1), insecure-as-secure worse (avoidant 2, preoccupied 3), and
  // confusing the two insecure patterns worst of all (4 both ways). The
  // numbers are a configurable encoding of that ordering, not measurements.
  static CostMatrix clinical_default();

  void validate() const;  // zero diagonal, non-negative entries
};

// Mean per-instance cost: sum(counts[g][p] * weights[g][p]) / total.
double cost_score(const ConfusionMatrix& cm, const CostMatrix& costs);

// One sweep point: the fold accuracies observed at one minimum input
// length, plus the evaluated instance count and label distribution.
struct SweepRow {
  std::int64_t min_length = 0;
  std::vector<double> fold_accuracies;
  double mean = 0.0;
  double std_dev = 0.0;  // population
  std::int64_t n_instances = 0;
  ClassDistribution distribution;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // ascending min_length
};

struct SweepInput {
  std::int64_t min_length = 0;
  std::vector<double> fold_accuracies;
  std::int64_t n_instances = 0;
  ClassDistribution distribution;
};

// Aggregates per-min-length fold results. Number crunching only; plot and
// CSV emission are separate so reports are identical with rendering
// disabled.
SweepReport sweep_report(std::vector<SweepInput> runs);

// CSV with columns: min_length, fold, accuracy, mean, std, n_instances.
std::string sweep_to_csv(const SweepReport& report);
void save_sweep_csv(const SweepReport& report, const std::filesystem::path& path);
SweepReport load_sweep_csv(const std::filesystem::path& path);

nlohmann::ordered_json metrics_to_json(const MetricReport& report);
nlohmann::ordered_json confusion_to_json(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_json(const nlohmann::json& value);
nlohmann::ordered_json distribution_to_json(const ClassDistribution& dist);
CostMatrix cost_matrix_from_json(const nlohmann::json& value);
nlohmann::ordered_json cost_matrix_to_json(const CostMatrix& costs);

}  // namespace attachnlp
