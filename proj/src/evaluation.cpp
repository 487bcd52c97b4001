#include "attachnlp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "attachnlp/errors.hpp"
#include "attachnlp/util.hpp"

namespace attachnlp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string format_fixed(double value, int digits = 6) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.*f", digits, value);
  return buffer;
}

}  // namespace

std::int64_t ConfusionMatrix::total() const {
  std::int64_t sum = 0;
  for (const auto& row : counts) {
    for (std::int64_t v : row) sum += v;
  }
  return sum;
}

std::int64_t ConfusionMatrix::trace() const {
  return counts[0][0] + counts[1][1] + counts[2][2];
}

std::int64_t ConfusionMatrix::row_sum(std::size_t row) const {
  return counts[row][0] + counts[row][1] + counts[row][2];
}

std::int64_t ConfusionMatrix::col_sum(std::size_t col) const {
  return counts[0][col] + counts[1][col] + counts[2][col];
}

ConfusionMatrix confusion(std::span<const AttachmentLabel> gold,
                          std::span<const AttachmentLabel> pred) {
  if (gold.size() != pred.size()) {
    throw LengthMismatch("gold has " + std::to_string(gold.size()) +
                         " labels, predictions have " + std::to_string(pred.size()));
  }
  if (gold.empty()) throw EmptyInput("cannot build a confusion matrix from zero pairs");

  ConfusionMatrix cm;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    ++cm.counts[label_index(gold[i])][label_index(pred[i])];
  }
  return cm;
}

MetricReport metrics(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw EmptyMatrix("confusion matrix is empty");

  MetricReport report;
  report.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    const std::int64_t col = cm.col_sum(i);
    const std::int64_t row = cm.row_sum(i);
    if (col == 0) {
      report.precision[i] = 0.0;
      report.warnings.push_back("class \"" + std::string(label_name(kLabelOrder[i])) +
                                "\" was never predicted; precision set to 0");
    } else {
      report.precision[i] =
          static_cast<double>(cm.counts[i][i]) / static_cast<double>(col);
    }
    if (row == 0) {
      report.recall[i] = 0.0;
      report.warnings.push_back("class \"" + std::string(label_name(kLabelOrder[i])) +
                                "\" has no gold instances; recall set to 0");
    } else {
      report.recall[i] = static_cast<double>(cm.counts[i][i]) / static_cast<double>(row);
    }
  }
  report.macro_precision =
      (report.precision[0] + report.precision[1] + report.precision[2]) / 3.0;
  report.macro_recall = (report.recall[0] + report.recall[1] + report.recall[2]) / 3.0;
  return report;
}

std::pair<double, double> aggregate_folds(std::span<const double> values) {
  if (values.empty()) throw EmptyInput("cannot aggregate zero fold values");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / n)};
}

CostMatrix CostMatrix::clinical_default() {
  CostMatrix costs;
  const auto a = label_index(AttachmentLabel::Avoidant);
  const auto s = label_index(AttachmentLabel::Secure);
  const auto p = label_index(AttachmentLabel::Preoccupied);
  costs.weights[s][a] = 1.0;
  costs.weights[s][p] = 1.0;
  costs.weights[a][s] = 2.0;
  costs.weights[p][s] = 3.0;
  costs.weights[a][p] = 4.0;
  costs.weights[p][a] = 4.0;
  return costs;
}

void CostMatrix::validate() const {
  for (std::size_t g = 0; g < kNumLabels; ++g) {
    for (std::size_t p = 0; p < kNumLabels; ++p) {
      if (g == p && weights[g][p] != 0.0) {
        throw InvalidConfig("cost matrix diagonal must be exactly zero");
      }
      if (weights[g][p] < 0.0) {
        throw InvalidConfig("cost matrix entries must be non-negative");
      }
    }
  }
}

double cost_score(const ConfusionMatrix& cm, const CostMatrix& costs) {
  const std::int64_t total = cm.total();
  if (total == 0) throw EmptyMatrix("confusion matrix is empty");
  double sum = 0.0;
  for (std::size_t g = 0; g < kNumLabels; ++g) {
    for (std::size_t p = 0; p < kNumLabels; ++p) {
      sum += static_cast<double>(cm.counts[g][p]) * costs.weights[g][p];
    }
  }
  return sum / static_cast<double>(total);
}

SweepReport sweep_report(std::vector<SweepInput> runs) {
  if (runs.empty()) throw EmptyRuns("sweep needs at least one minimum length");
  std::sort(runs.begin(), runs.end(),
            [](const SweepInput& a, const SweepInput& b) { return a.min_length < b.min_length; });

  SweepReport report;
  for (SweepInput& run : runs) {
    if (run.fold_accuracies.empty()) {
      throw EmptyRuns("min_length " + std::to_string(run.min_length) +
                      " has no fold results");
    }
    SweepRow row;
    row.min_length = run.min_length;
    row.fold_accuracies = std::move(run.fold_accuracies);
    std::tie(row.mean, row.std_dev) = aggregate_folds(row.fold_accuracies);
    row.n_instances = run.n_instances;
    row.distribution = run.distribution;
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string sweep_to_csv(const SweepReport& report) {
  std::ostringstream out;
  out << "min_length,fold,accuracy,mean,std,n_instances\n";
  for (const SweepRow& row : report.rows) {
    for (std::size_t fold = 0; fold < row.fold_accuracies.size(); ++fold) {
      out << row.min_length << ',' << fold << ',' << format_fixed(row.fold_accuracies[fold])
          << ',' << format_fixed(row.mean) << ',' << format_fixed(row.std_dev) << ','
          << row.n_instances << "\n";
    }
  }
  return out.str();
}

void save_sweep_csv(const SweepReport& report, const std::filesystem::path& path) {
  write_text_file(path, sweep_to_csv(report));
}

SweepReport load_sweep_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw MalformedRecord("empty sweep csv: " + path.string());

  std::map<std::int64_t, SweepInput> by_length;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string field;
    std::vector<std::string> row;
    while (std::getline(fields, field, ',')) row.push_back(field);
    if (row.size() != 6) {
      throw MalformedRecord("line " + std::to_string(line_no) + ": expected 6 csv fields");
    }
    try {
      const std::int64_t min_length = std::stoll(row[0]);
      SweepInput& input = by_length[min_length];
      input.min_length = min_length;
      input.fold_accuracies.push_back(std::stod(row[2]));
      input.n_instances = std::stoll(row[5]);
    } catch (const std::logic_error&) {
      throw MalformedRecord("line " + std::to_string(line_no) + ": non-numeric csv field");
    }
  }
  std::vector<SweepInput> runs;
  for (auto& [_, input] : by_length) runs.push_back(std::move(input));
  return sweep_report(std::move(runs));
}

ordered_json metrics_to_json(const MetricReport& report) {
  ordered_json out;
  out["accuracy"] = report.accuracy;
  out["macro_precision"] = report.macro_precision;
  out["macro_recall"] = report.macro_recall;
  ordered_json per_class;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    per_class[std::string(label_name(kLabelOrder[i]))] = {
        {"precision", report.precision[i]}, {"recall", report.recall[i]}};
  }
  out["per_class"] = std::move(per_class);
  if (!report.warnings.empty()) out["warnings"] = report.warnings;
  return out;
}

ordered_json confusion_to_json(const ConfusionMatrix& cm) {
  ordered_json out;
  ordered_json labels = ordered_json::array();
  for (AttachmentLabel label : kLabelOrder) labels.push_back(std::string(label_name(label)));
  out["labels"] = std::move(labels);
  ordered_json rows = ordered_json::array();
  for (const auto& row : cm.counts) {
    rows.push_back(std::vector<std::int64_t>(row.begin(), row.end()));
  }
  out["counts"] = std::move(rows);
  return out;
}

ConfusionMatrix confusion_from_json(const json& value) {
  ConfusionMatrix cm;
  try {
    const json& rows = value.at("counts");
    for (std::size_t g = 0; g < kNumLabels; ++g) {
      for (std::size_t p = 0; p < kNumLabels; ++p) {
        cm.counts[g][p] = rows.at(g).at(p).get<std::int64_t>();
      }
    }
  } catch (const json::exception& e) {
    throw MalformedRecord(std::string("bad confusion matrix: ") + e.what());
  }
  return cm;
}

ordered_json distribution_to_json(const ClassDistribution& dist) {
  ordered_json counts;
  ordered_json proportions;
  const auto props = dist.proportions();
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    const std::string name(label_name(kLabelOrder[i]));
    counts[name] = dist.counts[i];
    proportions[name] = props[i];
  }
  return ordered_json{{"counts", counts}, {"proportions", proportions}, {"total", dist.total()}};
}

CostMatrix cost_matrix_from_json(const json& value) {
  CostMatrix costs;
  try {
    const json& rows = value.at("weights");
    for (std::size_t g = 0; g < kNumLabels; ++g) {
      for (std::size_t p = 0; p < kNumLabels; ++p) {
        costs.weights[g][p] = rows.at(g).at(p).get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw MalformedRecord(std::string("bad cost matrix: ") + e.what());
  }
  costs.validate();
  return costs;
}

ordered_json cost_matrix_to_json(const CostMatrix& costs) {
  ordered_json out;
  ordered_json labels = ordered_json::array();
  for (AttachmentLabel label : kLabelOrder) labels.push_back(std::string(label_name(label)));
  out["labels"] = std::move(labels);
  ordered_json rows = ordered_json::array();
  for (const auto& row : costs.weights) {
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  out["weights"] = std::move(rows);
  return out;
}

}  // namespace attachnlp
