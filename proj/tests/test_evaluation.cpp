#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "attachnlp/errors.hpp"
#include "attachnlp/evaluation.hpp"
#include "attachnlp/plots.hpp"
#include "oracles.hpp"

using namespace attachnlp;

namespace {

constexpr auto A = AttachmentLabel::Avoidant;
constexpr auto S = AttachmentLabel::Secure;
constexpr auto P = AttachmentLabel::Preoccupied;

// Gold labels with 22 avoidant / 12 secure / 55 preoccupied instances and
// a prediction set reaching 3 correct avoidant, 12 correct secure and 45
// correct preoccupied (60 correct of 89).
std::pair<std::vector<AttachmentLabel>, std::vector<AttachmentLabel>> reconstructed_test_set() {
  std::vector<AttachmentLabel> gold;
  std::vector<AttachmentLabel> pred;
  auto add = [&](AttachmentLabel g, AttachmentLabel p, int count) {
    for (int i = 0; i < count; ++i) {
      gold.push_back(g);
      pred.push_back(p);
    }
  };
  add(A, A, 3);
  add(A, P, 19);
  add(S, S, 12);
  add(P, P, 45);
  add(P, S, 10);
  return {gold, pred};
}

}  // namespace

TEST_CASE("confusion counts gold rows against predicted columns") {
  SUBCASE("all-correct predictions give a diagonal matrix") {
    const std::vector<AttachmentLabel> gold = {A, S, P, P};
    const ConfusionMatrix cm = confusion(gold, gold);
    CHECK(cm.trace() == 4);
    CHECK(cm.total() == 4);
    const MetricReport perfect = metrics(cm);
    CHECK(perfect.accuracy == doctest::Approx(1.0));
    CHECK(perfect.macro_precision == doctest::Approx(1.0));
    CHECK(perfect.macro_recall == doctest::Approx(1.0));
  }

  SUBCASE("hand-built three-instance example") {
    const std::vector<AttachmentLabel> gold = {A, S, P};
    const std::vector<AttachmentLabel> pred = {P, S, P};
    const ConfusionMatrix cm = confusion(gold, pred);
    CHECK(cm.counts[label_index(A)][label_index(P)] == 1);
    CHECK(cm.counts[label_index(S)][label_index(S)] == 1);
    CHECK(cm.counts[label_index(P)][label_index(P)] == 1);
    CHECK(metrics(cm).accuracy == doctest::Approx(2.0 / 3.0));
  }

  SUBCASE("length mismatch and empty input are rejected") {
    const std::vector<AttachmentLabel> one = {A};
    const std::vector<AttachmentLabel> two = {A, S};
    CHECK_THROWS_AS(confusion(one, two), LengthMismatch);
    CHECK_THROWS_AS(confusion({}, {}), EmptyInput);
  }
}

TEST_CASE("reconstructed test set reproduces the published arithmetic") {
  const auto [gold, pred] = reconstructed_test_set();
  REQUIRE(gold.size() == 89);
  const ConfusionMatrix cm = confusion(gold, pred);
  const MetricReport report = metrics(cm);

  // 60/89 and 3/22, both quoted to two decimals (tolerance 0.01 absolute).
  CHECK(std::abs(report.accuracy * 100.0 - 67.42) <= 0.01);
  CHECK(std::abs(report.recall[label_index(A)] * 100.0 - 13.64) <= 0.01);

  // The gold shares match 24.72 / 13.48 / 61.80 percent.
  CHECK(std::abs(100.0 * 22.0 / 89.0 - 24.72) <= 0.01);
  CHECK(std::abs(100.0 * 12.0 / 89.0 - 13.48) <= 0.01);
  CHECK(std::abs(100.0 * 55.0 / 89.0 - 61.80) <= 0.01);
}

TEST_CASE("metrics handles empty predicted columns without dividing by zero") {
  ConfusionMatrix cm;
  cm.counts[label_index(A)][label_index(S)] = 4;  // avoidant never predicted
  cm.counts[label_index(S)][label_index(S)] = 4;
  cm.counts[label_index(P)][label_index(P)] = 2;

  const MetricReport report = metrics(cm);
  CHECK(report.precision[label_index(A)] == 0.0);
  CHECK(!report.warnings.empty());
  CHECK(report.macro_precision ==
        doctest::Approx((0.0 + 0.5 + 1.0) / 3.0));

  SUBCASE("empty matrix is an error") {
    CHECK_THROWS_AS(metrics(ConfusionMatrix{}), EmptyMatrix);
  }
}

TEST_CASE("metrics transforms consistently under label permutation") {
  ConfusionMatrix cm;
  SeededRng rng(4242);
  for (auto& row : cm.counts) {
    for (auto& cell : row) cell = static_cast<std::int64_t>(rng.bounded(20));
  }
  const MetricReport base = metrics(cm);

  // Swap secure and preoccupied everywhere.
  ConfusionMatrix swapped;
  const std::array<std::size_t, 3> perm = {0, 2, 1};
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t p = 0; p < 3; ++p) {
      swapped.counts[perm[g]][perm[p]] = cm.counts[g][p];
    }
  }
  const MetricReport permuted = metrics(swapped);
  CHECK(permuted.accuracy == doctest::Approx(base.accuracy));
  CHECK(permuted.macro_precision == doctest::Approx(base.macro_precision));
  CHECK(permuted.macro_recall == doctest::Approx(base.macro_recall));
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(permuted.precision[perm[c]] == doctest::Approx(base.precision[c]));
    CHECK(permuted.recall[perm[c]] == doctest::Approx(base.recall[c]));
  }
}

TEST_CASE("aggregate_folds uses the population standard deviation") {
  SUBCASE("published per-split accuracies") {
    const std::vector<double> accuracies = {60.67, 68.54, 51.69, 61.80, 55.06};
    const auto [mean, std_dev] = aggregate_folds(accuracies);
    CHECK(std::abs(mean - 59.55) <= 0.01);
    CHECK(std::abs(std_dev - 5.82) <= 0.01);

    // Sample (n-1) std would be ~6.50; population matches the source.
    const double sample = std_dev * std::sqrt(5.0 / 4.0);
    CHECK(sample == doctest::Approx(6.50).epsilon(0.01));

    const auto [oracle_mean, oracle_std] = oracles::mean_std_reference(accuracies);
    CHECK(mean == doctest::Approx(oracle_mean).epsilon(1e-9));
    CHECK(std_dev == doctest::Approx(oracle_std).epsilon(1e-9));
  }

  SUBCASE("singleton and constant lists have zero deviation") {
    const std::vector<double> one = {42.0};
    CHECK(aggregate_folds(one) == std::pair<double, double>{42.0, 0.0});
    const std::vector<double> constant = {7.0, 7.0, 7.0};
    CHECK(aggregate_folds(constant).second == doctest::Approx(0.0));
  }

  SUBCASE("agrees with the two-pass reference on random lists") {
    SeededRng rng(808);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> values;
      const std::size_t n = 1 + rng.bounded(12);
      for (std::size_t i = 0; i < n; ++i) values.push_back(rng.uniform01() * 100.0);
      const auto [mean, std_dev] = aggregate_folds(values);
      const auto [ref_mean, ref_std] = oracles::mean_std_reference(values);
      CHECK(mean == doctest::Approx(ref_mean).epsilon(1e-9));
      CHECK(std_dev == doctest::Approx(ref_std).epsilon(1e-9));
    }
  }

  SUBCASE("empty input is an error") {
    CHECK_THROWS_AS(aggregate_folds({}), EmptyInput);
  }
}

TEST_CASE("default cost matrix encodes the clinical severity ordering") {
  const CostMatrix costs = CostMatrix::clinical_default();
  costs.validate();

  const auto cost_of = [&](AttachmentLabel g, AttachmentLabel p) {
    return costs.weights[label_index(g)][label_index(p)];
  };
  // cost(S->*) < cost(A->S) < cost(P->S) < cost(A<->P)
  CHECK(cost_of(S, A) < cost_of(A, S));
  CHECK(cost_of(S, P) < cost_of(A, S));
  CHECK(cost_of(A, S) < cost_of(P, S));
  CHECK(cost_of(P, S) < cost_of(A, P));
  CHECK(cost_of(A, P) == cost_of(P, A));
  for (std::size_t i = 0; i < kNumLabels; ++i) CHECK(costs.weights[i][i] == 0.0);
}

TEST_CASE("cost_score averages per-instance confusion costs") {
  const CostMatrix costs = CostMatrix::clinical_default();

  SUBCASE("perfect predictions cost nothing") {
    const std::vector<AttachmentLabel> gold = {A, S, P, A};
    CHECK(cost_score(confusion(gold, gold), costs) == doctest::Approx(0.0));
  }

  SUBCASE("one avoidant-as-preoccupied error among ten instances costs 0.4") {
    std::vector<AttachmentLabel> gold(10, S);
    std::vector<AttachmentLabel> pred(10, S);
    gold[0] = A;
    pred[0] = P;
    CHECK(cost_score(confusion(gold, pred), costs) == doctest::Approx(0.4));
  }

  SUBCASE("insecure-insecure confusion outranks secure-involved confusion") {
    std::vector<AttachmentLabel> gold(10, S);
    std::vector<AttachmentLabel> base(10, S);
    gold[0] = S;
    gold[1] = P;

    auto with_error = [&](std::size_t slot, AttachmentLabel wrong) {
      std::vector<AttachmentLabel> pred = gold;
      pred[slot] = wrong;
      return cost_score(confusion(gold, pred), costs);
    };
    const double secure_as_preoccupied = with_error(0, P);
    const double preoccupied_as_avoidant = with_error(1, A);
    CHECK(preoccupied_as_avoidant > secure_as_preoccupied);
  }

  SUBCASE("cost matrices with nonzero diagonals are invalid") {
    CostMatrix bad = CostMatrix::clinical_default();
    bad.weights[0][0] = 1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidConfig);
    bad = CostMatrix::clinical_default();
    bad.weights[0][1] = -2.0;
    CHECK_THROWS_AS(bad.validate(), InvalidConfig);
  }
}

TEST_CASE("sweep_report aggregates fold accuracies per minimum length") {
  SUBCASE("published validation means render at their minimum lengths") {
    std::vector<SweepInput> runs;
    const std::vector<std::pair<std::int64_t, double>> table = {
        {0, 49.27}, {50, 48.84}, {100, 54.88}, {150, 56.15}, {250, 58.67}};
    for (const auto& [min_length, mean] : table) {
      SweepInput input;
      input.min_length = min_length;
      input.fold_accuracies = {mean};
      runs.push_back(input);
    }
    const SweepReport report = sweep_report(runs);
    REQUIRE(report.rows.size() == 5);
    for (std::size_t i = 0; i < table.size(); ++i) {
      CHECK(report.rows[i].min_length == table[i].first);
      CHECK(report.rows[i].mean == doctest::Approx(table[i].second));
      CHECK(report.rows[i].std_dev == doctest::Approx(0.0));  // single run per length
    }

    const std::string svg = render_sweep_errorbars_svg(report);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("56.150") != std::string::npos);
  }

  SUBCASE("rows sort by min_length and stats match the fold values") {
    std::vector<SweepInput> runs;
    SweepInput second;
    second.min_length = 100;
    second.fold_accuracies = {0.5, 0.7};
    SweepInput first;
    first.min_length = 0;
    first.fold_accuracies = {0.4, 0.6, 0.8};
    runs.push_back(second);
    runs.push_back(first);
    const SweepReport report = sweep_report(runs);
    CHECK(report.rows[0].min_length == 0);
    CHECK(report.rows[0].mean == doctest::Approx(0.6));
    CHECK(report.rows[1].mean == doctest::Approx(0.6));
    CHECK(report.rows[1].std_dev == doctest::Approx(0.1));
  }

  SUBCASE("empty runs are rejected") {
    CHECK_THROWS_AS(sweep_report({}), EmptyRuns);
    SweepInput hollow;
    hollow.min_length = 50;
    CHECK_THROWS_AS(sweep_report({hollow}), EmptyRuns);
  }
}

TEST_CASE("sweep csv round-trips the report numbers") {
  std::vector<SweepInput> runs;
  SweepInput a;
  a.min_length = 0;
  a.fold_accuracies = {0.25, 0.5, 0.75};
  a.n_instances = 400;
  SweepInput b;
  b.min_length = 150;
  b.fold_accuracies = {0.5, 0.6, 0.7};
  b.n_instances = 90;
  runs.push_back(a);
  runs.push_back(b);
  const SweepReport report = sweep_report(runs);

  const auto path = std::filesystem::temp_directory_path() / "attachnlp_sweep_test.csv";
  save_sweep_csv(report, path);
  const SweepReport reloaded = load_sweep_csv(path);
  std::filesystem::remove(path);

  REQUIRE(reloaded.rows.size() == report.rows.size());
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    CHECK(reloaded.rows[i].min_length == report.rows[i].min_length);
    CHECK(reloaded.rows[i].mean == doctest::Approx(report.rows[i].mean).epsilon(1e-6));
    CHECK(reloaded.rows[i].std_dev == doctest::Approx(report.rows[i].std_dev).epsilon(1e-6));
    CHECK(reloaded.rows[i].n_instances == report.rows[i].n_instances);
  }
}

TEST_CASE("report numbers are identical with rendering disabled") {
  std::vector<SweepInput> runs;
  SweepInput input;
  input.min_length = 50;
  input.fold_accuracies = {0.61, 0.57, 0.64};
  input.n_instances = 123;
  runs.push_back(input);

  const SweepReport computed_only = sweep_report(runs);
  const SweepReport rendered = sweep_report(runs);
  const std::string svg = render_sweep_errorbars_svg(rendered);  // side effect only
  CHECK(!svg.empty());
  CHECK(rendered.rows[0].mean == computed_only.rows[0].mean);
  CHECK(rendered.rows[0].std_dev == computed_only.rows[0].std_dev);

  // Confusion grids render from whatever matrices the caller computed.
  ConfusionMatrix cm;
  cm.counts[0][0] = 5;
  cm.counts[1][1] = 2;
  cm.counts[2][0] = 1;
  const std::string grid = render_confusion_grid_svg({{"majority vote", cm}});
  CHECK(grid.find("majority vote") != std::string::npos);
}
