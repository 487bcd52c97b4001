#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>

#include "attachnlp/ensemble.hpp"
#include "attachnlp/errors.hpp"
#include "attachnlp/rng.hpp"
#include "attachnlp/util.hpp"
#include "oracles.hpp"

using namespace attachnlp;

namespace {

constexpr auto A = AttachmentLabel::Avoidant;
constexpr auto S = AttachmentLabel::Secure;
constexpr auto P = AttachmentLabel::Preoccupied;

// A prediction whose argmax is `vote`, with the remaining probability
// spread over the other labels.
Prediction prediction_for(const std::string& id, AttachmentLabel vote, double confidence) {
  Prediction prediction;
  prediction.instance_id = id;
  const double rest = (1.0 - confidence) / 2.0;
  prediction.probabilities = {rest, rest, rest};
  prediction.probabilities[label_index(vote)] = confidence;
  prediction.predicted = vote;
  return prediction;
}

std::vector<std::vector<Prediction>> single_instance_models(
    const std::vector<AttachmentLabel>& votes, const std::vector<double>& confidences) {
  std::vector<std::vector<Prediction>> models;
  for (std::size_t m = 0; m < votes.size(); ++m) {
    models.push_back({prediction_for("x", votes[m], confidences[m])});
  }
  return models;
}

}  // namespace

TEST_CASE("clear plurality wins without tie breaking") {
  const auto models = single_instance_models({P, P, A, S, P}, {0.5, 0.5, 0.5, 0.5, 0.5});
  const auto records = majority_vote(models);
  REQUIRE(records.size() == 1);
  CHECK(records[0].winner == P);
  CHECK(!records[0].tie_broken);
  CHECK(records[0].votes == std::vector<AttachmentLabel>{P, P, A, S, P});
}

TEST_CASE("2-2-1 ties break by summed probability, then label order") {
  SUBCASE("summed probability decides") {
    // votes P,P,A,A,S with avoidant carrying more probability mass
    auto models = single_instance_models({P, P, A, A, S}, {0.55, 0.55, 0.9, 0.9, 0.4});
    const auto records = majority_vote(models);
    REQUIRE(records.size() == 1);
    CHECK(records[0].tie_broken);
    CHECK(records[0].winner == A);
    CHECK(records[0].probability_sums[label_index(A)] >
          records[0].probability_sums[label_index(P)]);
  }

  SUBCASE("exactly equal sums fall back to the fixed label order") {
    // Two models, one secure vote, one preoccupied vote, mirrored
    // probabilities: sums tie exactly, so the earlier label (secure) wins.
    std::vector<std::vector<Prediction>> models;
    Prediction first = prediction_for("x", S, 0.6);
    Prediction second = prediction_for("x", P, 0.6);
    second.probabilities = {first.probabilities[0], first.probabilities[2],
                            first.probabilities[1]};
    models.push_back({first});
    models.push_back({second});
    const auto records = majority_vote(models);
    CHECK(records[0].tie_broken);
    CHECK(records[0].winner == S);
  }
}

TEST_CASE("a single model simply passes through") {
  std::vector<std::vector<Prediction>> models = {
      {prediction_for("a", S, 0.8), prediction_for("b", P, 0.8)}};
  const auto records = majority_vote(models);
  REQUIRE(records.size() == 2);
  CHECK(records[0].instance_id == "a");
  CHECK(records[0].winner == S);
  CHECK(records[1].winner == P);
  CHECK(!records[0].tie_broken);
}

TEST_CASE("model order never changes winners") {
  SeededRng rng(314159);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<std::vector<Prediction>> models(5);
    for (int instance = 0; instance < 8; ++instance) {
      const std::string id = "i" + std::to_string(instance);
      for (auto& model : models) {
        const auto vote = kLabelOrder[rng.bounded(3)];
        model.push_back(prediction_for(id, vote, 0.4 + 0.55 * rng.uniform01()));
      }
    }
    const auto base = majority_vote(models);
    auto shuffled = models;
    rng.shuffle(shuffled);
    const auto permuted = majority_vote(shuffled);
    for (std::size_t i = 0; i < base.size(); ++i) {
      CHECK(base[i].winner == permuted[i].winner);
    }
  }
}

TEST_CASE("winner matches the brute-force rule on every 5-vote pattern") {
  // All 3^5 ordered vote vectors, each with several random probability
  // shapes; covers every multiset including the 2-2-1 ties.
  SeededRng rng(271828);
  for (int pattern = 0; pattern < 243; ++pattern) {
    std::vector<AttachmentLabel> votes;
    int remaining = pattern;
    for (int m = 0; m < 5; ++m) {
      votes.push_back(kLabelOrder[remaining % 3]);
      remaining /= 3;
    }
    for (int repeat = 0; repeat < 4; ++repeat) {
      std::vector<double> confidences;
      for (int m = 0; m < 5; ++m) confidences.push_back(0.36 + 0.6 * rng.uniform01());
      const auto models = single_instance_models(votes, confidences);
      const auto records = majority_vote(models);
      REQUIRE(records.size() == 1);

      bool expect_tie = false;
      const AttachmentLabel expected =
          oracles::vote_reference(votes, records[0].probability_sums, &expect_tie);
      CAPTURE(pattern);
      CHECK(records[0].winner == expected);
      CHECK(records[0].tie_broken == expect_tie);

      // With five votes over three classes the only tied pattern is 2-2-1.
      std::array<int, 3> counts{};
      for (AttachmentLabel vote : votes) ++counts[label_index(vote)];
      std::sort(counts.begin(), counts.end());
      CHECK(records[0].tie_broken == (counts == std::array<int, 3>{1, 2, 2}));
    }
  }
}

TEST_CASE("models must cover the same instance ids") {
  std::vector<std::vector<Prediction>> models = {
      {prediction_for("a", S, 0.8), prediction_for("b", P, 0.8)},
      {prediction_for("a", S, 0.8), prediction_for("c", P, 0.8)}};
  CHECK_THROWS_AS(majority_vote(models), InstanceSetMismatch);

  SUBCASE("size mismatch") {
    models[1].pop_back();
    CHECK_THROWS_AS(majority_vote(models), InstanceSetMismatch);
  }

  SUBCASE("empty model list") {
    CHECK_THROWS_AS(majority_vote({}), EmptyInput);
  }

  SUBCASE("duplicate ids within one model") {
    std::vector<std::vector<Prediction>> duplicated = {
        {prediction_for("a", S, 0.8), prediction_for("a", P, 0.8)},
        {prediction_for("a", S, 0.8), prediction_for("b", P, 0.8)}};
    CHECK_THROWS_AS(majority_vote(duplicated), InstanceSetMismatch);
    std::swap(duplicated[0], duplicated[1]);
    CHECK_THROWS_AS(majority_vote(duplicated), InstanceSetMismatch);
  }
}

TEST_CASE("vote records round-trip through JSONL") {
  auto models = single_instance_models({P, P, A, A, S}, {0.5, 0.5, 0.9, 0.9, 0.4});
  models.push_back({prediction_for("x", P, 0.7)});  // 6th model, breaks the tie
  const auto records = majority_vote(models);

  const auto path = std::filesystem::temp_directory_path() / "attachnlp_votes_test.jsonl";
  save_votes(records, path);
  const auto reloaded = load_votes(path);
  std::filesystem::remove(path);

  REQUIRE(reloaded.size() == records.size());
  CHECK(reloaded[0].instance_id == records[0].instance_id);
  CHECK(reloaded[0].votes == records[0].votes);
  CHECK(reloaded[0].winner == records[0].winner);
  CHECK(reloaded[0].tie_broken == records[0].tie_broken);
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    CHECK(reloaded[0].probability_sums[c] ==
          doctest::Approx(records[0].probability_sums[c]).epsilon(1e-12));
  }
}
