#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "attachnlp/errors.hpp"
#include "attachnlp/instances.hpp"
#include "attachnlp/rng.hpp"
#include "attachnlp/util.hpp"
#include "oracles.hpp"

using namespace attachnlp;

namespace {

std::vector<std::vector<std::size_t>> chunk_as_groups(const std::vector<std::int64_t>& counts,
                                                      std::int64_t min_length,
                                                      bool keep_trailing = true) {
  MinLengthConfig cfg;
  cfg.min_length = min_length;
  cfg.keep_trailing_multi_turn = keep_trailing;
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& [begin, end] : chunk_by_min_length(counts, cfg)) {
    std::vector<std::size_t> group;
    for (std::size_t i = begin; i < end; ++i) group.push_back(i);
    groups.push_back(group);
  }
  return groups;
}

}  // namespace

TEST_CASE("word_count counts maximal non-whitespace runs") {
  CHECK(word_count("I don't know") == 3);
  CHECK(word_count("") == 0);
  CHECK(word_count("  a   b ") == 2);
  CHECK(word_count("one\ttwo\nthree") == 3);
  CHECK(word_count("   ") == 0);
}

TEST_CASE("chunking follows the minimum-length concatenation rules") {
  SUBCASE("turn above threshold stands alone; short turns combine forward") {
    const std::vector<std::int64_t> counts = {60, 20, 10, 80, 30};
    const auto groups = chunk_as_groups(counts, 50);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0] == std::vector<std::size_t>{0});
    CHECK(groups[1] == std::vector<std::size_t>{1, 2, 3});
    // the final 30-word turn is a trailing single-turn chunk: dropped
  }

  SUBCASE("trailing chunk below threshold is kept when already combined") {
    const auto groups = chunk_as_groups({10, 20}, 50);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0] == std::vector<std::size_t>{0, 1});
  }

  SUBCASE("min_length 0 keeps every turn as its own instance") {
    const auto groups = chunk_as_groups({5, 1, 300}, 0);
    REQUIRE(groups.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(groups[i] == std::vector<std::size_t>{i});
    }
  }

  SUBCASE("drop-trailing configuration removes short multi-turn tails") {
    CHECK(chunk_as_groups({10, 20}, 50, /*keep_trailing=*/false).empty());
    CHECK(chunk_as_groups({60, 10, 20}, 50, false) ==
          std::vector<std::vector<std::size_t>>{{0}});
  }

  SUBCASE("negative min_length is rejected") {
    MinLengthConfig cfg;
    cfg.min_length = -1;
    const std::vector<std::int64_t> counts = {1};
    CHECK_THROWS_AS(chunk_by_min_length(counts, cfg), InvalidConfig);
  }
}

TEST_CASE("chunking matches the brute-force reference on randomized documents") {
  SeededRng rng(20240517);
  const std::vector<std::int64_t> min_lengths = {0, 50, 100, 150, 250};
  for (int trial = 0; trial < 300; ++trial) {
    const auto counts = oracles::random_turn_counts(rng);
    for (std::int64_t min_length : min_lengths) {
      for (bool keep : {true, false}) {
        CAPTURE(trial);
        CAPTURE(min_length);
        CAPTURE(keep);
        CHECK(chunk_as_groups(counts, min_length, keep) ==
              oracles::chunk_reference(counts, min_length, keep));
      }
    }
  }
}

TEST_CASE("chunking invariants hold on randomized documents") {
  SeededRng rng(99301);
  const std::vector<std::int64_t> min_lengths = {0, 25, 50, 100, 150, 250};
  for (int trial = 0; trial < 200; ++trial) {
    const auto counts = oracles::random_turn_counts(rng);
    std::size_t previous_count = counts.size() + 1;
    for (std::int64_t min_length : min_lengths) {
      const auto groups = chunk_as_groups(counts, min_length);

      // Partition: strictly increasing contiguous indices, no overlap.
      std::size_t next_expected = 0;
      for (const auto& group : groups) {
        REQUIRE(!group.empty());
        CHECK(group.front() >= next_expected);
        for (std::size_t i = 1; i < group.size(); ++i) {
          CHECK(group[i] == group[i - 1] + 1);
        }
        next_expected = group.back() + 1;
      }

      // Threshold: only a multi-turn tail may fall short.
      for (std::size_t g = 0; g < groups.size(); ++g) {
        std::int64_t total = 0;
        for (std::size_t i : groups[g]) total += counts[i];
        if (total < min_length) {
          CHECK(g == groups.size() - 1);
          CHECK(groups[g].size() >= 2);
          CHECK(groups[g].back() == counts.size() - 1);
        }
      }

      // Monotonicity: instance count never grows with the threshold.
      CHECK(groups.size() <= previous_count);
      previous_count = groups.size();
    }
  }
}

TEST_CASE("build_instances assembles texts, ids and indices") {
  Transcript doc;
  doc.doc_id = "s01";
  doc.label = AttachmentLabel::Preoccupied;
  // Patient turns sit at indices 0, 2, 3 with a therapist turn between.
  doc.turns = {
      SpeechTurn{"s01", 0, Speaker::Patient, "it was a long week"},
      SpeechTurn{"s01", 1, Speaker::Therapist, "tell me more"},
      SpeechTurn{"s01", 2, Speaker::Patient, "not much to say"},
      SpeechTurn{"s01", 3, Speaker::Patient, "really not much"},
  };

  SUBCASE("therapist turns are invisible to chunking") {
    MinLengthConfig cfg;
    cfg.min_length = 8;
    const auto instances = build_instances(doc, cfg);
    REQUIRE(instances.size() == 1);
    CHECK(instances[0].instance_id == "s01:0");
    CHECK(instances[0].doc_id == "s01");
    CHECK(instances[0].text == "it was a long week not much to say");
    CHECK(instances[0].source_turn_indices == std::vector<int>{0, 2});
    CHECK(instances[0].word_count == 9);
    CHECK(instances[0].label == AttachmentLabel::Preoccupied);
    // trailing single patient turn below threshold is dropped
  }

  SUBCASE("min_length 0 keeps turn texts unchanged") {
    const auto instances = build_instances(doc, MinLengthConfig{});
    REQUIRE(instances.size() == 3);
    CHECK(instances[0].text == "it was a long week");
    CHECK(instances[1].text == "not much to say");
    CHECK(instances[2].text == "really not much");
    CHECK(instances[2].instance_id == "s01:3");
  }

  SUBCASE("unlabeled documents are rejected") {
    doc.label.reset();
    CHECK_THROWS_AS(build_instances(doc, MinLengthConfig{}), UnlabeledDocument);
  }
}

TEST_CASE("instance word_count equals the sum of source turn counts") {
  SeededRng rng(5150);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::int64_t> counts;
    for (const std::int64_t raw : oracles::random_turn_counts(rng, 20, 40)) {
      counts.push_back(raw + 1);  // real turns are non-empty
    }
    const auto doc = oracles::patient_doc("d", counts);
    MinLengthConfig cfg;
    cfg.min_length = 30;
    for (const Instance& instance : build_instances(doc, cfg)) {
      std::int64_t expected = 0;
      for (int index : instance.source_turn_indices) {
        expected += counts[static_cast<std::size_t>(index)];
      }
      CHECK(instance.word_count == expected);
      CHECK(instance.word_count == word_count(instance.text));
    }
  }
}

TEST_CASE("build_corpus_instances never crosses document boundaries") {
  Corpus corpus;
  corpus.documents.push_back(
      oracles::patient_doc("a", {10, 10, 10}, AttachmentLabel::Avoidant));
  corpus.documents.push_back(
      oracles::patient_doc("b", {10, 10, 10}, AttachmentLabel::Secure));

  MinLengthConfig cfg;
  cfg.min_length = 25;
  const auto result = build_corpus_instances(corpus, cfg);
  REQUIRE(result.instances.size() == 2);
  CHECK(result.instances[0].doc_id == "a");
  CHECK(result.instances[0].source_turn_indices == std::vector<int>{0, 1, 2});
  CHECK(result.instances[1].doc_id == "b");
  CHECK(result.distribution.counts[label_index(AttachmentLabel::Avoidant)] == 1);
  CHECK(result.distribution.counts[label_index(AttachmentLabel::Secure)] == 1);

  SUBCASE("three turns at min_length zero give three instances") {
    Corpus single;
    single.documents.push_back(oracles::patient_doc("c", {4, 4, 4}));
    CHECK(build_corpus_instances(single, MinLengthConfig{}).instances.size() == 3);
  }
}

TEST_CASE("instance JSONL round-trips") {
  Corpus corpus;
  corpus.documents.push_back(
      oracles::patient_doc("doc x", {12, 3, 40}, AttachmentLabel::Preoccupied));
  MinLengthConfig cfg;
  cfg.min_length = 10;
  const auto built = build_corpus_instances(corpus, cfg).instances;

  const auto path = std::filesystem::temp_directory_path() / "attachnlp_instances_test.jsonl";
  save_instances(built, path);
  const auto loaded = load_instances(path);
  CHECK(loaded == built);
  std::filesystem::remove(path);
}

TEST_CASE("malformed instance files are rejected with line numbers") {
  const auto path = std::filesystem::temp_directory_path() / "attachnlp_bad_instances.jsonl";
  write_text_file(path,
                  R"({"instance_id":"a:0","doc_id":"a","label":"secure","word_count":1,)"
                  R"("source_turn_indices":[0],"text":"hi"})"
                  "\nnot json\n");
  CHECK_THROWS_WITH_AS(load_instances(path), doctest::Contains("line 2"), MalformedRecord);
  std::filesystem::remove(path);
}
