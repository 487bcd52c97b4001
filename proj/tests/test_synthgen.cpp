#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <string>

#include "attachnlp/errors.hpp"
#include "attachnlp/instances.hpp"
#include "attachnlp/splits.hpp"
#include "attachnlp/synthgen.hpp"
#include "attachnlp/util.hpp"
#include "oracles.hpp"

using namespace attachnlp;

namespace {

// Turn-level oracle accuracy under a document-level split, so the probe
// itself cannot leak.
double oracle_turn_accuracy(const Corpus& corpus, std::uint64_t seed) {
  const SplitPlan plan = stratified_split(corpus, 16, seed);
  const CorpusInstances turns = build_corpus_instances(corpus, MinLengthConfig{});

  std::vector<Instance> train;
  std::vector<Instance> test;
  for (const Instance& instance : turns.instances) {
    if (contains_doc(plan.test_doc_ids, instance.doc_id)) {
      test.push_back(instance);
    } else {
      train.push_back(instance);
    }
  }
  oracles::BagOfWordsOracle oracle;
  oracle.fit(train);
  return oracle.accuracy(test);
}

}  // namespace

TEST_CASE("generation is byte-identical per seed") {
  SynthConfig cfg;
  cfg.seed = 7;
  const std::string first = corpus_to_jsonl(generate_corpus(cfg));
  const std::string second = corpus_to_jsonl(generate_corpus(cfg));
  CHECK(first == second);

  cfg.seed = 8;
  CHECK(corpus_to_jsonl(generate_corpus(cfg)) != first);
}

TEST_CASE("default config reproduces the reference document counts") {
  const Corpus corpus = generate_corpus(SynthConfig{});
  const ClassDistribution dist = corpus_stats(corpus, StatsLevel::Document);
  CHECK(dist.counts[label_index(AttachmentLabel::Avoidant)] == 20);
  CHECK(dist.counts[label_index(AttachmentLabel::Secure)] == 24);
  CHECK(dist.counts[label_index(AttachmentLabel::Preoccupied)] == 34);
}

TEST_CASE("generated corpora survive the load_corpus validation round-trip") {
  SynthConfig cfg;
  cfg.doc_counts = {4, 4, 4};
  cfg.seed = 21;
  const Corpus corpus = generate_corpus(cfg);
  const auto path = std::filesystem::temp_directory_path() / "attachnlp_synth_roundtrip.jsonl";
  save_corpus(corpus, path);
  const Corpus reloaded = load_corpus(path, /*require_labels=*/true);
  std::filesystem::remove(path);
  REQUIRE(reloaded.documents.size() == corpus.documents.size());
  for (std::size_t i = 0; i < corpus.documents.size(); ++i) {
    CHECK(reloaded.documents[i] == corpus.documents[i]);
  }
}

TEST_CASE("marker lexicons are pairwise disjoint and filler-free") {
  const auto& phrases = marker_phrases();
  std::array<std::set<std::string>, kNumLabels> word_sets;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    for (const std::string& phrase : phrases[c]) {
      for (std::string_view word : split_whitespace(phrase)) {
        word_sets[c].insert(std::string(word));
      }
    }
    CHECK(!word_sets[c].empty());
  }

  for (std::size_t a = 0; a < kNumLabels; ++a) {
    for (std::size_t b = a + 1; b < kNumLabels; ++b) {
      for (const std::string& word : word_sets[a]) {
        CAPTURE(word);
        CHECK(word_sets[b].count(word) == 0);
      }
    }
  }

  const std::set<std::string> filler(filler_vocabulary().begin(), filler_vocabulary().end());
  for (const auto& word_set : word_sets) {
    for (const std::string& word : word_set) {
      CAPTURE(word);
      CHECK(filler.count(word) == 0);
    }
  }
}

TEST_CASE("no marker phrase appears when marker_strength is zero") {
  SynthConfig cfg;
  cfg.doc_counts = {3, 3, 3};
  cfg.marker_strength = 0.0;
  cfg.seed = 5;
  const Corpus corpus = generate_corpus(cfg);
  const std::string all_text = corpus_to_jsonl(corpus);
  for (const auto& phrases : marker_phrases()) {
    for (const std::string& phrase : phrases) {
      CAPTURE(phrase);
      CHECK(all_text.find(phrase) == std::string::npos);
    }
  }
}

TEST_CASE("empirical mean turn lengths are strictly ordered S < A < P") {
  SynthConfig cfg;
  cfg.seed = 13;
  // Double the default document counts to push the sample past 10,000
  // patient turns.
  for (int& count : cfg.doc_counts) count *= 2;
  const Corpus corpus = generate_corpus(cfg);

  std::array<double, kNumLabels> total{};
  std::array<double, kNumLabels> count{};
  std::int64_t sampled_turns = 0;
  for (const Transcript& doc : corpus.documents) {
    for (const SpeechTurn& turn : extract_patient_turns(doc)) {
      total[label_index(*doc.label)] += static_cast<double>(word_count(turn.text));
      count[label_index(*doc.label)] += 1.0;
      ++sampled_turns;
    }
  }
  REQUIRE(sampled_turns >= 10000);

  const double avoidant = total[0] / count[0];
  const double secure = total[1] / count[1];
  const double preoccupied = total[2] / count[2];
  CHECK(secure < avoidant);
  CHECK(avoidant < preoccupied);
}

TEST_CASE("marker strength is a learnability dial for a bag-of-words probe") {
  SynthConfig separable;
  separable.marker_strength = 1.0;
  separable.seed = 2024;
  CHECK(oracle_turn_accuracy(generate_corpus(separable), 1) >= 0.99);

  SynthConfig hollow = separable;
  hollow.marker_strength = 0.0;
  CHECK(oracle_turn_accuracy(generate_corpus(hollow), 1) <= 0.45);
}

TEST_CASE("therapist interleaving is optional") {
  SynthConfig cfg;
  cfg.doc_counts = {2, 2, 2};
  cfg.seed = 4;

  cfg.therapist_interleave = true;
  const Corpus with = generate_corpus(cfg);
  bool saw_therapist = false;
  for (const Transcript& doc : with.documents) {
    for (const SpeechTurn& turn : doc.turns) {
      saw_therapist |= turn.speaker == Speaker::Therapist;
    }
  }
  CHECK(saw_therapist);

  cfg.therapist_interleave = false;
  for (const Transcript& doc : generate_corpus(cfg).documents) {
    for (const SpeechTurn& turn : doc.turns) {
      CHECK(turn.speaker == Speaker::Patient);
    }
  }
}

TEST_CASE("config validation on construction") {
  SynthConfig cfg;
  SUBCASE("marker strength range") {
    cfg.marker_strength = 1.5;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  }
  SUBCASE("turns per doc range") {
    cfg.turns_per_doc[0] = {0, 5};
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  }
  SUBCASE("secure mean must stay below preoccupied mean") {
    cfg.turn_length[label_index(AttachmentLabel::Secure)].log_mean = 5.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  }
  SUBCASE("negative doc counts") {
    cfg.doc_counts[1] = -1;
    CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  }
}

TEST_CASE("config JSON round-trips and rejects unknown keys") {
  SynthConfig cfg;
  cfg.doc_counts = {5, 6, 7};
  cfg.marker_strength = 0.25;
  cfg.seed = 99;
  const auto as_json = cfg.to_json();
  const SynthConfig reparsed = SynthConfig::from_json(as_json);
  CHECK(reparsed.doc_counts == cfg.doc_counts);
  CHECK(reparsed.marker_strength == cfg.marker_strength);
  CHECK(reparsed.seed == cfg.seed);
  CHECK(corpus_to_jsonl(generate_corpus(reparsed)) == corpus_to_jsonl(generate_corpus(cfg)));

  nlohmann::json bad = {{"doc_count", {{"avoidant", 3}}}};
  CHECK_THROWS_AS(SynthConfig::from_json(bad), InvalidConfig);
}
