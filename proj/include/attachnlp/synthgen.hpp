#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "attachnlp/corpus.hpp"

namespace attachnlp {

// Per-label lognormal turn-length model (word counts).
struct LengthModel {
  double log_mean = 2.4;
  double log_sd = 1.0;

  double mean_words() const;  // exp(mu + sigma^2 / 2)
};

struct TurnRange {
  int min_turns = 60;
  int max_turns = 100;
};

// Synthetic corpus knobs, indexed by label order (avoidant, secure,
// preoccupied). Defaults reproduce the reference document distribution
// (20/24/34 docs) and keep per-label mean turn lengths strictly ordered
// secure < avoidant < preoccupied while overlapping heavily, so that text
// length alone carries almost no class signal. Turns-per-document ranges
// are per label and scale inversely with document counts, which keeps the
// turn-level and concatenated-instance-level class shares well below any
// majority-classifier shortcut.
struct SynthConfig {
  std::array<int, kNumLabels> doc_counts = {20, 24, 34};
  std::array<TurnRange, kNumLabels> turns_per_doc = {{{92, 112}, {75, 95}, {50, 70}}};
  std::array<LengthModel, kNumLabels> turn_length = {{{2.40, 1.0}, {2.25, 1.0}, {2.55, 1.0}}};
  // Probability that a patient turn carries one class-exclusive marker
  // phrase: 1.0 makes turns trivially separable, 0.0 removes all lexical
  // class signal.
  double marker_strength = 1.0;
  bool therapist_interleave = true;
  std::uint64_t seed = 0;

  void validate() const;

  static SynthConfig from_json(const nlohmann::json& value);
  nlohmann::ordered_json to_json() const;
};

// Fully deterministic per config: repeated calls return byte-identical
// corpora (documents derive their own seed streams, so generation order
// is immaterial).
Corpus generate_corpus(const SynthConfig& cfg);

// Class-exclusive marker phrases; every word in a phrase is unique to its
// class and absent from the filler vocabulary.
const std::array<std::vector<std::string>, kNumLabels>& marker_phrases();

// Neutral words shared by all classes and both speakers.
const std::vector<std::string>& filler_vocabulary();

}  // namespace attachnlp
