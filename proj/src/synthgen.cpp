#include "attachnlp/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "attachnlp/errors.hpp"
#include "attachnlp/rng.hpp"
#include "attachnlp/util.hpp"

namespace attachnlp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr int kMaxTurnWords = 400;

const std::array<std::string, kNumLabels> kConfigKeys = {"avoidant", "secure", "preoccupied"};

std::string sample_words(SeededRng& rng, const std::vector<std::string>& vocab, int count) {
  std::string text;
  for (int i = 0; i < count; ++i) {
    if (i > 0) text += ' ';
    text += rng.pick(vocab);
  }
  return text;
}

}  // namespace

const std::array<std::vector<std::string>, kNumLabels>& marker_phrases() {
  static const std::array<std::vector<std::string>, kNumLabels> phrases = {{
      // avoidant
      {"guarded detachment", "selfreliant distance", "dismissive shrug",
       "walled aloofness", "stoic withdrawal", "standoffish reserve",
       "clipped formality", "unbothered detachment"},
      // secure
      {"steady groundedness", "trusting warmth", "balanced openness",
       "reassured calmness", "settled confiding", "anchored steadiness",
       "candid easefulness", "grounded trustfulness"},
      // preoccupied
      {"anxious spiraling", "clinging reassurances", "overwhelmed rumination",
       "frantic neediness", "obsessive worrying", "spiraling fixation",
       "restless overthinking", "consuming desperation"},
  }};
  return phrases;
}

const std::vector<std::string>& filler_vocabulary() {
  static const std::vector<std::string> vocab = {
      "i",       "you",    "we",     "it",      "that",    "this",   "the",
      "a",       "and",    "but",    "so",      "then",    "was",    "were",
      "is",      "be",     "been",   "have",    "had",     "just",   "like",
      "know",    "think",  "felt",   "feel",    "about",   "with",   "work",
      "home",    "week",   "day",    "time",    "went",    "going",  "said",
      "talked",  "maybe",  "really", "kind",    "sort",    "of",     "bit",
      "little",  "when",   "because", "things", "stuff",   "again",  "still",
      "okay",    "well",   "yeah",   "um",      "something", "anything",
      "nothing", "there",  "here",   "what",    "how",     "did",    "not",
      "on",      "in",     "at",     "to",      "for",     "from",   "last",
      "next",    "saw",    "told",   "asked",   "while",   "after",  "before",
      "tell",    "me",     "more",   "pretty",  "much",
  };
  return vocab;
}

double LengthModel::mean_words() const {
  return std::exp(log_mean + 0.5 * log_sd * log_sd);
}

void SynthConfig::validate() const {
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (doc_counts[i] < 0) throw InvalidConfig("doc_counts must be non-negative");
    if (turns_per_doc[i].min_turns < 1 ||
        turns_per_doc[i].max_turns < turns_per_doc[i].min_turns) {
      throw InvalidConfig("turns_per_doc range must satisfy 1 <= min <= max");
    }
    if (!(turn_length[i].log_sd > 0.0)) throw InvalidConfig("turn length log_sd must be positive");
  }
  if (!(marker_strength >= 0.0 && marker_strength <= 1.0)) {
    throw InvalidConfig("marker_strength must be in [0, 1]");
  }
  const double secure_mean = turn_length[label_index(AttachmentLabel::Secure)].mean_words();
  const double preoccupied_mean =
      turn_length[label_index(AttachmentLabel::Preoccupied)].mean_words();
  if (!(secure_mean < preoccupied_mean)) {
    throw InvalidConfig("secure mean turn length must stay below preoccupied mean");
  }
}

Corpus generate_corpus(const SynthConfig& cfg) {
  cfg.validate();

  Corpus corpus;
  corpus.provenance["generator"] = "synthgen";
  corpus.provenance["seed"] = std::to_string(cfg.seed);
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.3f", cfg.marker_strength);
  corpus.provenance["marker_strength"] = buffer;

  const auto& markers = marker_phrases();
  const auto& filler = filler_vocabulary();
  int doc_counter = 0;

  for (std::size_t label_idx = 0; label_idx < kNumLabels; ++label_idx) {
    const AttachmentLabel label = kLabelOrder[label_idx];
    for (int d = 0; d < cfg.doc_counts[label_idx]; ++d, ++doc_counter) {
      SeededRng rng(SeededRng::derive(cfg.seed, static_cast<std::uint64_t>(doc_counter)));
      char id_buffer[32];
      std::snprintf(id_buffer, sizeof(id_buffer), "doc-%04d", doc_counter);

      Transcript doc;
      doc.doc_id = id_buffer;
      doc.label = label;

      const TurnRange& range = cfg.turns_per_doc[label_idx];
      const int n_turns =
          range.min_turns +
          static_cast<int>(rng.bounded(
              static_cast<std::uint64_t>(range.max_turns - range.min_turns + 1)));

      int index = 0;
      auto add_therapist_turn = [&]() {
        const int words = 3 + static_cast<int>(rng.bounded(8));
        SpeechTurn turn;
        turn.doc_id = doc.doc_id;
        turn.index = index++;
        turn.speaker = Speaker::Therapist;
        turn.text = sample_words(rng, filler, words) + "?";
        doc.turns.push_back(std::move(turn));
      };

      if (cfg.therapist_interleave && rng.bernoulli(0.5)) add_therapist_turn();

      const LengthModel& length = cfg.turn_length[label_idx];
      for (int t = 0; t < n_turns; ++t) {
        const auto drawn = std::llround(rng.lognormal(length.log_mean, length.log_sd));
        const int n_words = static_cast<int>(std::clamp<long long>(drawn, 1, kMaxTurnWords));

        std::vector<std::string> words;
        words.reserve(static_cast<std::size_t>(n_words) + 8);
        for (int w = 0; w < n_words; ++w) words.push_back(rng.pick(filler));
        // One marker opportunity per ~25-word block keeps the lexical
        // signal density independent of turn length.
        const int marker_slots = 1 + (n_words - 1) / 25;
        for (int slot = 0; slot < marker_slots; ++slot) {
          if (!rng.bernoulli(cfg.marker_strength)) continue;
          const std::string& phrase = rng.pick(markers[label_idx]);
          const std::size_t at = rng.bounded(words.size() + 1);
          std::vector<std::string> spliced;
          spliced.reserve(words.size() + 3);
          spliced.insert(spliced.end(), words.begin(), words.begin() + static_cast<long>(at));
          for (std::string_view part : split_whitespace(phrase)) spliced.emplace_back(part);
          spliced.insert(spliced.end(), words.begin() + static_cast<long>(at), words.end());
          words = std::move(spliced);
        }

        std::string text;
        for (std::size_t w = 0; w < words.size(); ++w) {
          if (w > 0) text += ' ';
          text += words[w];
        }
        text += '.';

        SpeechTurn turn;
        turn.doc_id = doc.doc_id;
        turn.index = index++;
        turn.speaker = Speaker::Patient;
        turn.text = std::move(text);
        doc.turns.push_back(std::move(turn));

        if (cfg.therapist_interleave && t + 1 < n_turns && rng.bernoulli(0.7)) {
          add_therapist_turn();
        }
      }
      corpus.documents.push_back(std::move(doc));
    }
  }
  return corpus;
}

SynthConfig SynthConfig::from_json(const json& value) {
  if (!value.is_object()) throw InvalidConfig("synth config must be a JSON object");
  SynthConfig cfg;
  for (const auto& [key, item] : value.items()) {
    if (key == "doc_counts") {
      for (std::size_t i = 0; i < kNumLabels; ++i) {
        cfg.doc_counts[i] = item.value(kConfigKeys[i], cfg.doc_counts[i]);
      }
    } else if (key == "turns_per_doc") {
      for (std::size_t i = 0; i < kNumLabels; ++i) {
        if (!item.contains(kConfigKeys[i])) continue;
        const json& range = item.at(kConfigKeys[i]);
        if (!range.is_array() || range.size() != 2) {
          throw InvalidConfig("turns_per_doc entries must be [min, max]");
        }
        cfg.turns_per_doc[i] = TurnRange{range.at(0).get<int>(), range.at(1).get<int>()};
      }
    } else if (key == "turn_length") {
      for (std::size_t i = 0; i < kNumLabels; ++i) {
        if (!item.contains(kConfigKeys[i])) continue;
        const json& model = item.at(kConfigKeys[i]);
        cfg.turn_length[i].log_mean = model.value("log_mean", cfg.turn_length[i].log_mean);
        cfg.turn_length[i].log_sd = model.value("log_sd", cfg.turn_length[i].log_sd);
      }
    } else if (key == "marker_strength") {
      cfg.marker_strength = item.get<double>();
    } else if (key == "therapist_interleave") {
      cfg.therapist_interleave = item.get<bool>();
    } else if (key == "seed") {
      cfg.seed = item.get<std::uint64_t>();
    } else {
      throw InvalidConfig("synth config: unknown key \"" + key + "\"");
    }
  }
  cfg.validate();
  return cfg;
}

ordered_json SynthConfig::to_json() const {
  ordered_json doc_counts_json;
  ordered_json turns_json;
  ordered_json length_json;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    doc_counts_json[kConfigKeys[i]] = doc_counts[i];
    turns_json[kConfigKeys[i]] = {turns_per_doc[i].min_turns, turns_per_doc[i].max_turns};
    length_json[kConfigKeys[i]] = {{"log_mean", turn_length[i].log_mean},
                                   {"log_sd", turn_length[i].log_sd}};
  }
  ordered_json out;
  out["doc_counts"] = std::move(doc_counts_json);
  out["turns_per_doc"] = std::move(turns_json);
  out["turn_length"] = std::move(length_json);
  out["marker_strength"] = marker_strength;
  out["therapist_interleave"] = therapist_interleave;
  out["seed"] = seed;
  return out;
}

}  // namespace attachnlp
