#pragma once

// Independent reference implementations used as test oracles. These are
// kept deliberately naive and separate from the library code paths they
// check.

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "attachnlp/corpus.hpp"
#include "attachnlp/instances.hpp"
#include "attachnlp/labels.hpp"
#include "attachnlp/rng.hpp"

namespace oracles {

using attachnlp::AttachmentLabel;
using attachnlp::Instance;
using attachnlp::kLabelOrder;
using attachnlp::kNumLabels;
using attachnlp::label_index;

// Literal restatement of the concatenation rules: walk the turns, start a
// new group whenever the previous one reached the threshold, and keep a
// trailing short group only if it spans several turns.
inline std::vector<std::vector<std::size_t>> chunk_reference(
    const std::vector<std::int64_t>& turn_word_counts, std::int64_t min_length,
    bool keep_trailing_multi_turn = true) {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> current;
  std::int64_t words_in_current = 0;
  for (std::size_t i = 0; i < turn_word_counts.size(); ++i) {
    current.push_back(i);
    words_in_current += turn_word_counts[i];
    if (words_in_current >= min_length) {
      groups.push_back(current);
      current.clear();
      words_in_current = 0;
    }
  }
  if (current.size() >= 2 && keep_trailing_multi_turn) {
    groups.push_back(current);
  }
  return groups;
}

// Majority-vote rule spelled out step by step.
inline AttachmentLabel vote_reference(const std::vector<AttachmentLabel>& votes,
                                      const std::array<double, kNumLabels>& probability_sums,
                                      bool* tie_broken = nullptr) {
  std::array<int, kNumLabels> counts{};
  for (AttachmentLabel vote : votes) ++counts[label_index(vote)];

  int top = 0;
  for (int count : counts) top = std::max(top, count);

  std::vector<std::size_t> tied;
  for (std::size_t c = 0; c < kNumLabels; ++c) {
    if (counts[c] == top) tied.push_back(c);
  }
  if (tie_broken) *tie_broken = tied.size() >= 2;
  std::size_t winner = tied.front();
  for (std::size_t candidate : tied) {
    if (probability_sums[candidate] > probability_sums[winner]) winner = candidate;
  }
  return kLabelOrder[winner];
}

// Two-pass mean and population standard deviation.
inline std::pair<double, double> mean_std_reference(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

// Multinomial naive Bayes over lowercased words with add-one smoothing.
// Used to probe how much class signal a corpus carries.
class BagOfWordsOracle {
 public:
  static std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') {
        current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      } else if (!current.empty()) {
        tokens.push_back(current);
        current.clear();
      }
    }
    if (!current.empty()) tokens.push_back(current);
    return tokens;
  }

  void fit(std::span<const Instance> instances) {
    for (const Instance& instance : instances) {
      const std::size_t c = label_index(instance.label);
      class_counts_[c] += 1.0;
      for (const std::string& token : tokenize(instance.text)) {
        word_counts_[token][c] += 1.0;
        total_words_[c] += 1.0;
      }
    }
  }

  AttachmentLabel classify(const std::string& text) const {
    const double vocab = static_cast<double>(word_counts_.size()) + 1.0;
    const double total_docs = class_counts_[0] + class_counts_[1] + class_counts_[2];
    std::array<double, kNumLabels> scores{};
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      scores[c] = std::log((class_counts_[c] + 1.0) / (total_docs + 3.0));
    }
    for (const std::string& token : tokenize(text)) {
      const auto it = word_counts_.find(token);
      for (std::size_t c = 0; c < kNumLabels; ++c) {
        const double count = it == word_counts_.end() ? 0.0 : it->second[c];
        scores[c] += std::log((count + 1.0) / (total_words_[c] + vocab));
      }
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumLabels; ++c) {
      if (scores[c] > scores[best]) best = c;
    }
    return kLabelOrder[best];
  }

  double accuracy(std::span<const Instance> instances) const {
    if (instances.empty()) return 0.0;
    std::int64_t correct = 0;
    for (const Instance& instance : instances) {
      if (classify(instance.text) == instance.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(instances.size());
  }

 private:
  std::unordered_map<std::string, std::array<double, kNumLabels>> word_counts_;
  std::array<double, kNumLabels> class_counts_{};
  std::array<double, kNumLabels> total_words_{};
};

// --- fixture helpers -------------------------------------------------

inline std::string words(std::int64_t count, const std::string& word = "w") {
  std::string text;
  for (std::int64_t i = 0; i < count; ++i) {
    if (i > 0) text += ' ';
    text += word;
  }
  return text;
}

inline attachnlp::Transcript patient_doc(const std::string& doc_id,
                                         const std::vector<std::int64_t>& turn_word_counts,
                                         AttachmentLabel label = AttachmentLabel::Secure) {
  attachnlp::Transcript doc;
  doc.doc_id = doc_id;
  doc.label = label;
  for (std::size_t i = 0; i < turn_word_counts.size(); ++i) {
    doc.turns.push_back(attachnlp::SpeechTurn{doc_id, static_cast<int>(i),
                                              attachnlp::Speaker::Patient,
                                              words(turn_word_counts[i])});
  }
  return doc;
}

// Random per-turn word counts for oracle-equivalence sweeps.
inline std::vector<std::int64_t> random_turn_counts(attachnlp::SeededRng& rng,
                                                    std::size_t max_turns = 50,
                                                    std::int64_t max_words = 300) {
  const std::size_t n = 1 + rng.bounded(max_turns);
  std::vector<std::int64_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    counts.push_back(static_cast<std::int64_t>(rng.bounded(max_words + 1)));
  }
  return counts;
}

}  // namespace oracles
