#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "attachnlp/corpus.hpp"

namespace attachnlp {

// One classification input: one or more concatenated consecutive patient
// turns of a single document, inheriting the document label.
struct Instance {
  std::string instance_id;  // doc_id + ":" + first source turn index
  std::string doc_id;
  std::string text;                     // turn texts joined by one space
  std::vector<int> source_turn_indices; // original turn indices, ascending
  std::int64_t word_count = 0;
  AttachmentLabel label = AttachmentLabel::Avoidant;

  bool operator==(const Instance&) const = default;
};

struct MinLengthConfig {
  std::int64_t min_length = 0;  // words; 0 keeps every turn as-is
  // A trailing chunk that stays below min_length is emitted when it spans
  // at least two turns (it has "already been combined"); a trailing
  // single-turn chunk below threshold is always dropped. Setting this to
  // false drops under-threshold trailing chunks regardless of turn count.
  bool keep_trailing_multi_turn = true;
};

// Core of the concatenation rule over per-turn word counts, expressed as
// [begin, end) ranges into the patient-turn subsequence. Greedy forward
// scan: a chunk absorbs following turns until it reaches min_length; the
// terminal chunk follows the rule above.
std::vector<std::pair<std::size_t, std::size_t>> chunk_by_min_length(
    std::span<const std::int64_t> turn_word_counts, const MinLengthConfig& cfg);

// Applies the chunking rule to the patient turns of one labeled document.
// Therapist turns are invisible: patient turns separated by therapist
// speech still count as consecutive.
std::vector<Instance> build_instances(const Transcript& transcript,
                                      const MinLengthConfig& cfg);

struct CorpusInstances {
  std::vector<Instance> instances;
  ClassDistribution distribution;
};

// Chunking never crosses document boundaries.
CorpusInstances build_corpus_instances(const Corpus& corpus, const MinLengthConfig& cfg);

// Instance JSONL, one instance per line:
//   {"instance_id", "doc_id", "label", "word_count", "source_turn_indices", "text"}
std::string instances_to_jsonl(std::span<const Instance> instances);
void save_instances(std::span<const Instance> instances, const std::filesystem::path& path);
std::vector<Instance> load_instances(const std::filesystem::path& path);

ClassDistribution instance_distribution(std::span<const Instance> instances);

}  // namespace attachnlp
