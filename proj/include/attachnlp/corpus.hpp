#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "attachnlp/labels.hpp"

namespace attachnlp {

enum class Speaker { Patient, Therapist };

std::string_view speaker_name(Speaker speaker);

// One uninterrupted utterance. `index` is the 0-based position within the
// source document counting both speakers; text is stored verbatim.
struct SpeechTurn {
  std::string doc_id;
  int index = 0;
  Speaker speaker = Speaker::Patient;
  std::string text;

  bool operator==(const SpeechTurn&) const = default;
};

// One therapy session. The label is the document-level attachment class;
// unlabeled transcripts are allowed unless a caller demands otherwise.
struct Transcript {
  std::string doc_id;
  std::vector<SpeechTurn> turns;
  std::optional<AttachmentLabel> label;

  bool operator==(const Transcript&) const = default;
};

struct Corpus {
  std::vector<Transcript> documents;
  std::map<std::string, std::string> provenance;  // not serialized to JSONL
};

struct ClassDistribution {
  std::array<std::int64_t, kNumLabels> counts{};

  std::int64_t total() const { return counts[0] + counts[1] + counts[2]; }

  // count / total per label; all zeros when the distribution is empty.
  std::array<double, kNumLabels> proportions() const;
};

enum class StatsLevel { Document, Turn };

// Reads the transcript JSONL format, one document per line:
//   {"doc_id": "...", "label": "secure"|null, "turns": [{"speaker": "...", "text": "..."}]}
// Every record is validated; nothing is silently repaired. Speaker strings
// are matched case-insensitively ({patient, client} and {therapist,
// counselor, interviewer}).
Corpus load_corpus(const std::filesystem::path& path, bool require_labels);

// Inverse of load_corpus: reproduces document order, turn order, speakers,
// texts and labels exactly. Provenance is runtime metadata and is not part
// of the file format.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string corpus_to_jsonl(const Corpus& corpus);

// Exactly the patient turns, original order and indices preserved.
std::vector<SpeechTurn> extract_patient_turns(const Transcript& transcript);

// Document level counts documents per label; turn level counts patient
// turns per label (each turn inherits its document label).
ClassDistribution corpus_stats(const Corpus& corpus, StatsLevel level);

// Patient-turn word counts bucketed per label. `cuts` are strictly
// increasing positive boundaries; bins are [0,c0), [c0,c1), ..., [ck-1,inf).
struct TurnLengthHistogram {
  std::vector<std::int64_t> cuts;
  std::array<std::vector<std::int64_t>, kNumLabels> counts;

  std::size_t bin_count() const { return cuts.size() + 1; }
  std::string bin_name(std::size_t bin) const;
};

TurnLengthHistogram turn_length_histogram(const Corpus& corpus,
                                          std::vector<std::int64_t> cuts);

}  // namespace attachnlp
