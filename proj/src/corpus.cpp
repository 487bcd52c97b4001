#include "attachnlp/corpus.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "attachnlp/errors.hpp"
#include "attachnlp/util.hpp"

namespace attachnlp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::optional<Speaker> parse_speaker(std::string_view raw) {
  const std::string lowered = to_lower(raw);
  if (lowered == "patient" || lowered == "client") return Speaker::Patient;
  if (lowered == "therapist" || lowered == "counselor" || lowered == "interviewer") {
    return Speaker::Therapist;
  }
  return std::nullopt;
}

std::string at_line(std::size_t line_no) { return "line " + std::to_string(line_no); }

Transcript parse_document(const json& record, std::size_t line_no, bool require_labels) {
  if (!record.is_object()) {
    throw MalformedRecord(at_line(line_no) + ": document record is not a JSON object");
  }
  Transcript doc;

  const auto id_it = record.find("doc_id");
  if (id_it == record.end() || !id_it->is_string() || id_it->get<std::string>().empty()) {
    throw MalformedRecord(at_line(line_no) + ": missing or empty \"doc_id\"");
  }
  doc.doc_id = id_it->get<std::string>();

  const auto label_it = record.find("label");
  if (label_it != record.end() && !label_it->is_null()) {
    if (!label_it->is_string()) {
      throw MalformedRecord(at_line(line_no) + ": \"label\" must be a string or null");
    }
    const std::string raw = label_it->get<std::string>();
    const auto label = parse_label(raw);
    if (!label) {
      throw MalformedRecord(at_line(line_no) + ": unknown label \"" + raw + "\"");
    }
    doc.label = *label;
  }
  if (require_labels && !doc.label) {
    throw MissingLabel(at_line(line_no) + ": document \"" + doc.doc_id + "\" has no label");
  }

  const auto turns_it = record.find("turns");
  if (turns_it == record.end() || !turns_it->is_array()) {
    throw MalformedRecord(at_line(line_no) + ": missing \"turns\" array");
  }
  int index = 0;
  for (const json& turn_json : *turns_it) {
    if (!turn_json.is_object()) {
      throw MalformedRecord(at_line(line_no) + ", turn " + std::to_string(index) +
                            ": turn is not a JSON object");
    }
    const auto speaker_it = turn_json.find("speaker");
    if (speaker_it == turn_json.end() || !speaker_it->is_string()) {
      throw MalformedRecord(at_line(line_no) + ", turn " + std::to_string(index) +
                            ": missing \"speaker\"");
    }
    const std::string raw_speaker = speaker_it->get<std::string>();
    const auto speaker = parse_speaker(raw_speaker);
    if (!speaker) {
      throw UnknownSpeaker(at_line(line_no) + ", turn " + std::to_string(index) +
                           ": unknown speaker \"" + raw_speaker + "\"");
    }
    const auto text_it = turn_json.find("text");
    if (text_it == turn_json.end() || !text_it->is_string()) {
      throw MalformedRecord(at_line(line_no) + ", turn " + std::to_string(index) +
                            ": missing \"text\"");
    }
    std::string text = text_it->get<std::string>();
    if (trim(text).empty()) {
      throw MalformedRecord(at_line(line_no) + ", turn " + std::to_string(index) +
                            ": text is empty after whitespace trimming");
    }
    doc.turns.push_back(SpeechTurn{doc.doc_id, index, *speaker, std::move(text)});
    ++index;
  }
  return doc;
}

}  // namespace

std::string_view speaker_name(Speaker speaker) {
  return speaker == Speaker::Patient ? "patient" : "therapist";
}

std::array<double, kNumLabels> ClassDistribution::proportions() const {
  std::array<double, kNumLabels> out{};
  const std::int64_t n = total();
  if (n == 0) return out;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    out[i] = static_cast<double>(counts[i]) / static_cast<double>(n);
  }
  return out;
}

Corpus load_corpus(const std::filesystem::path& path, bool require_labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open corpus file: " + path.string());

  Corpus corpus;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded()) {
      throw MalformedRecord(at_line(line_no) + ": invalid JSON");
    }
    Transcript doc = parse_document(record, line_no, require_labels);
    if (!seen_ids.insert(doc.doc_id).second) {
      throw DuplicateDocId(at_line(line_no) + ": duplicate doc_id \"" + doc.doc_id + "\"");
    }
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

std::string corpus_to_jsonl(const Corpus& corpus) {
  std::ostringstream out;
  for (const Transcript& doc : corpus.documents) {
    ordered_json record;
    record["doc_id"] = doc.doc_id;
    if (doc.label) {
      record["label"] = std::string(label_name(*doc.label));
    } else {
      record["label"] = nullptr;
    }
    ordered_json turns = ordered_json::array();
    for (const SpeechTurn& turn : doc.turns) {
      turns.push_back({{"speaker", std::string(speaker_name(turn.speaker))},
                       {"text", turn.text}});
    }
    record["turns"] = std::move(turns);
    out << record.dump() << "\n";
  }
  return out.str();
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_text_file(path, corpus_to_jsonl(corpus));
}

std::vector<SpeechTurn> extract_patient_turns(const Transcript& transcript) {
  std::vector<SpeechTurn> out;
  for (const SpeechTurn& turn : transcript.turns) {
    if (turn.speaker == Speaker::Patient) out.push_back(turn);
  }
  return out;
}

ClassDistribution corpus_stats(const Corpus& corpus, StatsLevel level) {
  ClassDistribution dist;
  for (const Transcript& doc : corpus.documents) {
    if (!doc.label) {
      throw MissingLabel("document \"" + doc.doc_id + "\" has no label");
    }
    const std::size_t idx = label_index(*doc.label);
    if (level == StatsLevel::Document) {
      ++dist.counts[idx];
    } else {
      for (const SpeechTurn& turn : doc.turns) {
        if (turn.speaker == Speaker::Patient) ++dist.counts[idx];
      }
    }
  }
  return dist;
}

std::string TurnLengthHistogram::bin_name(std::size_t bin) const {
  const std::int64_t lo = bin == 0 ? 0 : cuts[bin - 1];
  if (bin == cuts.size()) return std::to_string(lo) + "+";
  return "[" + std::to_string(lo) + "," + std::to_string(cuts[bin]) + ")";
}

TurnLengthHistogram turn_length_histogram(const Corpus& corpus,
                                          std::vector<std::int64_t> cuts) {
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (cuts[i] <= 0 || (i > 0 && cuts[i] <= cuts[i - 1])) {
      throw NonMonotonicBins("bin boundaries must be positive and strictly increasing");
    }
  }
  TurnLengthHistogram hist;
  hist.cuts = std::move(cuts);
  for (auto& per_label : hist.counts) per_label.assign(hist.bin_count(), 0);

  for (const Transcript& doc : corpus.documents) {
    if (!doc.label) {
      throw MissingLabel("document \"" + doc.doc_id + "\" has no label");
    }
    const std::size_t label = label_index(*doc.label);
    for (const SpeechTurn& turn : doc.turns) {
      if (turn.speaker != Speaker::Patient) continue;
      const std::int64_t words = word_count(turn.text);
      std::size_t bin = 0;
      while (bin < hist.cuts.size() && words >= hist.cuts[bin]) ++bin;
      ++hist.counts[label][bin];
    }
  }
  return hist;
}

}  // namespace attachnlp
