#include "attachnlp/instances.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "attachnlp/errors.hpp"
#include "attachnlp/util.hpp"

namespace attachnlp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> chunk_by_min_length(
    std::span<const std::int64_t> turn_word_counts, const MinLengthConfig& cfg) {
  if (cfg.min_length < 0) throw InvalidConfig("min_length must be non-negative");

  std::vector<std::pair<std::size_t, std::size_t>> chunks;
  const std::size_t n = turn_word_counts.size();
  std::size_t begin = 0;
  while (begin < n) {
    std::size_t end = begin + 1;
    std::int64_t words = turn_word_counts[begin];
    while (words < cfg.min_length && end < n) {
      words += turn_word_counts[end];
      ++end;
    }
    if (words >= cfg.min_length) {
      chunks.emplace_back(begin, end);
    } else if (end - begin >= 2 && cfg.keep_trailing_multi_turn) {
      chunks.emplace_back(begin, end);
    }
    begin = end;
  }
  return chunks;
}

std::vector<Instance> build_instances(const Transcript& transcript,
                                      const MinLengthConfig& cfg) {
  if (!transcript.label) {
    throw UnlabeledDocument("document \"" + transcript.doc_id +
                            "\" has no label; instances inherit the document label");
  }
  const std::vector<SpeechTurn> patient_turns = extract_patient_turns(transcript);
  std::vector<std::int64_t> counts;
  counts.reserve(patient_turns.size());
  for (const SpeechTurn& turn : patient_turns) counts.push_back(word_count(turn.text));

  std::vector<Instance> out;
  for (const auto& [begin, end] : chunk_by_min_length(counts, cfg)) {
    Instance instance;
    instance.doc_id = transcript.doc_id;
    instance.label = *transcript.label;
    std::string text;
    for (std::size_t i = begin; i < end; ++i) {
      if (i > begin) text += ' ';
      text += patient_turns[i].text;
      instance.source_turn_indices.push_back(patient_turns[i].index);
    }
    instance.text = std::move(text);
    instance.word_count = word_count(instance.text);
    instance.instance_id =
        transcript.doc_id + ":" + std::to_string(instance.source_turn_indices.front());
    out.push_back(std::move(instance));
  }
  return out;
}

CorpusInstances build_corpus_instances(const Corpus& corpus, const MinLengthConfig& cfg) {
  CorpusInstances result;
  for (const Transcript& doc : corpus.documents) {
    std::vector<Instance> doc_instances = build_instances(doc, cfg);
    for (Instance& instance : doc_instances) {
      ++result.distribution.counts[label_index(instance.label)];
      result.instances.push_back(std::move(instance));
    }
  }
  return result;
}

std::string instances_to_jsonl(std::span<const Instance> instances) {
  std::ostringstream out;
  for (const Instance& instance : instances) {
    ordered_json record;
    record["instance_id"] = instance.instance_id;
    record["doc_id"] = instance.doc_id;
    record["label"] = std::string(label_name(instance.label));
    record["word_count"] = instance.word_count;
    record["source_turn_indices"] = instance.source_turn_indices;
    record["text"] = instance.text;
    out << record.dump() << "\n";
  }
  return out.str();
}

void save_instances(std::span<const Instance> instances, const std::filesystem::path& path) {
  write_text_file(path, instances_to_jsonl(instances));
}

std::vector<Instance> load_instances(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open instance file: " + path.string());

  std::vector<Instance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record = json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      throw MalformedRecord("line " + std::to_string(line_no) + ": invalid JSON");
    }
    try {
      Instance instance;
      instance.instance_id = record.at("instance_id").get<std::string>();
      instance.doc_id = record.at("doc_id").get<std::string>();
      const std::string raw_label = record.at("label").get<std::string>();
      const auto label = parse_label(raw_label);
      if (!label) {
        throw MalformedRecord("line " + std::to_string(line_no) + ": unknown label \"" +
                              raw_label + "\"");
      }
      instance.label = *label;
      instance.word_count = record.at("word_count").get<std::int64_t>();
      instance.source_turn_indices = record.at("source_turn_indices").get<std::vector<int>>();
      instance.text = record.at("text").get<std::string>();
      out.push_back(std::move(instance));
    } catch (const json::exception& e) {
      throw MalformedRecord("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ClassDistribution instance_distribution(std::span<const Instance> instances) {
  ClassDistribution dist;
  for (const Instance& instance : instances) ++dist.counts[label_index(instance.label)];
  return dist;
}

}  // namespace attachnlp
