#include "attachnlp/ensemble.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "attachnlp/errors.hpp"
#include "attachnlp/util.hpp"

namespace attachnlp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

}  // namespace

std::vector<VoteRecord> majority_vote(
    const std::vector<std::vector<Prediction>>& predictions_per_model) {
  if (predictions_per_model.empty()) {
    throw EmptyInput("majority vote needs at least one model");
  }
  const std::vector<Prediction>& reference = predictions_per_model.front();

  std::vector<std::unordered_map<std::string_view, const Prediction*>> by_id;
  for (std::size_t m = 1; m < predictions_per_model.size(); ++m) {
    const auto& model = predictions_per_model[m];
    if (model.size() != reference.size()) {
      throw InstanceSetMismatch("model " + std::to_string(m) + " predicts " +
                                std::to_string(model.size()) + " instances, model 0 predicts " +
                                std::to_string(reference.size()));
    }
    std::unordered_map<std::string_view, const Prediction*> index;
    index.reserve(model.size());
    for (const Prediction& prediction : model) {
      if (!index.emplace(prediction.instance_id, &prediction).second) {
        throw InstanceSetMismatch("model " + std::to_string(m) +
                                  " predicts instance \"" + prediction.instance_id +
                                  "\" more than once");
      }
    }
    by_id.push_back(std::move(index));
  }

  std::unordered_map<std::string_view, bool> seen_reference;
  seen_reference.reserve(reference.size());
  for (const Prediction& prediction : reference) {
    if (!seen_reference.emplace(prediction.instance_id, true).second) {
      throw InstanceSetMismatch("model 0 predicts instance \"" + prediction.instance_id +
                                "\" more than once");
    }
  }

  std::vector<VoteRecord> records;
  records.reserve(reference.size());
  for (const Prediction& first : reference) {
    VoteRecord record;
    record.instance_id = first.instance_id;

    std::array<int, kNumLabels> vote_counts{};
    auto add_vote = [&](const Prediction& prediction) {
      record.votes.push_back(prediction.predicted);
      ++vote_counts[label_index(prediction.predicted)];
      for (std::size_t c = 0; c < kNumLabels; ++c) {
        record.probability_sums[c] += prediction.probabilities[c];
      }
    };
    add_vote(first);
    for (std::size_t m = 0; m < by_id.size(); ++m) {
      const auto it = by_id[m].find(first.instance_id);
      if (it == by_id[m].end()) {
        throw InstanceSetMismatch("model " + std::to_string(m + 1) +
                                  " is missing instance \"" + first.instance_id + "\"");
      }
      add_vote(*it->second);
    }

    const int top = *std::max_element(vote_counts.begin(), vote_counts.end());
    int tied = 0;
    for (int count : vote_counts) tied += (count == top);
    record.tie_broken = tied >= 2;

    std::size_t winner = kNumLabels;
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      if (vote_counts[c] != top) continue;
      if (winner == kNumLabels ||
          record.probability_sums[c] > record.probability_sums[winner]) {
        winner = c;
      }
    }
    record.winner = kLabelOrder[winner];
    records.push_back(std::move(record));
  }
  return records;
}

std::string votes_to_jsonl(std::span<const VoteRecord> records) {
  std::ostringstream out;
  for (const VoteRecord& record : records) {
    ordered_json line;
    line["instance_id"] = record.instance_id;
    ordered_json votes = ordered_json::array();
    for (AttachmentLabel vote : record.votes) votes.push_back(std::string(label_name(vote)));
    line["votes"] = std::move(votes);
    ordered_json sums;
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      sums[std::string(label_name(kLabelOrder[c]))] = record.probability_sums[c];
    }
    line["probability_sums"] = std::move(sums);
    line["winner"] = std::string(label_name(record.winner));
    line["tie_broken"] = record.tie_broken;
    out << line.dump() << "\n";
  }
  return out.str();
}

void save_votes(std::span<const VoteRecord> records, const std::filesystem::path& path) {
  write_text_file(path, votes_to_jsonl(records));
}

std::vector<VoteRecord> load_votes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open vote file: " + path.string());

  std::vector<VoteRecord> out;
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
      VoteRecord vote;
      vote.instance_id = record.at("instance_id").get<std::string>();
      for (const json& raw : record.at("votes")) {
        const auto label = parse_label(raw.get<std::string>());
        if (!label) {
          throw MalformedRecord("line " + std::to_string(line_no) + ": unknown vote label");
        }
        vote.votes.push_back(*label);
      }
      const json& sums = record.at("probability_sums");
      for (std::size_t c = 0; c < kNumLabels; ++c) {
        vote.probability_sums[c] = sums.at(std::string(label_name(kLabelOrder[c]))).get<double>();
      }
      const auto winner = parse_label(record.at("winner").get<std::string>());
      if (!winner) {
        throw MalformedRecord("line " + std::to_string(line_no) + ": unknown winner label");
      }
      vote.winner = *winner;
      vote.tie_broken = record.at("tie_broken").get<bool>();
      out.push_back(std::move(vote));
    } catch (const json::exception& e) {
      throw MalformedRecord("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace attachnlp
