#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "attachnlp/modeling.hpp"

namespace attachnlp {

// Outcome of the k-model majority vote for one instance. `tie_broken` is
// set whenever two or more labels shared the maximal vote count.
struct VoteRecord {
  std::string instance_id;
  std::vector<AttachmentLabel> votes;                 // one per model, input order
  std::array<double, kNumLabels> probability_sums{};  // summed across models
  AttachmentLabel winner = AttachmentLabel::Avoidant;
  bool tie_broken = false;
};

// Plurality vote across models. Vote-count ties break by the greatest
// summed predicted probability over the tied labels; residual exact ties
// break by the fixed label order. Model order never affects winners.
std::vector<VoteRecord> majority_vote(
    const std::vector<std::vector<Prediction>>& predictions_per_model);

// Vote report JSONL mirroring VoteRecord.
std::string votes_to_jsonl(std::span<const VoteRecord> records);
void save_votes(std::span<const VoteRecord> records, const std::filesystem::path& path);
std::vector<VoteRecord> load_votes(const std::filesystem::path& path);

}  // namespace attachnlp
