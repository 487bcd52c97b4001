#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "attachnlp/corpus.hpp"

namespace attachnlp {

// Document-level train/test assignment. Doc id lists are kept sorted so
// plans compare and serialize deterministically.
struct SplitPlan {
  std::vector<std::string> train_doc_ids;
  std::vector<std::string> test_doc_ids;
  std::uint64_t seed = 0;
};

struct Fold {
  std::vector<std::string> train_doc_ids;
  std::vector<std::string> eval_doc_ids;
};

// k stratified train/eval draws over the SplitPlan's training documents.
// Folds are independent draws (sub-seed = seed + fold index), not a
// partition; each fold's train and eval sets are disjoint and cover the
// training documents.
struct FoldPlan {
  std::vector<Fold> folds;
  int k = 0;
  double eval_fraction = 0.0;
  std::uint64_t seed = 0;
};

// Largest-remainder apportionment of `total_to_assign` across the three
// labels, proportional to `counts`. Remainder ties break by label order.
std::array<std::int64_t, kNumLabels> largest_remainder_quotas(
    const std::array<std::int64_t, kNumLabels>& counts, std::int64_t total_to_assign);

// Per-label test quotas by largest remainder; documents drawn uniformly
// without replacement within each label. Deterministic per
// (corpus, test_count, seed).
SplitPlan stratified_split(const Corpus& corpus, std::int64_t test_count,
                           std::uint64_t seed);

// k independent stratified eval draws of round(eval_fraction * n) training
// documents each. The corpus supplies document labels for stratification.
FoldPlan make_folds(const Corpus& corpus, const SplitPlan& plan, int k,
                    double eval_fraction, std::uint64_t seed);

bool contains_doc(const std::vector<std::string>& sorted_ids, const std::string& doc_id);

nlohmann::ordered_json split_to_json(const SplitPlan& plan);
SplitPlan split_from_json(const nlohmann::json& value);
nlohmann::ordered_json folds_to_json(const FoldPlan& plan);
FoldPlan folds_from_json(const nlohmann::json& value);

void save_split(const SplitPlan& plan, const std::filesystem::path& path);
SplitPlan load_split(const std::filesystem::path& path);
void save_folds(const FoldPlan& plan, const std::filesystem::path& path);
FoldPlan load_folds(const std::filesystem::path& path);

}  // namespace attachnlp
