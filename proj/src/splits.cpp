#include "attachnlp/splits.hpp"

#include <algorithm>
#include <cmath>

#include "attachnlp/errors.hpp"
#include "attachnlp/rng.hpp"
#include "attachnlp/util.hpp"

namespace attachnlp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Doc ids per label, in corpus order; throws when a document is unlabeled.
std::array<std::vector<std::string>, kNumLabels> ids_by_label(
    const Corpus& corpus, const std::vector<std::string>* restrict_to_sorted) {
  std::array<std::vector<std::string>, kNumLabels> out;
  for (const Transcript& doc : corpus.documents) {
    if (restrict_to_sorted && !contains_doc(*restrict_to_sorted, doc.doc_id)) continue;
    if (!doc.label) {
      throw MissingLabel("document \"" + doc.doc_id + "\" has no label");
    }
    out[label_index(*doc.label)].push_back(doc.doc_id);
  }
  return out;
}

}  // namespace

bool contains_doc(const std::vector<std::string>& sorted_ids, const std::string& doc_id) {
  return std::binary_search(sorted_ids.begin(), sorted_ids.end(), doc_id);
}

std::array<std::int64_t, kNumLabels> largest_remainder_quotas(
    const std::array<std::int64_t, kNumLabels>& counts, std::int64_t total_to_assign) {
  const std::int64_t total = counts[0] + counts[1] + counts[2];
  if (total <= 0) throw EmptyInput("cannot apportion over zero items");
  if (total_to_assign < 0 || total_to_assign > total) {
    throw InvalidConfig("apportionment target out of range");
  }

  std::array<std::int64_t, kNumLabels> quotas{};
  std::array<std::int64_t, kNumLabels> remainders{};
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    const std::int64_t numerator = total_to_assign * counts[i];
    quotas[i] = numerator / total;
    remainders[i] = numerator % total;
    assigned += quotas[i];
  }

  std::array<std::size_t, kNumLabels> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainders[a] > remainders[b];
  });
  for (std::size_t i = 0; assigned < total_to_assign; ++i, ++assigned) {
    ++quotas[order[i]];
  }
  return quotas;
}

SplitPlan stratified_split(const Corpus& corpus, std::int64_t test_count,
                           std::uint64_t seed) {
  const std::int64_t n_docs = static_cast<std::int64_t>(corpus.documents.size());
  if (test_count < 0) throw InvalidConfig("test_count must be non-negative");
  if (test_count > n_docs) {
    throw TestCountTooLarge("test_count " + std::to_string(test_count) + " exceeds " +
                            std::to_string(n_docs) + " documents");
  }

  auto per_label = ids_by_label(corpus, nullptr);
  ClassDistribution doc_counts = corpus_stats(corpus, StatsLevel::Document);
  const auto quotas = test_count == 0
                          ? std::array<std::int64_t, kNumLabels>{}
                          : largest_remainder_quotas(doc_counts.counts, test_count);

  SplitPlan plan;
  plan.seed = seed;
  SeededRng rng(seed);
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    auto& ids = per_label[i];
    rng.shuffle(ids);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (j < static_cast<std::size_t>(quotas[i])) {
        plan.test_doc_ids.push_back(std::move(ids[j]));
      } else {
        plan.train_doc_ids.push_back(std::move(ids[j]));
      }
    }
  }
  std::sort(plan.train_doc_ids.begin(), plan.train_doc_ids.end());
  std::sort(plan.test_doc_ids.begin(), plan.test_doc_ids.end());
  return plan;
}

FoldPlan make_folds(const Corpus& corpus, const SplitPlan& plan, int k,
                    double eval_fraction, std::uint64_t seed) {
  if (k < 1) throw InvalidConfig("fold count must be at least 1");
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw InvalidConfig("eval_fraction must be in (0, 1)");
  }

  const auto train_by_label = ids_by_label(corpus, &plan.train_doc_ids);
  std::array<std::int64_t, kNumLabels> label_counts{};
  std::int64_t n_train = 0;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    label_counts[i] = static_cast<std::int64_t>(train_by_label[i].size());
    n_train += label_counts[i];
  }

  const std::int64_t eval_count =
      std::llround(eval_fraction * static_cast<double>(n_train));
  if (eval_count == 0) {
    throw EvalSetEmpty("round(" + std::to_string(eval_fraction) + " * " +
                       std::to_string(n_train) + ") training documents is zero");
  }
  const auto quotas = largest_remainder_quotas(label_counts, eval_count);

  FoldPlan folds;
  folds.k = k;
  folds.eval_fraction = eval_fraction;
  folds.seed = seed;
  for (int fold_idx = 0; fold_idx < k; ++fold_idx) {
    SeededRng rng(seed + static_cast<std::uint64_t>(fold_idx));
    Fold fold;
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      std::vector<std::string> ids = train_by_label[i];
      rng.shuffle(ids);
      for (std::size_t j = 0; j < ids.size(); ++j) {
        if (j < static_cast<std::size_t>(quotas[i])) {
          fold.eval_doc_ids.push_back(std::move(ids[j]));
        } else {
          fold.train_doc_ids.push_back(std::move(ids[j]));
        }
      }
    }
    std::sort(fold.train_doc_ids.begin(), fold.train_doc_ids.end());
    std::sort(fold.eval_doc_ids.begin(), fold.eval_doc_ids.end());
    folds.folds.push_back(std::move(fold));
  }
  return folds;
}

ordered_json split_to_json(const SplitPlan& plan) {
  ordered_json out;
  out["seed"] = plan.seed;
  out["train"] = plan.train_doc_ids;
  out["test"] = plan.test_doc_ids;
  return out;
}

SplitPlan split_from_json(const json& value) {
  SplitPlan plan;
  try {
    plan.seed = value.at("seed").get<std::uint64_t>();
    plan.train_doc_ids = value.at("train").get<std::vector<std::string>>();
    plan.test_doc_ids = value.at("test").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw MalformedRecord(std::string("bad split plan: ") + e.what());
  }
  std::sort(plan.train_doc_ids.begin(), plan.train_doc_ids.end());
  std::sort(plan.test_doc_ids.begin(), plan.test_doc_ids.end());
  return plan;
}

ordered_json folds_to_json(const FoldPlan& plan) {
  ordered_json out;
  out["seed"] = plan.seed;
  out["k"] = plan.k;
  out["eval_fraction"] = plan.eval_fraction;
  ordered_json folds = ordered_json::array();
  for (const Fold& fold : plan.folds) {
    folds.push_back({{"train", fold.train_doc_ids}, {"eval", fold.eval_doc_ids}});
  }
  out["folds"] = std::move(folds);
  return out;
}

FoldPlan folds_from_json(const json& value) {
  FoldPlan plan;
  try {
    plan.seed = value.at("seed").get<std::uint64_t>();
    plan.k = value.at("k").get<int>();
    plan.eval_fraction = value.at("eval_fraction").get<double>();
    for (const json& fold_json : value.at("folds")) {
      Fold fold;
      fold.train_doc_ids = fold_json.at("train").get<std::vector<std::string>>();
      fold.eval_doc_ids = fold_json.at("eval").get<std::vector<std::string>>();
      std::sort(fold.train_doc_ids.begin(), fold.train_doc_ids.end());
      std::sort(fold.eval_doc_ids.begin(), fold.eval_doc_ids.end());
      plan.folds.push_back(std::move(fold));
    }
  } catch (const json::exception& e) {
    throw MalformedRecord(std::string("bad fold plan: ") + e.what());
  }
  return plan;
}

void save_split(const SplitPlan& plan, const std::filesystem::path& path) {
  save_json_file(path, split_to_json(plan));
}

SplitPlan load_split(const std::filesystem::path& path) {
  return split_from_json(load_json_file(path));
}

void save_folds(const FoldPlan& plan, const std::filesystem::path& path) {
  save_json_file(path, folds_to_json(plan));
}

FoldPlan load_folds(const std::filesystem::path& path) {
  return folds_from_json(load_json_file(path));
}

}  // namespace attachnlp
