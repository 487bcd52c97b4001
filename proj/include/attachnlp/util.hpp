#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace attachnlp {

std::string_view trim(std::string_view text);

std::string to_lower(std::string_view text);

// Whitespace-delimited tokens (views into the argument).
std::vector<std::string_view> split_whitespace(std::string_view text);

// Number of maximal non-whitespace runs. This is the project-wide word
// definition used for instance thresholds, stats and histograms alike.
std::int64_t word_count(std::string_view text);

// FNV-1a, used for data fingerprints in run manifests and for hashing
// tokens into fixed-size feature spaces.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

nlohmann::json load_json_file(const std::filesystem::path& path);
void save_json_file(const std::filesystem::path& path, const nlohmann::ordered_json& value);

}  // namespace attachnlp
