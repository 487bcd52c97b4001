#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace attachnlp {

// Minimal named-tensor container for backend weights. Little-endian
// float32, format: "ATW1", u64 tensor count, then per tensor a length-
// prefixed name, u32 rank, i64 dims and the raw data.
struct NamedTensor {
  std::string name;
  std::vector<std::int64_t> dims;
  std::vector<float> data;
};

void write_tensor_file(const std::filesystem::path& path,
                       std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path);

}  // namespace attachnlp
