#include "attachnlp/tensor_io.hpp"

#include <cstring>
#include <fstream>

#include "attachnlp/errors.hpp"

namespace attachnlp {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'W', '1'};

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw RuntimeFailure("truncated tensor file");
  return value;
}

}  // namespace

void write_tensor_file(const std::filesystem::path& path,
                       std::span<const NamedTensor> tensors) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write tensor file: " + path.string());

  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint64_t>(out, tensors.size());
  for (const NamedTensor& tensor : tensors) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.name.size()));
    out.write(tensor.name.data(), static_cast<std::streamsize>(tensor.name.size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dims.size()));
    std::int64_t expected = 1;
    for (std::int64_t dim : tensor.dims) {
      write_pod<std::int64_t>(out, dim);
      expected *= dim;
    }
    if (expected != static_cast<std::int64_t>(tensor.data.size())) {
      throw RuntimeFailure("tensor \"" + tensor.name + "\" dims do not match data size");
    }
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
  }
  if (!out) throw RuntimeFailure("short write: " + path.string());
}

std::vector<NamedTensor> read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open tensor file: " + path.string());

  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw RuntimeFailure("bad tensor file magic: " + path.string());
  }
  const std::uint64_t count = read_pod<std::uint64_t>(in);
  std::vector<NamedTensor> tensors;
  tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor tensor;
    const std::uint32_t name_len = read_pod<std::uint32_t>(in);
    tensor.name.resize(name_len);
    in.read(tensor.name.data(), name_len);
    const std::uint32_t rank = read_pod<std::uint32_t>(in);
    std::int64_t total = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      tensor.dims.push_back(read_pod<std::int64_t>(in));
      total *= tensor.dims.back();
    }
    if (total < 0) throw RuntimeFailure("negative tensor size: " + path.string());
    tensor.data.resize(static_cast<std::size_t>(total));
    in.read(reinterpret_cast<char*>(tensor.data.data()),
            static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
    if (!in) throw RuntimeFailure("truncated tensor file: " + path.string());
    tensors.push_back(std::move(tensor));
  }
  return tensors;
}

}  // namespace attachnlp
