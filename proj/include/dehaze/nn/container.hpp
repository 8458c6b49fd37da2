#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dhz::nn {

// Binary tensor container shared by weight files and dataset records.
//
//   "DHZW"            4 bytes magic
//   version           u32
//   record count      u32
//   per record:
//     name length     u32, followed by that many bytes (no terminator)
//     dim count       u32
//     dims            u32 each
//     payload         prod(dims) little-endian f32
//
// All integers are little-endian.

inline constexpr char kContainerMagic[4] = {'D', 'H', 'Z', 'W'};
inline constexpr std::uint32_t kContainerVersion = 1;

struct TensorRecord {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  bool operator==(const TensorRecord&) const = default;
};

std::vector<std::uint8_t> encode_container(const std::vector<TensorRecord>& records);
std::vector<TensorRecord> decode_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::filesystem::path& path, const std::vector<TensorRecord>& records);
std::vector<TensorRecord> read_container(const std::filesystem::path& path);

/// Finds a record by name; throws IoError when absent.
const TensorRecord& find_record(const std::vector<TensorRecord>& records, const std::string& name);

}  // namespace dhz::nn
