#include "rdlda/types.hpp"

#include <array>
#include <set>

namespace rdlda {

void validate_batch(const LabeledBatch& batch) {
  const auto n = batch.features.rows();
  if (n < 2) throw std::invalid_argument("batch needs at least 2 samples");
  if (static_cast<Eigen::Index>(batch.labels.size()) != n)
    throw std::invalid_argument("label count does not match sample count");
  if (batch.class_count < 2)
    throw std::invalid_argument("batch needs at least 2 classes");
  if (!batch.features.allFinite())
    throw std::invalid_argument("batch features contain non-finite values");
  std::set<int> seen;
  for (int y : batch.labels) {
    if (y < 0 || y >= batch.class_count)
      throw std::invalid_argument("label " + std::to_string(y) +
                                  " outside [0, " +
                                  std::to_string(batch.class_count) + ")");
    seen.insert(y);
  }
  if (seen.size() < 2)
    throw std::invalid_argument("batch must contain at least 2 distinct labels");
}

namespace {

// splitmix64
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k)
      c = (c & 1) ? 0xedb88320U ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

}  // namespace

std::uint64_t SeedSplitter::stream(const std::string& purpose) const {
  return mix(root ^ fnv1a(purpose));
}

std::uint64_t SeedSplitter::stream(const std::string& purpose,
                                   std::uint64_t index) const {
  return mix(stream(purpose) + mix(index));
}

std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed) {
  static const auto table = make_crc_table();
  std::uint32_t c = seed ^ 0xffffffffU;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ p[i]) & 0xff] ^ (c >> 8);
  return c ^ 0xffffffffU;
}

}  // namespace rdlda
