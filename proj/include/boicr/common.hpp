#pragma once

#include <stdexcept>
#include <string>

namespace boicr {

/// Throws std::invalid_argument when a caller-facing precondition fails.
inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

/// FNV-1a over a byte range; used for config/dataset fingerprints.
inline uint64_t fnv1a64(const void* data, size_t size, uint64_t state = 0xcbf29ce484222325ull) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < size; ++i) {
    state ^= bytes[i];
    state *= 0x100000001b3ull;
  }
  return state;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t state = 0xcbf29ce484222325ull) {
  return fnv1a64(s.data(), s.size(), state);
}

}  // namespace boicr
