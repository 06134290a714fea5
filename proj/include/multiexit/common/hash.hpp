#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace multiexit {

// FNV-1a, 64-bit. Used for parameter-buffer freezing checks and config
// fingerprints; not cryptographic.
class Fnv1a {
 public:
  void update(const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= static_cast<std::uint64_t>(p[i]);
      state_ *= 0x100000001b3ull;
    }
  }
  void update(const std::string& s) { update(s.data(), s.size()); }
  void update(const std::vector<double>& v) { update(v.data(), v.size() * sizeof(double)); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

inline std::uint64_t hash_bytes(const void* bytes, std::size_t n) {
  Fnv1a h;
  h.update(bytes, n);
  return h.digest();
}

inline std::uint64_t hash_string(const std::string& s) { return hash_bytes(s.data(), s.size()); }

std::string hash_hex(std::uint64_t h);

}  // namespace multiexit
