#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

namespace ertn {

/// Incremental FNV-1a 64-bit hash; used for file checksums and the
/// content-addressed oracle cache.
class Fnv1a64 {
 public:
  void update(std::span<const unsigned char> bytes) {
    for (unsigned char b : bytes) {
      state_ ^= static_cast<std::uint64_t>(b);
      state_ *= 0x100000001b3ull;
    }
  }
  void update(std::string_view s) {
    update(std::span<const unsigned char>(
        reinterpret_cast<const unsigned char*>(s.data()), s.size()));
  }
  template <typename T>
  void update_pod(const T& value) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    update(std::span<const unsigned char>(buf, sizeof(T)));
  }
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

std::string to_hex(std::uint64_t v);

}  // namespace ertn
