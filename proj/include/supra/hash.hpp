#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace supra {

/// Incremental 64-bit FNV-1a. Used for geometry and configuration fingerprints.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void text(std::string_view s) noexcept { bytes(s.data(), s.size()); }
  template <class T>
  void value(const T& v) noexcept {
    bytes(&v, sizeof(T));
  }
  std::uint64_t digest() const noexcept { return state_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
    return buf;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace supra
