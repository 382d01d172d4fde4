#pragma once

// Counter-based seeding: stream (root, key, counter) is a pure function of its
// three coordinates, so results never depend on execution order.

#include <cstdint>
#include <random>
#include <string_view>

namespace ifeatt::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a; stable across platforms, unlike std::hash.
inline std::uint64_t hash_key(std::string_view key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::mt19937_64 substream(std::uint64_t root, std::uint64_t key, std::uint64_t counter) {
  const std::uint64_t a = splitmix64(root);
  const std::uint64_t b = splitmix64(a ^ key);
  const std::uint64_t c = splitmix64(b ^ splitmix64(counter));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace ifeatt::rng
