#pragma once

#include <cstdint>
#include <random>

namespace fedspd {

// splitmix64 finalizer. Used to derive well-separated engine seeds from
// small structured tuples like (seed, round, client_id).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic engine for the stream identified by (seed, a, b, c).
// Streams with distinct tags never share state, so per-client work can be
// scheduled in any order without changing results.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t a = 0,
                                   std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ splitmix64(a));
  s = splitmix64(s ^ splitmix64(b));
  s = splitmix64(s ^ splitmix64(c));
  return std::mt19937_64(s);
}

// Stream tags for the experiment pipeline.
namespace stream {
constexpr std::uint64_t kData = 0x01;
constexpr std::uint64_t kPartition = 0x02;
constexpr std::uint64_t kSplit = 0x03;
constexpr std::uint64_t kInit = 0x04;
constexpr std::uint64_t kServer = 0x05;
constexpr std::uint64_t kClient = 0x06;
}  // namespace stream

}  // namespace fedspd
