#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace premir {

using Rng = std::mt19937_64;

// Every random stream in the project is derived from one master seed:
//   seed(stream, index) = splitmix64(splitmix64(master ^ stream) + index)
// so that folds, shuffles and samplers never share a generator.
namespace stream {
inline constexpr std::uint64_t kWeightInit = 0x1001;
inline constexpr std::uint64_t kMinibatch = 0x1002;
inline constexpr std::uint64_t kDropout = 0x1003;
inline constexpr std::uint64_t kRbm = 0x1004;
inline constexpr std::uint64_t kEnsemble = 0x2001;
inline constexpr std::uint64_t kShuffle = 0x2002;
inline constexpr std::uint64_t kKmeans = 0x3001;
inline constexpr std::uint64_t kUndersample = 0x3002;
inline constexpr std::uint64_t kFolds = 0x3003;
inline constexpr std::uint64_t kSynth = 0x4001;
inline constexpr std::uint64_t kFold = 0x4002;
inline constexpr std::uint64_t kRepeat = 0x4003;
inline constexpr std::uint64_t kFinalFit = 0x4004;
}  // namespace stream

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_id,
                                    std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ stream_id) + index);
}

// FNV-1a; used to key per-sequence streams on content rather than position.
constexpr std::uint64_t content_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n); n > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
}

}  // namespace premir
