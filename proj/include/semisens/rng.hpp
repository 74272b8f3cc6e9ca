// Copyright 2026 The Semisens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SEMISENS_RNG_HPP_
#define SEMISENS_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string>
#include <vector>

namespace semisens {

// Named sub-streams. Every random decision in a run is drawn from a stream
// keyed by (seed, stream id, indices...), so results do not depend on
// evaluation order or parallelism.
enum class Stream : std::uint64_t {
  kSynthetic = 1,
  kRandomizedResponse = 2,
  kNoise = 3,
  kPoisson = 4,
  kShuffle = 5,
  kInit = 6,
  kUserCap = 7,
  kSplit = 8,
  kSweepRow = 9,
};

namespace internal {

// SplitMix64 finalizer (Steele et al.).
constexpr std::uint64_t Mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace internal

// Counter-based generator: a SplitMix64 sequence whose key is derived by
// hashing a seed together with a stream path. Cheap to construct, so callers
// make a fresh one per (step, user, row, ...) instead of sharing state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : state_(key) {}

  static CounterRng Keyed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> path) {
    std::uint64_t key = internal::Mix64(seed);
    for (std::uint64_t p : path) {
      key = internal::Mix64(key ^ internal::Mix64(p));
    }
    return CounterRng(key);
  }

  static CounterRng Keyed(std::uint64_t seed, Stream stream,
                          std::initializer_list<std::uint64_t> path = {}) {
    std::uint64_t key = internal::Mix64(seed);
    key = internal::Mix64(key ^ internal::Mix64(static_cast<std::uint64_t>(stream)));
    for (std::uint64_t p : path) {
      key = internal::Mix64(key ^ internal::Mix64(p));
    }
    return CounterRng(key);
  }

  std::uint64_t NextU64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  // Uniform in [0, 1), 53 random bits.
  double NextDouble() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [0, n). Rejection sampling keeps the draw unbiased.
  std::uint64_t NextBounded(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = NextU64();
    while (v >= limit) v = NextU64();
    return v % n;
  }

  // Standard normal via Box-Muller; the second draw of each pair is cached.
  double NextGaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // u1 in (0, 1] so the log is finite.
    const double u1 = 1.0 - NextDouble();
    const double u2 = NextDouble();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// In-place Fisher-Yates shuffle. Implemented here (rather than std::shuffle)
// because the standard algorithm is implementation-defined and runs must be
// reproducible from seeds alone.
template <typename T>
void FisherYatesShuffle(std::vector<T>& items, CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.NextBounded(i));
    std::swap(items[i - 1], items[j]);
  }
}

// Stable 64-bit FNV-1a. Used for hashing categorical tokens so vocabularies
// are reproducible across platforms and standard library versions.
inline std::uint64_t Fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace semisens

#endif  // SEMISENS_RNG_HPP_
