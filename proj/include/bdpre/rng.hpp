#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace bdpre {

/// SplitMix64 output finalizer (Stafford variant 13).
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// Folds a sequence of words into one key. Order matters.
constexpr std::uint64_t derive_key(std::uint64_t seed) noexcept { return mix64(seed + kGolden); }

template <typename... Rest>
constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t word, Rest... rest) noexcept {
  return derive_key(mix64(seed + kGolden) ^ mix64(word * kGolden + 0x632be59bd9b4e019ULL), rest...);
}

/// Stream purposes. Keeping them distinct guarantees that, e.g., the
/// environment of replica r never shares bits with its clocks.
enum class Purpose : std::uint64_t {
  Site = 1,
  Window = 2,
  Lyapunov = 3,
  Path = 4,
  Walk = 5,
  Branching = 6,
  Clocks = 7,
  Environment = 8,
};

/// Counter-based generator: output k is mix64(key + k * golden). The whole
/// stream is a pure function of the key, so a stream can be recreated from
/// (seed, purpose, index) on any thread.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key) noexcept : key_(key) {}

  template <typename... Words>
  static Rng stream(std::uint64_t seed, Purpose purpose, Words... words) noexcept {
    return Rng(derive_key(seed, static_cast<std::uint64_t>(purpose),
                          static_cast<std::uint64_t>(words)...));
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix64(key_ + (++counter_) * kGolden); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Exponential with the given rate (rate > 0).
  double exponential(double rate) noexcept { return -std::log1p(-uniform()) / rate; }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace bdpre
