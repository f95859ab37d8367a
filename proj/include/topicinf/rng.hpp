#pragma once

// Portable seeded random numbers.
//
// Standard library distributions are implementation-defined, so every
// variate used by the library is derived here from the raw 64-bit output
// of xoshiro256** (Blackman & Vigna). Seeds are expanded with SplitMix64
// (increment 0x9E3779B97F4A7C15, finalizer multipliers 0xBF58476D1CE4E5B9
// and 0x94D049BB133111EB). Sub-streams are keyed by an FNV-1a hash of an
// operation name plus integer indices, so results do not depend on call
// order or thread count.

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

namespace topicinf {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Seed of the sub-stream identified by (seed, name, indices...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view name,
                                 std::initializer_list<std::uint64_t> indices = {}) noexcept {
  std::uint64_t state = seed ^ fnv1a64(name);
  std::uint64_t out = splitmix64(state);
  for (std::uint64_t idx : indices) {
    state ^= idx + 0x632BE59BD9B4E019ULL + (out << 6) + (out >> 2);
    out = splitmix64(state);
  }
  return out;
}

namespace detail {
__extension__ typedef unsigned __int128 uint128;
}  // namespace detail

/// xoshiro256** 1.0. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
  }

  Rng(std::uint64_t seed, std::string_view stream,
      std::initializer_list<std::uint64_t> indices = {}) noexcept
      : Rng(derive_seed(seed, stream, indices)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe to take the logarithm of.
  double uniform_pos() noexcept { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) by Lemire's nearly-divisionless method.
  std::uint64_t below(std::uint64_t bound) noexcept {
    detail::uint128 m = static_cast<detail::uint128>((*this)()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<detail::uint128>((*this)()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool coin() noexcept { return ((*this)() >> 63) != 0; }

  double exponential() noexcept { return -std::log(uniform_pos()); }

  /// Standard normal by the Marsaglia polar method (no cached spare).
  double normal() noexcept {
    for (;;) {
      const double u = 2.0 * uniform() - 1.0;
      const double v = 2.0 * uniform() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  /// log of a Gamma(shape, 1) variate; Marsaglia-Tsang with the
  /// U^(1/shape) boost for shape < 1, kept in log space to avoid underflow.
  double log_gamma_variate(double shape) noexcept {
    double log_boost = 0.0;
    if (shape < 1.0) {
      log_boost = std::log(uniform_pos()) / shape;
      shape += 1.0;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double z = 0.0;
      double v = 0.0;
      do {
        z = normal();
        v = 1.0 + c * z;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform_pos();
      if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) {
        return std::log(d * v) + log_boost;
      }
    }
  }

  double gamma(double shape) noexcept { return std::exp(log_gamma_variate(shape)); }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> s_{};
};

/// Draws `count` distinct values from [0, n) in sampling order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

/// Index of the cumulative-weight bucket containing u * total.
inline std::size_t sample_cumulative(std::span<const double> cumulative, double u) noexcept {
  const double target = u * cumulative.back();
  std::size_t lo = 0;
  std::size_t hi = cumulative.size() - 1;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (cumulative[mid] > target) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

}  // namespace topicinf
