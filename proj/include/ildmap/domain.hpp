#pragma once

// Shared primitives: angles, sign convention, and reproducible random streams.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ildmap {

inline constexpr double kMaxAngle = 90.0;

/// Sign with the tie-break sign(0) = +1. Non-finite input throws.
inline int sign(double x) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument("sign: non-finite input");
  }
  return x < 0.0 ? -1 : 1;
}

inline double deg_to_rad(double deg) { return deg * (std::numbers::pi / 180.0); }

/// Azimuth in degrees. Values built through clamp() lie in [-90, +90];
/// raw arithmetic on the underlying double may leave that range.
class AngleDeg {
 public:
  constexpr AngleDeg() = default;
  constexpr explicit AngleDeg(double value) : value_(value) {}

  static AngleDeg clamp(double value) {
    if (std::isnan(value)) {
      throw std::invalid_argument("AngleDeg::clamp: NaN");
    }
    return AngleDeg(value < -kMaxAngle ? -kMaxAngle : (value > kMaxAngle ? kMaxAngle : value));
  }

  constexpr double value() const { return value_; }
  constexpr bool in_range() const { return value_ >= -kMaxAngle && value_ <= kMaxAngle; }

  friend constexpr bool operator==(AngleDeg, AngleDeg) = default;

 private:
  double value_ = 0.0;
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/**
 * \brief xoshiro256** generator seeded through splitmix64.
 *
 * Integer output is fully specified, so a seed produces the same stream on any
 * platform. Gaussian draws use the Marsaglia polar method, which only needs
 * sqrt (correctly rounded) and log.
 *
 * A stream is single-owner. Use substream() instead of sharing.
 */
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) {
      word = detail::splitmix64(sm);
    }
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = detail::rotl(state_[3], 45);
    return result;
  }

  std::uint64_t seed() const { return seed_; }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); Lemire's nearly-divisionless rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) {
      throw std::invalid_argument("RngStream::below: n must be positive");
    }
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return mean + stddev * u * scale;
  }

  /// Independent stream determined by (seed, index).
  RngStream substream(std::uint64_t index) const {
    std::uint64_t sm = seed_ ^ 0x6a09e667f3bcc909ULL;
    const std::uint64_t a = detail::splitmix64(sm);
    std::uint64_t mixed = a ^ (index * 0xd1b54a32d192ed03ULL + 0x9e3779b97f4a7c15ULL);
    return RngStream(detail::splitmix64(mixed));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t state_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline RngStream make_substream(const RngStream& master, std::uint64_t index) {
  return master.substream(index);
}

}  // namespace ildmap
