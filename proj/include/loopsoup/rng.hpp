#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace loopsoup {

/// Counter-based generator: output i of stream k is mix(k + i * gamma).
///
/// A stream is identified by a 64-bit key derived from (seed, name), so every
/// draw is reproducible from the master seed, the stream name and the draw
/// counter alone. Satisfies UniformRandomBitGenerator so the standard
/// distributions can consume it.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::string_view stream = "main");

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool coin() { return ((*this)() >> 63) != 0; }

  /// Independent stream keyed by this stream's key and `name`.
  Rng substream(std::string_view name) const;
  /// Independent stream keyed by an index (e.g. a sample or worker number).
  Rng substream(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  struct FromKey {};
  Rng(FromKey, std::uint64_t key) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z);
std::uint64_t hash_name(std::string_view name);

}  // namespace loopsoup
