#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>

namespace spider {

/// Seeded random source used for every stochastic step in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The distribution helpers below are written out by hand instead of
/// using <random> distributions, whose algorithms are implementation-defined,
/// so that a given seed yields the same numbers on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  /// Unbiased integer in [0, n) by rejection. n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal via the Marsaglia polar method.
  double normal();

  /// Standard normal conditioned on [-bound, bound].
  double truncated_normal(double bound);

  template <typename T>
  void shuffle(std::span<T> items) {
    // Fisher-Yates, descending.
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// Textual engine state (the standard stream representation).
  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  bool operator==(const Rng& other) const {
    return engine_ == other.engine_ && has_spare_ == other.has_spare_ &&
           (!has_spare_ || spare_ == other.spare_);
  }

 private:
  std::mt19937_64 engine_;
  // The polar method yields normals in pairs; the second one is cached.
  bool has_spare_ = false;
  double spare_ = 0.0;

};

}  // namespace spider
