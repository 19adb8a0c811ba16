#pragma once

// Seeded, platform-independent randomness. std::uniform_int_distribution and
// std::shuffle are implementation-defined, so bounded draws and shuffles are
// spelled out here on top of the (fully specified) mt19937_64 engine.

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace quadclass {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  // Independent stream derived from this seed and a stream id.
  static Rng stream(std::uint64_t seed, std::uint64_t id) { return Rng(splitmix64(seed) ^ splitmix64(~id)); }

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n), n > 0, by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace quadclass
