#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace nids {

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) noexcept {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for a named stochastic stage: splitmix64(master ^ fnv1a64(name)).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name) noexcept {
  return splitmix64(master ^ fnv1a64(name));
}

// Child seed for an indexed sub-task (tree t, cluster c, ...).
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view name, std::uint64_t a,
                                 std::uint64_t b = 0) noexcept {
  return splitmix64(splitmix64(derive_seed(master, name) ^ splitmix64(a)) ^ b);
}

// Seeded generator. Distributions are computed from raw engine output so that
// draws are identical across standard library implementations.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    const std::uint64_t range = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return static_cast<std::size_t>(x % range);
  }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(index(static_cast<std::size_t>(hi - lo) + 1));
  }

  // Standard normal via Box-Muller; consumes two uniforms per call.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace nids
