#pragma once

// Self-contained counter-splittable RNG (splitmix64 seeding, xoshiro256**
// state). Hand-rolled transforms keep every stream byte-reproducible
// independent of the standard library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <vector>

namespace bisimlab {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based child seed of a master seed.
inline std::uint64_t splitmix_seed(std::uint64_t master, std::uint64_t k) {
  std::uint64_t x = master;
  std::uint64_t a = splitmix64(x);
  std::uint64_t y = k ^ 0x5851f42d4c957f2dULL;
  return a ^ splitmix64(y);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) w = splitmix64(x);
  }

  // Child stream k of a master seed; used for per-repetition seeding.
  static Rng split(std::uint64_t master, std::uint64_t k) { return Rng(splitmix_seed(master, k)); }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
    std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double exponential() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return -std::log(u);
  }

  // Dirichlet(1) row: normalized iid exponentials.
  std::vector<double> dirichlet(std::size_t n) {
    std::vector<double> v(n);
    double total = 0.0;
    for (auto& x : v) {
      x = exponential();
      total += x;
    }
    for (auto& x : v) x /= total;
    return v;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace bisimlab
