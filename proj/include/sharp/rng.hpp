#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sharp {

// Draws below avoid std::uniform_*_distribution so that streams are
// reproducible across standard libraries, not just across runs.
using Rng = std::mt19937;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Independent substream for a (seed, purpose) pair.
inline Rng make_rng(std::uint64_t seed, std::uint64_t purpose) {
  return Rng(static_cast<std::uint32_t>(splitmix64(seed * 0x9e3779b97f4a7c15ull + purpose) >> 16));
}

// Unbiased integer in [0, n) (Lemire rejection).
inline std::uint32_t uniform_index(Rng& rng, std::uint32_t n) {
  if (n <= 1) return 0;
  std::uint64_t m = std::uint64_t(rng()) * n;
  auto lo = static_cast<std::uint32_t>(m);
  if (lo < n) {
    std::uint32_t floor = (0u - n) % n;
    while (lo < floor) {
      m = std::uint64_t(rng()) * n;
      lo = static_cast<std::uint32_t>(m);
    }
  }
  return static_cast<std::uint32_t>(m >> 32);
}

inline float uniform_float(Rng& rng, float lo, float hi) {
  float u = static_cast<float>(rng() >> 8) * 0x1.0p-24f;  // [0,1)
  return lo + (hi - lo) * u;
}

template <typename T>
void shuffle_inplace(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, static_cast<std::uint32_t>(i));
    std::swap(v[i - 1], v[j]);
  }
}

// First k entries of a random permutation of 0..n-1.
inline std::vector<std::uint32_t> sample_without_replacement(Rng& rng, std::uint32_t n,
                                                             std::uint32_t k) {
  std::vector<std::uint32_t> idx(n);
  for (std::uint32_t i = 0; i < n; ++i) idx[i] = i;
  if (k > n) k = n;
  for (std::uint32_t i = 0; i < k; ++i) {
    std::uint32_t j = i + uniform_index(rng, n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace sharp
