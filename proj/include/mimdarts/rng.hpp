#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace mimdarts {

/// Seeded RNG wrapper. Distributions are derived explicitly from raw mt19937
/// output so the stream is reproducible and serializable (std distribution
/// objects carry hidden state and are not portable across stdlibs).
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(uint64_t seed) : gen_(static_cast<std::mt19937::result_type>(seed)) {}

  uint32_t next_u32() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return double(next_u32()) * (1.0 / 4294967296.0); }

  /// Uniform integer in [0, n) without modulo bias.
  uint32_t below(uint32_t n) {
    if (n == 0) return 0;
    const uint32_t limit = uint32_t(4294967296.0 / n) * n;  // largest multiple of n
    uint32_t v;
    do {
      v = next_u32();
    } while (limit != 0 && v >= limit);
    return v % n;
  }

  /// Standard normal via Box-Muller (one value per call; no cached spare).
  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(uint32_t(i))]);
  }

  /// Fisher-Yates draw of k distinct indices from [0, n).
  std::vector<int> sample_without_replacement(int n, int k) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = 0; i < k; ++i) std::swap(idx[i], idx[i + int(below(uint32_t(n - i)))]);
    idx.resize(k);
    return idx;
  }

  std::string serialize() const {
    std::ostringstream ss;
    ss << gen_;
    return ss.str();
  }
  void deserialize(const std::string& s) {
    std::istringstream ss(s);
    ss >> gen_;
  }

 private:
  std::mt19937 gen_;
};

}  // namespace mimdarts
